"""Regenerate the bundled synthetic image corpus.

Writes three 128x128 grayscale PGMs of occluding shaded shapes over a
smooth background with mild texture, plus one 64x64 sample patch cropped
from the first image, into src/invdesc/data/patches/.  Deterministic:
every draw comes from fixed counter-based streams, so rerunning the script
reproduces the files byte for byte.
"""

from __future__ import annotations

import pathlib

import numpy as np
from scipy import ndimage

from invdesc.rngstreams import stream_rng

SIDE = 128
OUT_DIR = pathlib.Path(__file__).resolve().parent.parent / "src" / "invdesc" / "data" / "patches"
CORPUS_SEED = 20240817


def write_pgm(path: pathlib.Path, values: np.ndarray) -> None:
    quant = np.clip(np.round(values * 255.0), 0, 255).astype(np.uint8)
    h, w = quant.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quant.tobytes())


def smooth_background(rng: np.random.Generator, side: int) -> np.ndarray:
    r = np.arange(side, dtype=np.float64)[:, None] / side
    c = np.arange(side, dtype=np.float64)[None, :] / side
    img = 0.45 + 0.25 * (rng.uniform(-1, 1) * r + rng.uniform(-1, 1) * c)
    for _ in range(3):
        cr, cc = rng.uniform(0.1, 0.9, 2)
        amp = rng.uniform(-0.18, 0.18)
        width = rng.uniform(0.25, 0.6)
        img += amp * np.exp(-(((r - cr) ** 2 + (c - cc) ** 2)) / (2 * width**2))
    return img


def paint_shapes(rng: np.random.Generator, img: np.ndarray) -> np.ndarray:
    side = img.shape[0]
    r = np.arange(side, dtype=np.float64)[:, None]
    c = np.arange(side, dtype=np.float64)[None, :]
    out = img.copy()
    n_shapes = int(rng.integers(25, 40))
    for _ in range(n_shapes):
        kind = rng.integers(0, 3)
        cr = rng.uniform(0.05 * side, 0.95 * side)
        cc = rng.uniform(0.05 * side, 0.95 * side)
        theta = rng.uniform(0, np.pi)
        u = (c - cc) * np.cos(theta) + (r - cr) * np.sin(theta)
        v = -(c - cc) * np.sin(theta) + (r - cr) * np.cos(theta)
        a = rng.uniform(5.0, 18.0)
        b = rng.uniform(3.5, 14.4)
        if kind == 0:  # ellipse
            mask = (u / a) ** 2 + (v / b) ** 2 <= 1.0
        elif kind == 1:  # rotated rectangle
            mask = (np.abs(u) <= a) & (np.abs(v) <= b)
        else:  # half-disk
            mask = ((u**2 + v**2) <= a**2) & (v >= 0)
        base = rng.uniform(0.08, 0.92)
        slope_u, slope_v = rng.uniform(-0.15, 0.15, 2) / side
        shading = base + slope_u * u + slope_v * v
        out = np.where(mask, shading, out)
    return out


def bandpass_texture(rng: np.random.Generator, side: int) -> np.ndarray:
    noise = rng.standard_normal((side, side))
    band = ndimage.gaussian_filter(noise, 1.0, mode="nearest") - ndimage.gaussian_filter(
        noise, 2.5, mode="nearest"
    )
    band /= np.abs(band).max()
    return band


def make_image(stream: int) -> np.ndarray:
    rng = stream_rng(CORPUS_SEED, stream)
    img = smooth_background(rng, SIDE)
    img = paint_shapes(rng, img)
    img += 0.15 * bandpass_texture(rng, SIDE)
    img = ndimage.gaussian_filter(img, 0.6, mode="nearest")
    return np.clip(img, 0.02, 0.98)


def best_sample_crop(img: np.ndarray, crop: int = 64) -> np.ndarray:
    """Deterministically pick the stride-16 crop with the most gradient energy."""
    gy, gx = np.gradient(img)
    energy = np.hypot(gx, gy)
    best = None
    for r0 in range(0, img.shape[0] - crop + 1, 16):
        for c0 in range(0, img.shape[1] - crop + 1, 16):
            e = float(energy[r0 : r0 + crop, c0 : c0 + crop].sum())
            if best is None or e > best[0]:
                best = (e, r0, c0)
    _, r0, c0 = best
    return img[r0 : r0 + crop, c0 : c0 + crop]


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    first = None
    for i in range(3):
        img = make_image(stream=i)
        if i == 0:
            first = img
        write_pgm(OUT_DIR / f"shapes_{i:02d}.pgm", img)
        print(f"wrote shapes_{i:02d}.pgm")
    write_pgm(OUT_DIR / "sample_64.pgm", best_sample_crop(first))
    print("wrote sample_64.pgm")


if __name__ == "__main__":
    main()
