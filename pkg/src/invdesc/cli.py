"""Command-line experiment runner.

Five subcommands drive the library's experiment protocols and write CSV
(and optional SVG) into an output directory.  All randomness flows from
``--seed`` through counter-based streams, and parallel work is gathered
in submission order, so outputs are byte-identical across runs and worker
counts.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures
(reported as a single diagnostic line on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import corpus_paths
from .figio import polyline_svg, write_csv
from .image import load_image
from .relufilters import equivalence_report, kernel_sup_distances, report_to_csv, two_edge_band
from .studies import (
    clamp_study,
    hierarchy_battery,
    orientation_curve_trials,
    sal_match_experiment,
)

__all__ = ["RunConfig", "main"]


@dataclass(frozen=True)
class RunConfig:
    """One resolved invocation: seed, inputs, model knobs, output target."""

    seed: int
    inputs: tuple[Path, ...]
    out_dir: Path
    patch_size: int
    eps: float
    sigma: float | None
    tau: float
    bins: int
    stride: int
    scale_steps: int
    separation: int
    trials: int
    workers: int
    emit_svg: bool


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        inputs=tuple(args.input or ()),
        out_dir=args.out,
        patch_size=getattr(args, "patch_size", 16),
        eps=getattr(args, "eps", 0.1),
        sigma=getattr(args, "sigma", None),
        tau=getattr(args, "tau", 0.2),
        bins=getattr(args, "bins", 8),
        stride=getattr(args, "stride", 2),
        scale_steps=getattr(args, "scale_steps", 1),
        separation=getattr(args, "separation", 4),
        trials=getattr(args, "trials", 1),
        workers=max(1, args.workers),
        emit_svg=args.emit_svg,
    )


def _load_inputs(cfg: RunConfig, default_paths) -> list:
    paths = cfg.inputs or tuple(default_paths)
    return [load_image(p) for p in paths]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True) + "\n")


def cmd_curve(cfg: RunConfig) -> int:
    images = _load_inputs(cfg, corpus_paths())
    alphas, centers, trials = orientation_curve_trials(
        images, cfg.seed, cfg.trials, eps=cfg.eps, bins=cfg.bins, workers=cfg.workers
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    header = ["trial", "alpha", "marginal", "sift_integrand"]

    def table(grid, marg_rows, sift_rows):
        rows = []
        for t, m, s in zip(trials, marg_rows, sift_rows):
            for a, mv, sv in zip(grid, m, s):
                rows.append((t.index, float(a), float(mv), float(sv)))
        marg = np.stack(marg_rows)
        sift = np.stack(sift_rows)
        stats = (
            ("mean", marg.mean(axis=0), sift.mean(axis=0)),
            ("band_lower", marg.mean(axis=0) - 3 * marg.std(axis=0), sift.mean(axis=0) - 3 * sift.std(axis=0)),
            ("band_upper", marg.mean(axis=0) + 3 * marg.std(axis=0), sift.mean(axis=0) + 3 * sift.std(axis=0)),
        )
        for label, mv, sv in stats:
            for a, x, y in zip(grid, mv, sv):
                rows.append((label, float(a), float(x), float(y)))
        return rows

    write_csv(
        cfg.out_dir / "curve.csv",
        header,
        table(alphas, [t.marginal for t in trials], [t.sift for t in trials]),
    )
    write_csv(
        cfg.out_dir / f"curve_bins{cfg.bins}.csv",
        header,
        table(centers, [t.marginal_binned for t in trials], [t.sift_binned for t in trials]),
    )
    if cfg.emit_svg:
        marg = np.stack([t.marginal for t in trials])
        sift = np.stack([t.sift for t in trials])
        xs = [float(a) for a in alphas]
        series = [
            (xs, list(marg.mean(axis=0)), "marginal mean"),
            (xs, list(marg.mean(axis=0) - 3 * marg.std(axis=0)), "marginal -3 std"),
            (xs, list(marg.mean(axis=0) + 3 * marg.std(axis=0)), "marginal +3 std"),
            (xs, list(sift.mean(axis=0)), "integrand mean"),
        ]
        (cfg.out_dir / "curve.svg").write_text(
            polyline_svg(series, title="orientation likelihood vs histogram integrand")
        )
    return 0


def cmd_clamp_study(cfg: RunConfig) -> int:
    images = _load_inputs(cfg, corpus_paths())
    taus = [1.0, 0.5, 0.4, 0.3, 0.2, 0.1]
    if cfg.tau not in taus:
        taus = [1.0] + sorted(set(taus[1:]) | {cfg.tau}, reverse=True)
    res = clamp_study(
        images,
        cfg.seed,
        n_patches=cfg.trials,
        patch_size=cfg.patch_size,
        eps=cfg.eps,
        bins_coarse=cfg.bins,
        taus=tuple(taus),
        workers=cfg.workers,
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        cfg.out_dir / "clamp.csv",
        ["tau", "l1_coarse", "l1_fine"],
        list(zip(res.taus, res.l1_coarse, res.l1_fine)),
    )
    _write_json(
        cfg.out_dir / "clamp_summary.json",
        {
            "bins_coarse": res.bins_coarse,
            "bins_fine": res.bins_fine,
            "control_l1": res.control_l1,
            "l1_at_reference": res.l1_coarse[res.taus.index(cfg.tau)],
            "n_patches": res.n_patches_used,
            "reference_tau": cfg.tau,
            "tau_star": res.tau_star,
        },
    )
    if cfg.emit_svg:
        sweep = [(t, c, f) for t, c, f in zip(res.taus, res.l1_coarse, res.l1_fine)]
        xs = [t for t, _, _ in sweep]
        series = [
            (xs, [c for _, c, _ in sweep], f"{res.bins_coarse} bins"),
            (xs, [f for _, _, f in sweep], f"{res.bins_fine} bins"),
        ]
        (cfg.out_dir / "clamp.svg").write_text(
            polyline_svg(series, title="histogram-to-marginal L1 vs clamp fraction")
        )
    return 0


def cmd_relu_compare(cfg: RunConfig) -> int:
    if cfg.sigma is not None:
        sigmas = [cfg.sigma]
    else:
        sigmas = [cfg.separation * f for f in (0.25, 0.5, 1.0, 2.0, 4.0)]
    side_max = 2 * math.ceil(3 * max(sigmas)) + 3
    if cfg.inputs:
        img = load_image(cfg.inputs[0]).values
    else:
        img = two_edge_band(
            cfg.separation,
            height=side_max + 4,
            width=max(8 * cfg.separation, side_max + 21),
        )
    rows = equivalence_report(img, sigmas)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "relu.csv").write_text(report_to_csv(rows))
    write_csv(
        cfg.out_dir / "kernels.csv",
        ["power", "dispersion", "sup_distance"],
        kernel_sup_distances(),
    )
    if cfg.emit_svg:
        series = [([r.sigma for r in rows], [r.rel_error for r in rows], "squared relative L2")]
        (cfg.out_dir / "relu.svg").write_text(
            polyline_svg(series, title="rectification-order error vs filter scale")
        )
    return 0


def cmd_sal_match(cfg: RunConfig) -> int:
    paths = list(cfg.inputs) if cfg.inputs else corpus_paths()[:2]
    source = load_image(paths[0])
    scene = load_image(paths[-1])
    outcome = sal_match_experiment(
        source,
        scene,
        cfg.seed,
        patch_size=cfg.patch_size,
        stride=cfg.stride,
        scale_steps=cfg.scale_steps,
        eps=cfg.eps,
        workers=cfg.workers,
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "sal.csv").write_text(outcome.result.to_csv())
    best = outcome.result.best
    _write_json(
        cfg.out_dir / "sal_summary.json",
        {
            "best_index": int(outcome.result.best_index),
            "best_s": best.s,
            "best_score": outcome.result.best_score,
            "best_tx": best.tx,
            "best_ty": best.ty,
            "planted_tx": outcome.planted_tx,
            "planted_ty": outcome.planted_ty,
            "pose_error": outcome.pose_error,
        },
    )
    if cfg.emit_svg:
        xs = list(range(len(outcome.result.scores)))
        series = [(xs, [float(s) for s in outcome.result.scores], "pooled log likelihood")]
        (cfg.out_dir / "sal.svg").write_text(
            polyline_svg(series, title="pooled score per group sample")
        )
    return 0


def cmd_hierarchy_check(cfg: RunConfig) -> int:
    rows = hierarchy_battery(cfg.seed, n_models=cfg.trials, workers=cfg.workers)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        cfg.out_dir / "hierarchy.csv",
        [
            "index",
            "n",
            "k1",
            "k2",
            "n_classes",
            "alphabet_size",
            "layered_vs_direct",
            "shift_covariance",
        ],
        [
            (r.index, r.n, r.k1, r.k2, r.n_classes, r.alphabet_size, r.layered_vs_direct, r.shift_covariance)
            for r in rows
        ],
    )
    _write_json(
        cfg.out_dir / "hierarchy_summary.json",
        {
            "max_layered_vs_direct": max(r.layered_vs_direct for r in rows),
            "max_shift_covariance": max(r.shift_covariance for r in rows),
            "n_models": len(rows),
        },
    )
    if cfg.emit_svg:
        xs = [r.index for r in rows]
        series = [
            (xs, [r.layered_vs_direct for r in rows], "layered vs direct"),
            (xs, [r.shift_covariance for r in rows], "shift covariance"),
        ]
        (cfg.out_dir / "hierarchy.svg").write_text(
            polyline_svg(series, title="layered-model agreement gaps")
        )
    return 0


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sp.add_argument(
        "--input",
        type=Path,
        nargs="+",
        default=None,
        metavar="IMAGE",
        help="input image paths (default: bundled corpus)",
    )
    sp.add_argument("--out", type=Path, required=True, help="output directory")
    sp.add_argument("--workers", type=int, default=1, help="thread-pool width (default 1)")
    sp.add_argument(
        "--svg", action="store_true", dest="emit_svg", help="also write SVG renderings"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invdesc",
        description="Orientation-likelihood, descriptor, matching, and hierarchy experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sp = sub.add_parser("curve", help="likelihood vs histogram-integrand curves at random pixels")
    _add_common(sp)
    sp.add_argument("--trials", type=int, default=20, help="number of random pixels (default 20)")
    sp.add_argument("--eps", type=float, default=0.1, help="noise scale (default 0.1)")
    sp.add_argument("--bins", type=int, default=8, help="histogram bins (default 8)")
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("clamp-study", help="clamped histograms against exact patch marginals")
    _add_common(sp)
    sp.add_argument("--trials", type=int, default=40, help="number of random patches (default 40)")
    sp.add_argument("--eps", type=float, default=0.1, help="noise scale (default 0.1)")
    sp.add_argument("--bins", type=int, default=8, help="coarse bin count (default 8)")
    sp.add_argument("--tau", type=float, default=0.2, help="reference clamp fraction (default 0.2)")
    sp.add_argument("--patch-size", type=int, default=16, help="patch side (default 16)")
    sp.set_defaults(func=cmd_clamp_study)

    sp = sub.add_parser("relu-compare", help="rectify-then-smooth vs smooth-then-rectify")
    _add_common(sp)
    sp.add_argument(
        "--separation", type=int, default=4, help="edge separation of the test band (default 4)"
    )
    sp.add_argument(
        "--sigma", type=float, default=None, help="evaluate a single filter scale instead of the ladder"
    )
    sp.set_defaults(func=cmd_relu_compare)

    sp = sub.add_parser("sal-match", help="plant a patch at a seeded pose and recover it")
    _add_common(sp)
    sp.add_argument("--patch-size", type=int, default=16, help="template side (default 16)")
    sp.add_argument("--stride", type=int, default=2, help="translation lattice stride (default 2)")
    sp.add_argument("--scale-steps", type=int, default=1, help="scale ladder size (default 1)")
    sp.add_argument("--eps", type=float, default=0.1, help="noise scale (default 0.1)")
    sp.set_defaults(func=cmd_sal_match)

    sp = sub.add_parser("hierarchy-check", help="layered-vs-direct agreement on random models")
    _add_common(sp)
    sp.add_argument("--trials", type=int, default=50, help="number of random models (default 50)")
    sp.set_defaults(func=cmd_hierarchy_check)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    cfg = _config_from_args(args)
    try:
        return args.func(cfg)
    except Exception as exc:  # single-line diagnostic contract for runtime failures
        print(f"invdesc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
