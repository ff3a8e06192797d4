"""Two-layer marginalization toy over cyclic shifts of discrete signals.

A signal of length ``n`` over a finite alphabet is generated top-down: a
class picks a layer-2 template and shift, which picks a layer-1 template
and shift, which emits the signal one position at a time.  Because the
layer-2 conditional depends on its own shift only through the composed
shift, the class-conditional signal likelihood decomposes into feature
maps contracted layer by layer - a form small enough here to verify
against summing every hidden path outright.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ToyLayeredModel",
    "MixtureWeights",
    "shift_signal",
    "feature_maps",
    "direct_marginal",
    "layered_marginal",
    "receptive_mixture",
    "compose_small_shifts",
    "make_random_model",
    "model_to_json",
    "model_from_json",
]

_NORM_TOL = 1e-12


def _check_table(arr: np.ndarray, axes: tuple[int, ...], what: str) -> None:
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{what} must be finite and nonnegative")
    sums = arr.sum(axis=axes)
    if np.max(np.abs(sums - 1.0)) > _NORM_TOL:
        raise ValueError(f"{what} must normalize to 1 over its outcome axes within {_NORM_TOL}")


@dataclass(frozen=True)
class ToyLayeredModel:
    """Conditional tables of the two-layer cyclic generative model.

    ``templates[k, i, a]`` is the probability that position ``i`` of an
    unshifted layer-1 template ``k`` emits symbol ``a``; shifting by ``l``
    moves position ``i`` to ``(i + l) mod n``.  ``assignment[j, k, m]``
    gives the layer-1 choice probabilities for layer-2 template ``j``: at
    layer-2 shift ``l2``, choosing ``(k, l1)`` has probability
    ``assignment[j, k, (l1 + l2) mod n]``, so a parent shift relabels the
    child shifts without changing their distribution.  ``top[c, j, l2]``
    is the class-conditional layer-2 law.
    """

    templates: np.ndarray
    assignment: np.ndarray
    top: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.templates, dtype=np.float64)
        a = np.asarray(self.assignment, dtype=np.float64)
        p = np.asarray(self.top, dtype=np.float64)
        if t.ndim != 3 or a.ndim != 3 or p.ndim != 3:
            raise ValueError("templates, assignment, and top must be 3-D arrays")
        k1, n, _ = t.shape
        if n < 1 or k1 < 1:
            raise ValueError(f"bad template shape {t.shape}")
        if a.shape[1] != k1 or a.shape[2] != n:
            raise ValueError(f"assignment shape {a.shape} does not match templates {t.shape}")
        if p.shape[1] != a.shape[0] or p.shape[2] != n:
            raise ValueError(f"top shape {p.shape} does not match assignment {a.shape}")
        _check_table(t, (2,), "per-position template table")
        _check_table(a, (1, 2), "layer-1 assignment table")
        _check_table(p, (1, 2), "top table")
        for arr, name in ((t, "templates"), (a, "assignment"), (p, "top")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.templates.shape[1]

    @property
    def alphabet_size(self) -> int:
        return self.templates.shape[2]

    @property
    def k1(self) -> int:
        return self.templates.shape[0]

    @property
    def k2(self) -> int:
        return self.assignment.shape[0]

    @property
    def n_classes(self) -> int:
        return self.top.shape[0]


@dataclass(frozen=True)
class MixtureWeights:
    """Nonnegative weights over (class, receptive field) summing to 1."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(float(w.sum()) - 1.0) > _NORM_TOL:
            raise ValueError(f"weights must sum to 1 within {_NORM_TOL}, got {w.sum()}")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


def _check_signal(y, model: ToyLayeredModel) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1 or arr.size != model.n:
        raise ValueError(f"signal must be 1-D of length {model.n}, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError("signal entries must be integers indexing the alphabet")
    if arr.min() < 0 or arr.max() >= model.alphabet_size:
        raise ValueError(
            f"signal symbols must lie in [0, {model.alphabet_size}), got range "
            f"[{arr.min()}, {arr.max()}]"
        )
    return arr.astype(np.intp)


def shift_signal(y, g: int) -> np.ndarray:
    """Cyclically shift a signal so content at position i moves to i + g."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError("signal must be 1-D")
    return np.roll(arr, int(g))


def _template_likelihood(y: np.ndarray, model: ToyLayeredModel, k: int, l1: int) -> float:
    n = model.n
    value = 1.0
    for i in range(n):
        value *= model.templates[k, (i - l1) % n, y[i]]
    return value


def feature_maps(y, model: ToyLayeredModel) -> np.ndarray:
    """Layer-1 likelihood table ``F[k, l1] = p(y | template k at shift l1)``."""
    arr = _check_signal(y, model)
    out = np.empty((model.k1, model.n), dtype=np.float64)
    for k in range(model.k1):
        for l1 in range(model.n):
            out[k, l1] = _template_likelihood(arr, model, k, l1)
    return out


def direct_marginal(y, model: ToyLayeredModel, theta: int) -> float:
    """Class-conditional signal probability by summing every hidden path.

    Loops over all ``(j, l2, k, l1)`` combinations, recomputing the layer-1
    likelihood inside the innermost iteration; deliberately shares no
    intermediate with :func:`layered_marginal`.
    """
    arr = _check_signal(y, model)
    if not (0 <= theta < model.n_classes):
        raise ValueError(f"class index {theta} out of range [0, {model.n_classes})")
    n = model.n
    total = 0.0
    for j in range(model.k2):
        for l2 in range(n):
            for k in range(model.k1):
                for l1 in range(n):
                    total += (
                        _template_likelihood(arr, model, k, l1)
                        * model.assignment[j, k, (l1 + l2) % n]
                        * model.top[theta, j, l2]
                    )
    return total


def layered_marginal(y, model: ToyLayeredModel, theta: int) -> float:
    """Class-conditional signal probability via layered contraction.

    Evaluates the layer-1 feature maps once, contracts them with the
    assignment table by cyclic correlation to get per-``(j, l2)`` values,
    then weights by the top table.  Identical to :func:`direct_marginal`
    up to float roundoff, at a fraction of the operations.
    """
    arr = _check_signal(y, model)
    if not (0 <= theta < model.n_classes):
        raise ValueError(f"class index {theta} out of range [0, {model.n_classes})")
    n = model.n
    f = feature_maps(arr, model)
    bracket = np.empty((model.k2, n), dtype=np.float64)
    for j in range(model.k2):
        for l2 in range(n):
            acc = 0.0
            for k in range(model.k1):
                for l1 in range(n):
                    acc += f[k, l1] * model.assignment[j, k, (l1 + l2) % n]
            bracket[j, l2] = acc
    return float(np.sum(bracket * model.top[theta]))


def receptive_mixture(feature_values, weights: MixtureWeights) -> float:
    """Convex combination of per-(class, field) likelihoods under the weights."""
    f = np.asarray(feature_values, dtype=np.float64)
    if f.shape != weights.w.shape:
        raise ValueError(f"feature table {f.shape} does not match weights {weights.w.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("feature values must be finite")
    return float(np.sum(f * weights.w))


def compose_small_shifts(g: int, step: int) -> list[int]:
    """Factor a cyclic shift into shifts of magnitude at most ``step``.

    The factors all share the sign of ``g``, have magnitude ``step`` except
    for a final remainder, and sum to ``g`` exactly; zero factors never
    appear, so ``g = 0`` yields an empty list.
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    g = int(g)
    if g == 0:
        return []
    sign = 1 if g > 0 else -1
    magnitude = abs(g)
    parts = [sign * step] * (magnitude // step)
    if magnitude % step:
        parts.append(sign * (magnitude % step))
    return parts


def make_random_model(
    rng: np.random.Generator,
    n: int = 6,
    k1: int = 2,
    k2: int = 2,
    n_classes: int = 2,
    alphabet_size: int = 2,
) -> ToyLayeredModel:
    """Draw a random model whose tables satisfy every normalization exactly.

    Entries are uniform draws renormalized over each table's outcome axes,
    so the conditional-independence structure holds by construction and
    any layered-vs-direct agreement tests the evaluation code alone.
    """
    t = rng.uniform(0.05, 1.0, (k1, n, alphabet_size))
    t /= t.sum(axis=2, keepdims=True)
    a = rng.uniform(0.05, 1.0, (k2, k1, n))
    a /= a.sum(axis=(1, 2), keepdims=True)
    p = rng.uniform(0.05, 1.0, (n_classes, k2, n))
    p /= p.sum(axis=(1, 2), keepdims=True)
    return ToyLayeredModel(t, a, p)


def model_to_json(model: ToyLayeredModel) -> str:
    return json.dumps(
        {
            "templates": model.templates.tolist(),
            "assignment": model.assignment.tolist(),
            "top": model.top.tolist(),
        },
        sort_keys=True,
    )


def model_from_json(text: str) -> ToyLayeredModel:
    data = json.loads(text)
    missing = {"templates", "assignment", "top"} - set(data)
    if missing:
        raise ValueError(f"model JSON missing keys: {sorted(missing)}")
    return ToyLayeredModel(
        np.asarray(data["templates"], dtype=np.float64),
        np.asarray(data["assignment"], dtype=np.float64),
        np.asarray(data["top"], dtype=np.float64),
    )
