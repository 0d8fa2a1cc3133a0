"""One-vs-rest classification with per-class reference points and Platt scaling."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import hulls
from . import perceptrons
from . import svm
from .errors import UsageError

BASES = ("svm", "euclidean-svm", "perceptron", "second-order")


def _nll(scores: np.ndarray, targets: np.ndarray, A: float, B: float) -> float:
    f = scores * A + B
    # log(1 + exp(f)) - (1 - t) f, split by the sign of f to avoid overflow
    linear = np.where(f >= 0, targets * f, (targets - 1.0) * f)
    return float(np.sum(linear + np.log1p(np.exp(-np.abs(f)))))


def platt_fit(scores, labels, max_iter: int = 100, grad_tol: float = 1e-10) -> tuple[float, float]:
    """Fit ``P(y = +1 | s) = 1 / (1 + exp(A s + B))`` by Newton's method.

    Uses smoothed targets ``(N₊ + 1)/(N₊ + 2)`` and ``1/(N₋ + 2)`` and a
    backtracking line search; stops when the gradient norm drops below
    ``grad_tol`` or after ``max_iter`` iterations.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or y.shape != s.shape:
        raise UsageError("scores and labels must be 1-D arrays of equal length")
    if not np.all(np.isin(y, (-1, 1))):
        raise UsageError("Platt labels must be -1 or +1")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == -1))
    if n_pos == 0 or n_neg == 0:
        raise UsageError("Platt scaling needs both positive and negative examples")
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    fval = _nll(s, t, A, B)
    ridge = 1e-12
    for _ in range(max_iter):
        p = platt_prob(s, (A, B))
        d2 = p * (1.0 - p)
        h11 = ridge + float(np.sum(s * s * d2))
        h22 = ridge + float(np.sum(d2))
        h21 = float(np.sum(s * d2))
        d1 = t - p
        g1 = float(np.sum(s * d1))
        g2 = float(np.sum(d1))
        if math.hypot(g1, g2) < grad_tol:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            new = _nll(s, t, A + step * dA, B + step * dB)
            if new < fval + 1e-4 * step * gd:
                A, B, fval = A + step * dA, B + step * dB, new
                break
            step /= 2.0
        else:
            # no decrease possible at machine precision
            break
    return A, B


def platt_prob(scores, coef: tuple[float, float]) -> np.ndarray:
    """Posterior ``1 / (1 + exp(A s + B))``, evaluated without overflow."""
    A, B = coef
    f = np.asarray(scores, dtype=float) * A + B
    e = np.exp(-np.abs(f))
    return np.where(f >= 0, e / (1.0 + e), 1.0 / (1.0 + e))


@dataclass(frozen=True)
class MulticlassModel:
    heads: tuple[svm.LinearModel, ...]
    class_ids: np.ndarray

    def __post_init__(self):
        if len(self.heads) < 2 or len(self.heads) != len(self.class_ids):
            raise UsageError("a multiclass model needs K >= 2 heads, one per class")
        if any(h.platt is None for h in self.heads):
            raise UsageError("every head must carry Platt coefficients")

    @property
    def dim(self) -> int:
        return self.heads[0].dim


def _head_model(points, y, p, base: str, cfg, seed) -> svm.LinearModel:
    if base == "svm":
        model, _ = svm.svm_train(points, y, p, cfg, seed)
        return model
    if base == "euclidean-svm":
        model, _ = svm.euclidean_svm_train(points, y, cfg, seed)
        return model
    if base == "perceptron":
        _, report = perceptrons.perceptron_train(points, y, p, seed=seed)
    elif base == "second-order":
        _, report = perceptrons.second_order_train(points, y, p, seed=seed)
    else:
        raise UsageError(f"unknown base classifier {base!r}; choose from {BASES}")
    return svm.LinearModel(p=p, w=report.final_w, converged=report.converged, steps=report.steps)


def _train_head(points, labels, cls, base, cfg, seed, hull_method):
    y = np.where(labels == cls, 1, -1)
    ref = hulls.reference_point(points[y == 1], points[y == -1], method=hull_method)
    model = _head_model(points, y, ref.p, base, cfg, seed)
    model.platt = platt_fit(model.score(points), y)
    return model


def ovr_train(
    points,
    labels,
    base: str = "svm",
    cfg: svm.SvmConfig | None = None,
    seed: int | None = None,
    hull_method: str = "graham",
    jobs: int = 1,
) -> MulticlassModel:
    """Train one calibrated binary head per class (class vs the rest).

    Each head learns its own reference point from the closest pair of hull
    vertices of its two sides (closest pair of points when ``d > 2``).  All
    heads share ``seed``, so relabelling the classes permutes the heads
    without changing them.
    """
    if base not in BASES:
        raise UsageError(f"unknown base classifier {base!r}; choose from {BASES}")
    x = geo.check_ball(points, "points")
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise UsageError("need (N, d) points and N labels")
    classes = np.unique(y)
    if classes.size < 2:
        raise UsageError("one-vs-rest needs at least two classes")
    args = [(x, y, c, base, cfg, seed, hull_method) for c in classes]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            heads = list(pool.map(lambda a: _train_head(*a), args))
    else:
        heads = [_train_head(*a) for a in args]
    return MulticlassModel(heads=tuple(heads), class_ids=classes)


def predict_proba(model: MulticlassModel, points) -> np.ndarray:
    """``(N, K)`` Platt posteriors, one column per head (not normalised)."""
    x = np.asarray(points, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.dim:
        raise UsageError(f"model expects dimension {model.dim}, got {x.shape[1]}")
    probs = np.column_stack([platt_prob(h.score(x), h.platt) for h in model.heads])
    return probs[0] if single else probs


def predict(model: MulticlassModel, points):
    """MAP class id; ties go to the lowest class id."""
    probs = predict_proba(model, points)
    # class_ids are sorted, and argmax returns the first maximum
    return model.class_ids[np.argmax(probs, axis=-1)]
