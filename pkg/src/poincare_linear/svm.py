"""Soft-margin SVM in a tangent space of the Poincaré ball, solved by SGD.

Points are mapped once to ``v_i = log_p(x_i)``; the problem is then the
convex program ``min ½‖w‖² + C Σ max(0, 1 - y_i⟨v_i, w⟩)``.  The solver takes
single-sample steps with gradient ``w - N C y_i v_i`` when the hinge is active
(``w`` otherwise) and step size ``1/(t + lr_offset)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import geometry as geo
from .errors import UsageError


@dataclass(frozen=True)
class SvmConfig:
    """Solver settings.

    The objective is evaluated every ``eval_every`` steps (default: once per
    ``N`` steps); the run stops when the change between evaluations is at most
    ``tol · max(1, |f|)`` or after ``max_iter`` steps (default ``1000·N``).
    With ``keep_best`` the evaluated iterate with the lowest objective is
    returned instead of the last one.
    """

    C: float = 1000.0
    tol: float = 1e-4
    max_iter: int | None = None
    eval_every: int | None = None
    lr_offset: float = 1000.0
    keep_best: bool = True

    DEFAULT_EPOCHS = 1000

    def __post_init__(self):
        if not self.C > 0:
            raise UsageError(f"C must be positive, got {self.C}")
        if not self.tol > 0:
            raise UsageError(f"tol must be positive, got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise UsageError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.eval_every is not None and self.eval_every < 1:
            raise UsageError(f"eval_every must be >= 1, got {self.eval_every}")
        if not self.lr_offset > 0:
            raise UsageError(f"lr_offset must be positive, got {self.lr_offset}")


SYNTHETIC_C = 1000.0
REAL_DATA_C = 5.0


@dataclass
class LinearModel:
    """Linear classifier ``sgn(⟨φ(x), w⟩ + b)``.

    ``kind="poincare"`` uses ``φ = log_p`` and no bias; ``kind="euclidean"``
    uses raw coordinates and a bias ``b``.  ``platt`` holds optional sigmoid
    coefficients ``(A, B)``.
    """

    p: np.ndarray
    w: np.ndarray
    platt: tuple[float, float] | None = None
    b: float = 0.0
    kind: str = "poincare"
    converged: bool = True
    steps: int = 0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.p.shape != self.w.shape or self.w.ndim != 1:
            raise UsageError(f"p and w must be vectors of equal length, got {self.p.shape} and {self.w.shape}")
        if not np.all(np.isfinite(self.w)):
            raise UsageError("model weights must be finite")
        if self.kind not in ("poincare", "euclidean"):
            raise UsageError(f"unknown model kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def features(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        if x.shape[-1] != self.dim:
            raise UsageError(f"model expects dimension {self.dim}, got {x.shape[-1]}")
        if self.kind == "euclidean":
            return x
        return geo.log_map(self.p, geo.check_ball(x, "points"))

    def score(self, points) -> np.ndarray:
        return self.features(points) @ self.w + self.b

    def predict(self, points) -> np.ndarray:
        return geo.sgn(self.score(points))

    def accuracy(self, points, labels) -> float:
        return float(np.mean(self.predict(points) == np.asarray(labels)))

    @property
    def hyperplane(self) -> geo.Hyperplane:
        if self.kind != "poincare":
            raise UsageError("only Poincaré models define a Poincaré hyperplane")
        return geo.Hyperplane(self.p, self.w)


def svm_objective(w, tangents, labels, C: float) -> float:
    """``½‖w‖² + C Σ max(0, 1 - y_i⟨v_i, w⟩)``."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(tangents, dtype=float)
    y = np.asarray(labels, dtype=float)
    if v.ndim != 2 or v.shape[1] != w.shape[0] or y.shape != (v.shape[0],):
        raise UsageError("objective needs (N, d) tangents, N labels and a length-d w")
    hinge = np.maximum(0.0, 1.0 - y * (v @ w))
    return 0.5 * float(w @ w) + C * float(hinge.sum())


def sample_gradient(w, v, y: int, n: int, C: float) -> np.ndarray:
    """Single-sample stochastic gradient; its mean over the data is a subgradient of the objective."""
    w = np.asarray(w, dtype=float)
    if 1.0 - y * float(np.asarray(v) @ w) >= 0.0:
        return w - n * C * y * np.asarray(v, dtype=float)
    return w.copy()


def _check_labels(features: np.ndarray, labels) -> np.ndarray:
    y = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] == 0:
        raise UsageError("need a non-empty (N, d) dataset")
    if y.shape != (features.shape[0],):
        raise UsageError(f"got {features.shape[0]} points but labels of shape {y.shape}")
    if not np.all(np.isin(y, (-1, 1))):
        raise UsageError("labels must be -1 or +1")
    return y.astype(np.float64)


def sgd_solve(features, labels, cfg: SvmConfig, seed=None) -> tuple[np.ndarray, np.ndarray, bool, int]:
    """Run the SGD solver on fixed feature vectors.

    Returns ``(w, objective_trace, converged, steps)``; the trace starts with
    ``f(0) = N C``.
    """
    v = np.ascontiguousarray(features, dtype=np.float64)
    y = _check_labels(v, labels)
    n = v.shape[0]
    window = cfg.eval_every or n
    max_iter = cfg.max_iter or cfg.DEFAULT_EPOCHS * n
    rng = np.random.default_rng(seed)
    w = np.zeros(v.shape[1])
    f_prev = svm_objective(w, v, y, cfg.C)
    trace = [f_prev]
    best_f, best_w = f_prev, w.copy()
    t, converged = 0, False
    while t < max_iter:
        steps = min(window, max_iter - t)
        idx = rng.integers(0, n, size=steps)
        w = _kernels.sgd_steps(v, y, idx, w, t + 1, float(n) * cfg.C, cfg.lr_offset)
        t += steps
        f = svm_objective(w, v, y, cfg.C)
        trace.append(f)
        if f < best_f:
            best_f, best_w = f, w.copy()
        if abs(f - f_prev) <= cfg.tol * max(1.0, abs(f_prev)):
            converged = True
            break
        f_prev = f
    # the last SGD iterate oscillates at large N·C; the best evaluated one is kept
    return (best_w if cfg.keep_best else w), np.asarray(trace), converged, t


def svm_train(points, labels, p, cfg: SvmConfig | None = None, seed=None):
    """Poincaré SVM with reference point ``p``; returns ``(LinearModel, trace)``."""
    cfg = cfg or SvmConfig()
    p = geo.check_ball(p, "reference point")
    x = geo.check_ball(points, "points")
    if x.ndim != 2 or p.shape != (x.shape[1],):
        raise UsageError("points must be (N, d) with d = len(p)")
    w, trace, converged, steps = sgd_solve(geo.log_map(p, x), labels, cfg, seed)
    return LinearModel(p=p, w=w, converged=converged, steps=steps), trace


def euclidean_svm_train(points, labels, cfg: SvmConfig | None = None, seed=None):
    """Baseline SVM on ambient coordinates with a bias term.

    The bias is learned as the weight of a constant feature 1, so it is
    regularised together with ``w``.
    """
    cfg = cfg or SvmConfig()
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise UsageError("need a non-empty (N, d) dataset")
    aug = np.hstack([x, np.ones((x.shape[0], 1))])
    wb, trace, converged, steps = sgd_solve(aug, labels, cfg, seed)
    model = LinearModel(
        p=np.zeros(x.shape[1]), w=wb[:-1], b=float(wb[-1]), kind="euclidean",
        converged=converged, steps=steps,
    )
    return model, trace


def margin_lower_bound(model: LinearModel) -> float:
    """Guaranteed distance from any point with ``y⟨v, w⟩ >= 1`` to the hyperplane.

    ``asinh(2 tanh(σ_p/(2‖w‖)) / (1 - tanh²(σ_p/(2‖w‖))))``, which equals
    ``σ_p/‖w‖``.
    """
    norm = float(np.linalg.norm(model.w))
    if norm == 0.0:
        raise UsageError("margin bound is undefined for w = 0")
    half = float(geo.conformal_factor(model.p)) / (2.0 * norm)
    th = math.tanh(half)
    if th >= 1.0:
        # tanh saturated: 2 tanh(h)/(1 - tanh²(h)) = sinh(2h), and asinh(sinh(2h)) = 2h
        return 2.0 * half
    return math.asinh(2.0 * th / (1.0 - th * th))
