"""Online learners in the Poincaré ball and hyperboloid, with mistake bounds.

Every learner cycles over the data (in a seeded order when ``seed`` is given)
until a pass makes no mistakes or ``max_epochs`` passes have run.  By default
an update fires on ``y⟨w, v⟩ <= 0``, so a point exactly on the boundary
triggers an update whatever its label; ``trigger="predict"`` instead fires on
``sgn(⟨w, v⟩) != y`` with ``sgn(0) = +1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import geometry as geo
from . import datagen
from .datagen import strategic_stream
from .errors import UsageError

TRIGGERS = ("margin", "predict")
# the smallest planted margins need over 15,000 passes at N = 10^4
MAX_EPOCHS = 100_000


@dataclass(frozen=True)
class OnlineReport:
    updates: int
    steps: int
    epochs: int
    converged: bool
    final_w: np.ndarray
    bound: float | None = None
    trace: np.ndarray | None = None
    mistake_matrix: np.ndarray | None = None
    cycle: tuple[int, int] | None = None


def _check_stream(points, labels, p=None):
    x = np.asarray(points, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] == 0:
        raise UsageError("need a non-empty (N, d) array of points")
    if y.shape != (x.shape[0],):
        raise UsageError(f"got {x.shape[0]} points but labels of shape {y.shape}")
    if not np.all(np.isin(y, (-1, 1))):
        raise UsageError("labels must be -1 or +1")
    if p is not None:
        x = geo.check_ball(x, "points")
        p = geo.check_ball(p, "reference point")
        if p.shape != (x.shape[1],):
            raise UsageError(f"reference point has dimension {p.shape}, data has {x.shape[1]}")
    return x, y.astype(np.int64), p


def _order(n: int, seed) -> np.ndarray:
    if seed is None:
        return np.arange(n, dtype=np.int64)
    return np.random.default_rng(seed).permutation(n).astype(np.int64)


def _check_trigger(trigger: str) -> bool:
    if trigger not in TRIGGERS:
        raise UsageError(f"trigger must be one of {TRIGGERS}, got {trigger!r}")
    return trigger == "predict"


def scaled_tangents(points, p) -> np.ndarray:
    """``z_i = η_i · log_p(x_i)``; ``⟨w*, z_i⟩`` is ``sinh`` of the signed distance."""
    v = geo.log_map(p, points)
    return geo.point_weight(p, v)[:, None] * v


def _hyperplane(p, w):
    return geo.Hyperplane(p, w) if np.linalg.norm(w) > 0 else None


def perceptron_train(
    points,
    labels,
    p,
    max_epochs: int = MAX_EPOCHS,
    seed: int | None = None,
    trigger: str = "margin",
    trace: bool = False,
    bound: float | None = None,
):
    """Poincaré perceptron: ``w ← w + η y log_p(x)`` on every mistake.

    Returns ``(Hyperplane or None, OnlineReport)``; the hyperplane is None only
    if no update ever happened.
    """
    x, y, p = _check_stream(points, labels, p)
    predict = _check_trigger(trigger)
    z = scaled_tangents(x, p)
    order = _order(len(y), seed)
    w, updates, epochs, converged, tr, n_tr = _kernels.perceptron_loop(
        z, y, order, int(max_epochs), predict, 1_000_000 if trace else 0
    )
    report = OnlineReport(
        updates=int(updates),
        steps=int(epochs) * len(y),
        epochs=int(epochs),
        converged=bool(converged),
        final_w=w,
        bound=bound,
        trace=tr[:n_tr].copy() if trace else None,
    )
    return _hyperplane(p, w), report


def hyperboloid_perceptron_train(
    points,
    labels,
    max_epochs: int = MAX_EPOCHS,
    seed: int | None = None,
    trigger: str = "margin",
    trace: bool = False,
    bound: float | None = None,
):
    """Hyperboloid perceptron: predict ``sgn([w, x])``, update ``w ← w + y H x``.

    Returns ``(w, OnlineReport)``; no reference point is involved.
    """
    x, y, _ = _check_stream(points, labels)
    x = geo.check_lorentz(x, "points")
    predict = _check_trigger(trigger)
    hx = x.copy()
    hx[:, 0] = -hx[:, 0]
    w, updates, epochs, converged, tr, n_tr = _kernels.perceptron_loop(
        hx, y, _order(len(y), seed), int(max_epochs), predict, 1_000_000 if trace else 0
    )
    report = OnlineReport(
        updates=int(updates),
        steps=int(epochs) * len(y),
        epochs=int(epochs),
        converged=bool(converged),
        final_w=w,
        bound=bound,
        trace=tr[:n_tr].copy() if trace else None,
    )
    return w, report


# ---------------------------------------------------------------------------
# second-order perceptron


class SecondOrderState:
    """Mistake-driven state ``(ξ, X_k, a)`` of the second-order perceptron.

    With ``a > 0`` the inverse of ``aI + X Xᵀ`` is maintained by
    Sherman-Morrison rank-one updates.  With ``a = 0`` the pseudo-inverse of
    ``X Xᵀ`` is recomputed from an eigendecomposition after each mistake.
    """

    rank_tol = 1e-10

    def __init__(self, d: int, a: float = 0.0):
        if a < 0:
            raise UsageError(f"regulariser a must be nonnegative, got {a}")
        self.d = d
        self.a = float(a)
        self.xi = np.zeros(d)
        self._cols: list[np.ndarray] = []
        self.gram = np.zeros((d, d))
        if self.a > 0:
            self.inverse = np.eye(d) / self.a
            self.complement = np.zeros((d, 0))
        else:
            self.inverse = np.zeros((d, d))
            self.complement = np.eye(d)

    @property
    def k(self) -> int:
        return len(self._cols)

    @property
    def mistake_matrix(self) -> np.ndarray:
        if not self._cols:
            return np.zeros((self.d, 0))
        return np.column_stack(self._cols)

    @property
    def direction(self) -> np.ndarray:
        """``A⁺ξ``: for ``z`` in the span of past mistakes, the prediction
        ``zᵀ(A + zzᵀ)⁺ξ`` equals ``⟨direction, z⟩ / (1 + zᵀA⁺z)``."""
        return self.inverse @ self.xi

    def margin(self, z) -> float:
        """``⟨w_t, z⟩`` with ``w_t = (aI + S Sᵀ)⁺ ξ`` and ``S = [X z]``."""
        z = np.asarray(z, dtype=float)
        resid = self.complement.T @ z
        if resid @ resid > self.rank_tol**2 * (z @ z):
            return 0.0
        az = self.inverse @ z
        return float(self.direction @ z / (1.0 + z @ az))

    def update(self, z, y: int) -> None:
        z = np.asarray(z, dtype=float)
        self.xi += y * z
        self._cols.append(z.copy())
        self.gram += np.outer(z, z)
        if self.a > 0:
            az = self.inverse @ z
            self.inverse -= np.outer(az, az) / (1.0 + z @ az)
        else:
            lam, vec = np.linalg.eigh(self.gram)
            big = lam > self.rank_tol * max(1.0, lam[-1])
            self.inverse = (vec[:, big] / lam[big]) @ vec[:, big].T
            self.complement = np.ascontiguousarray(vec[:, ~big])


def second_order_train(
    points,
    labels,
    p,
    a: float = 0.0,
    max_epochs: int = MAX_EPOCHS,
    seed: int | None = None,
    trigger: str = "margin",
    trace: bool = False,
    bound: float | None = None,
):
    """Poincaré second-order perceptron on ``z = η · log_p(x)``.

    The returned hyperplane normal is ``(aI + X Xᵀ)⁺ ξ``, whose sign agrees
    with the learner's prediction for every point in the span of the stored
    mistakes.  The report carries the mistake matrix for bound evaluation.
    """
    x, y, p = _check_stream(points, labels, p)
    predict = _check_trigger(trigger)
    z = scaled_tangents(x, p)
    n = len(y)
    order = _order(n, seed)
    state = SecondOrderState(x.shape[1], a)
    log = []
    epochs = 0
    converged = False
    for _ in range(int(max_epochs)):
        epochs += 1
        pos, mistakes = 0, 0
        while True:
            k = _kernels.next_mistake(
                z, y, order, pos, state.direction, state.complement, state.rank_tol, predict
            )
            if k < 0:
                break
            i = order[k]
            state.update(z[i], int(y[i]))
            if trace:
                log.append(((epochs - 1) * n + k, i))
            mistakes += 1
            pos = k + 1
        if mistakes == 0:
            converged = True
            break
    report = OnlineReport(
        updates=state.k,
        steps=epochs * n,
        epochs=epochs,
        converged=converged,
        final_w=state.direction,
        bound=bound,
        trace=np.asarray(log, dtype=np.int64).reshape(-1, 2) if trace else None,
        mistake_matrix=state.mistake_matrix,
    )
    return _hyperplane(p, state.direction), report


# ---------------------------------------------------------------------------
# strategic setting


class OnlinePerceptron:
    """Plain Poincaré perceptron exposed as a closed-loop learner (threshold 0)."""

    def __init__(self, p, trigger: str = "predict"):
        self.p = geo.check_ball(p, "reference point")
        self.w = np.zeros(self.p.shape[0])
        self._predict = _check_trigger(trigger)

    def rule(self):
        return self.w.copy(), 0.0

    def observe(self, z, y: int) -> bool:
        v = geo.log_map(self.p, z)
        m = float(self.w @ v)
        wrong = (1 if m >= 0 else -1) != y if self._predict else y * m <= 0
        if wrong:
            self.w = self.w + float(geo.point_weight(self.p, v)) * y * v
        return wrong


class StrategicPerceptron:
    """Poincaré strategic perceptron.

    Predicts +1 while ``w = 0``; otherwise predicts
    ``sgn(⟨w, v⟩/‖w‖ - α/σ_p)``.  Negative points observed exactly on the
    shifted boundary are pulled back by ``α/σ_p`` along ``w/‖w‖`` before the
    update.  Observations strictly inside ``(0, α/σ_p)`` are counted in
    ``dead_zone_hits``; rational agents never produce them.
    """

    def __init__(self, p, alpha: float, tol: float = 1e-9):
        if alpha < 0:
            raise UsageError(f"manipulation budget must be nonnegative, got {alpha}")
        self.p = geo.check_ball(p, "reference point")
        self.alpha = float(alpha)
        self.sigma = float(geo.conformal_factor(self.p))
        self.tol = tol
        self.w = np.zeros(self.p.shape[0])
        self.dead_zone_hits = 0

    @property
    def threshold(self) -> float:
        return self.alpha / self.sigma

    def rule(self):
        return self.w.copy(), self.threshold

    def observe(self, z, y: int) -> bool:
        v = geo.log_map(self.p, z)
        eta = float(geo.point_weight(self.p, v))
        norm = float(np.linalg.norm(self.w))
        if norm == 0.0:
            if y == 1:
                return False
            self.w = self.w - eta * v
            return True
        w_hat = self.w / norm
        proj = float(v @ w_hat)
        on_boundary = abs(proj - self.threshold) <= self.tol
        if self.tol < proj < self.threshold - self.tol:
            self.dead_zone_hits += 1
        pred = 1 if on_boundary or proj >= self.threshold else -1
        if pred == y:
            return False
        if y == -1 and on_boundary:
            v = v - self.threshold * w_hat
        self.w = self.w + eta * y * v
        return True

    def scan(self, V, y) -> int:
        """Index of the first mistake among observed tangents ``V`` under the
        current rule, or -1.  Dead-zone hits before it are counted; the
        mistake itself is left to :meth:`observe`."""
        y = np.asarray(y)
        norm = float(np.linalg.norm(self.w))
        if norm == 0.0:
            wrong = y == -1
        else:
            proj = V @ (self.w / norm)
            on_boundary = np.abs(proj - self.threshold) <= self.tol
            pred = np.where(on_boundary | (proj >= self.threshold), 1, -1)
            wrong = pred != y
            dead = (self.tol < proj) & (proj < self.threshold - self.tol)
        k = int(np.argmax(wrong)) if wrong.any() else -1
        if norm != 0.0:
            self.dead_zone_hits += int(dead[: k if k >= 0 else len(y)].sum())
        return k

    def classify(self, points) -> np.ndarray:
        """Labels the current rule assigns after every agent best-responds to it."""
        u = geo.log_map(self.p, np.asarray(points, dtype=float))
        norm = float(np.linalg.norm(self.w))
        if norm == 0.0:
            return np.ones(u.shape[0], dtype=np.int64)
        proj = u @ (self.w / norm)
        # the threshold equals the budget alpha/sigma, so every agent with a
        # nonnegative projection can reach it
        return np.where(proj >= -self.tol, 1, -1).astype(np.int64)


def run_closed_loop(
    points,
    labels,
    p,
    alpha: float,
    learner,
    max_epochs: int = 1_000,
    detect_cycles: bool = False,
    cycle_window: int = 10,
    bound: float | None = None,
    on_step=None,
    seed: int | None = None,
):
    """Drive ``learner`` with best-responding agents, cycling over the data.

    With ``detect_cycles`` the run stops as soon as a weight vector repeats
    one of the previous ``cycle_window`` post-update weights; the report's
    ``cycle`` field holds the two update indices.
    """
    x, y, p = _check_stream(points, labels, p)
    order = _order(len(y), seed)
    x, y = x[order], y[order]
    history = [learner.rule()[0]]
    updates, epochs, steps, converged, cycle = 0, 0, 0, False, None
    log = []

    def record_update():
        nonlocal updates, mistakes, cycle
        updates += 1
        mistakes += 1
        log.append(steps - 1)
        if detect_cycles:
            w = learner.rule()[0]
            for j in range(max(0, len(history) - cycle_window), len(history)):
                if np.allclose(history[j], w, rtol=1e-12, atol=1e-12):
                    cycle = (j, len(history))
                    break
            history.append(w)

    # the rule only changes on a mistake, so without a per-step callback the
    # agents between two mistakes can best-respond as one batch
    batched = on_step is None and hasattr(learner, "scan")
    if batched:
        sigma = float(geo.conformal_factor(p))
        tangents = geo.log_map(p, x)
    for _ in range(int(max_epochs)):
        epochs += 1
        mistakes = 0
        if batched:
            i, chunk = 0, _FIRST_CHUNK
            while i < len(y) and cycle is None:
                stop = min(len(y), i + chunk)
                w, threshold = learner.rule()
                V, moved = datagen.best_responses(tangents[i:stop], w, threshold, alpha, sigma)
                Z = x[i:stop].copy()
                if moved.any():
                    Z[moved] = geo.exp_map(p, V[moved])
                    V[moved] = geo.log_map(p, Z[moved])
                k = learner.scan(V, y[i:stop])
                if k < 0:
                    steps += stop - i
                    i, chunk = stop, 2 * chunk
                    continue
                steps += k + 1
                if moved[k]:
                    # scalar path, so the update is bitwise that of the stream
                    v = datagen.best_response(tangents[i + k], w, threshold, alpha, sigma)
                    Z[k] = geo.exp_map(p, v)
                if learner.observe(Z[k], int(y[i + k])):
                    record_update()
                i, chunk = i + k + 1, _FIRST_CHUNK
        else:
            for step in strategic_stream(x, y, p, alpha, _Recorder(learner)):
                steps += 1
                if on_step is not None:
                    on_step(step)
                if learner.last_mistake:
                    record_update()
                    if cycle is not None:
                        break
        if cycle is not None:
            break
        if mistakes == 0:
            converged = True
            break
    report = OnlineReport(
        updates=updates,
        steps=steps,
        epochs=epochs,
        converged=converged,
        final_w=learner.rule()[0],
        bound=bound,
        trace=np.asarray(log, dtype=np.int64),
        cycle=cycle,
    )
    return report


_FIRST_CHUNK = 64


class _Recorder:
    """Forwards to a learner and remembers whether its last observation erred."""

    def __init__(self, learner):
        self._learner = learner
        learner.last_mistake = False

    def rule(self):
        return self._learner.rule()

    def observe(self, z, y):
        self._learner.last_mistake = self._learner.observe(z, y)
        return self._learner.last_mistake


def strategic_train(
    points,
    labels,
    p,
    alpha: float,
    max_epochs: int = 1_000,
    bound: float | None = None,
    on_step=None,
    seed: int | None = None,
):
    """Strategic perceptron trained against best-responding agents.

    ``points`` are the agents' true features; what the learner sees is
    produced by :func:`~poincare_linear.datagen.strategic_stream`.
    Returns ``(Hyperplane or None, OnlineReport, learner)``.
    """
    learner = StrategicPerceptron(p, alpha)
    report = run_closed_loop(
        points, labels, p, alpha, learner, max_epochs, bound=bound, on_step=on_step, seed=seed
    )
    return _hyperplane(learner.p, learner.w), report, learner


# ---------------------------------------------------------------------------
# mistake bounds


def _check_unit_interval(name: str, value: float, allow_zero: bool = False) -> None:
    low_ok = value >= 0 if allow_zero else value > 0
    if not (low_ok and value < 1):
        raise UsageError(f"{name} must lie in {'[0' if allow_zero else '(0'}, 1), got {value}")


def shifted_radius(R: float, p_norm: float) -> float:
    """Radius of the data as seen from ``p``: ``(‖p‖ + R) / (1 + ‖p‖R)``."""
    return (p_norm + R) / (1.0 + p_norm * R)


def perceptron_bound(R: float, p_norm: float, eps: float) -> float:
    _check_unit_interval("R", R)
    _check_unit_interval("p_norm", p_norm, allow_zero=True)
    if not eps > 0:
        raise UsageError(f"eps must be positive, got {eps}")
    rp = shifted_radius(R, p_norm)
    return (2.0 * rp / ((1.0 - rp * rp) * math.sinh(eps))) ** 2


def strategic_bound(R: float, p_norm: float, eps: float, alpha: float) -> float:
    _check_unit_interval("R", R)
    _check_unit_interval("p_norm", p_norm, allow_zero=True)
    if not eps > 0:
        raise UsageError(f"eps must be positive, got {eps}")
    if alpha < 0:
        raise UsageError(f"alpha must be nonnegative, got {alpha}")
    rp = shifted_radius(R, p_norm)
    sigma = 2.0 / (1.0 - p_norm * p_norm)
    q = 1.0 - rp * rp
    return ((2.0 * rp * sigma + alpha * q) / (sigma * q * math.sinh(eps))) ** 2


def second_order_bound(mistake_matrix, w_star, a: float, eps: float) -> float:
    """``(1/sinh ε)·√((a + λ_w*)·Σ log(1 + λ_j/a))`` over the eigenvalues of ``X Xᵀ``."""
    if not a > 0:
        raise UsageError("the second-order bound is undefined for a = 0")
    if not eps > 0:
        raise UsageError(f"eps must be positive, got {eps}")
    x = np.asarray(mistake_matrix, dtype=float)
    w = np.asarray(w_star, dtype=float)
    if x.ndim != 2 or x.shape[0] != w.shape[0]:
        raise UsageError("mistake matrix must be (d, k) with d = len(w_star)")
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise UsageError("w_star must be a unit vector")
    if x.shape[1] == 0:
        return 0.0
    lam = np.clip(np.linalg.eigvalsh(x @ x.T), 0.0, None)
    lam_w = float(np.sum((x.T @ w) ** 2))
    return math.sqrt((a + lam_w) * float(np.sum(np.log1p(lam / a)))) / math.sinh(eps)


def hyperboloid_bound(R: float, w_star_norm: float, eps: float) -> float:
    """``(R‖w*‖ / sinh ε)²`` with ``R`` bounding the Euclidean norm of the points."""
    if not (R > 0 and w_star_norm > 0 and eps > 0):
        raise UsageError("hyperboloid bound needs positive R, ‖w*‖ and eps")
    return (R * w_star_norm / math.sinh(eps)) ** 2
