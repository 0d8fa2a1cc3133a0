"""Gyrovector and manifold kernel for the Poincaré ball (curvature -1).

All functions operate on numpy arrays along the last axis and broadcast over
leading axes, so ``log_map(p, X)`` with ``X`` of shape ``(N, d)`` returns the
``N`` tangent vectors at ``p`` in one call.  Tangent vectors are plain arrays;
the tangency point is always passed explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

MAX_NORM = 1.0 - 1e-7
ATANH_MAX = 1.0 - 1e-12
LORENTZ_TOL = 1e-9


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _sqnorm(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=-1, keepdims=True)


def _dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sum(x * y, axis=-1, keepdims=True)


def _same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[-1:] != y.shape[-1:]:
        raise UsageError(f"dimension mismatch: {x.shape[-1:]} vs {y.shape[-1:]}")


def _atanh(x):
    return np.arctanh(np.minimum(x, ATANH_MAX))


def sgn(x):
    """Sign with the convention ``sgn(0) = +1``."""
    return np.where(np.asarray(x) >= 0, 1, -1)


def project(x) -> np.ndarray:
    """Clamp Euclidean norms to at most ``MAX_NORM``."""
    x = _arr(x)
    n = np.sqrt(_sqnorm(x))
    scale = np.where(n > MAX_NORM, MAX_NORM / np.maximum(n, MAX_NORM), 1.0)
    return x * scale


def check_ball(x, name: str = "point") -> np.ndarray:
    """Return ``x`` as a float array of ball points; raise if any norm is >= 1."""
    x = _arr(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise UsageError(f"{name} must have at least one coordinate")
    n = np.sqrt(np.sum(x * x, axis=-1))
    if not np.all(np.isfinite(n)) or np.any(n >= 1.0):
        raise UsageError(f"{name} must lie strictly inside the unit ball (max norm {np.max(n):.6g})")
    return project(x)


def mobius_add(x, y) -> np.ndarray:
    x, y = _arr(x), _arr(y)
    _same_dim(x, y)
    xy = _dot(x, y)
    x2 = _sqnorm(x)
    y2 = _sqnorm(y)
    num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y
    den = 1.0 + 2.0 * xy + x2 * y2
    return project(num / np.maximum(den, 1e-300))


def mobius_scalar(r, x) -> np.ndarray:
    """Möbius scalar multiplication ``r ⊗ x``; ``r ⊗ 0 = 0``."""
    x = _arr(x)
    n = np.sqrt(_sqnorm(x))
    r = np.asarray(r, dtype=np.float64)
    if r.ndim:
        r = r[..., None]
    safe = np.where(n > 0, n, 1.0)
    scale = np.where(n > 0, np.tanh(r * _atanh(n)) / safe, 0.0)
    return project(scale * x)


def mobius_norm_sq(a, b) -> np.ndarray:
    """``‖a ⊕ b‖²`` via the closed form ``‖a+b‖² / (1 + 2aᵀb + ‖a‖²‖b‖²)``."""
    a, b = _arr(a), _arr(b)
    _same_dim(a, b)
    s = a + b
    den = 1.0 + 2.0 * _dot(a, b) + _sqnorm(a) * _sqnorm(b)
    return (_sqnorm(s) / den)[..., 0]


def dist(x, y) -> np.ndarray:
    """Hyperbolic distance ``2 atanh‖(-x) ⊕ y‖``."""
    x, y = _arr(x), _arr(y)
    n2 = np.maximum(mobius_norm_sq(-x, y), 0.0)
    return 2.0 * _atanh(np.sqrt(n2))


def geodesic(x, y, t) -> np.ndarray:
    """Point at fraction ``t`` of the geodesic from ``x`` to ``y``."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise UsageError(f"geodesic parameter must lie in [0, 1], got {t}")
    x, y = _arr(x), _arr(y)
    return mobius_add(x, mobius_scalar(t, mobius_add(-x, y)))


def conformal_factor(p) -> np.ndarray:
    """``σ_p = 2 / (1 - ‖p‖²)``."""
    p = _arr(p)
    return 2.0 / (1.0 - np.sum(p * p, axis=-1))


def exp_map(p, v) -> np.ndarray:
    p, v = _arr(p), _arr(v)
    _same_dim(p, v)
    sigma = conformal_factor(p)[..., None]
    n = np.sqrt(_sqnorm(v))
    safe = np.where(n > 0, n, 1.0)
    step = np.where(n > 0, np.tanh(sigma * n / 2.0) / safe, 0.0) * v
    return mobius_add(np.broadcast_to(p, step.shape), step)


def log_map(p, x) -> np.ndarray:
    p, x = _arr(p), _arr(x)
    _same_dim(p, x)
    u = mobius_add(-p, x)
    n = np.sqrt(_sqnorm(u))
    sigma = conformal_factor(p)[..., None]
    safe = np.where(n > 0, n, 1.0)
    return np.where(n > 0, (2.0 / sigma) * _atanh(n) / safe, 0.0) * u


def point_weight(p, v) -> np.ndarray:
    """Weight ``η`` turning ``⟨v, w⟩`` into ``sinh`` of the hyperplane distance.

    ``η = 2T / ((1 - T²)‖v‖)`` with ``T = tanh(σ_p‖v‖/2)``; equals
    ``sinh(σ_p‖v‖)/‖v‖``.  Returns 0 where ``v = 0``.
    """
    p, v = _arr(p), _arr(v)
    _same_dim(p, v)
    sigma = conformal_factor(p)
    n = np.sqrt(np.sum(v * v, axis=-1))
    t = np.minimum(np.tanh(sigma * n / 2.0), ATANH_MAX)
    safe = np.where(n > 0, n, 1.0)
    return np.where(n > 0, 2.0 * t / ((1.0 - t * t) * safe), 0.0)


@dataclass(frozen=True)
class Hyperplane:
    """Poincaré hyperplane ``{x : ⟨log_p(x), w⟩ = 0}``."""

    p: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        p = check_ball(self.p, "reference point")
        w = _arr(self.w)
        if p.ndim != 1 or w.ndim != 1:
            raise UsageError("hyperplane p and w must be vectors")
        if p.shape != w.shape:
            raise UsageError(f"dimension mismatch: p has {p.shape[0]}, w has {w.shape[0]}")
        if not np.all(np.isfinite(w)) or not np.linalg.norm(w) > 0:
            raise UsageError("hyperplane normal w must be finite and nonzero")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return self.p.shape[0]


def hyperplane_dist(x, h: Hyperplane) -> np.ndarray:
    """Distance from ``x`` to ``h`` computed in ball coordinates."""
    x = _arr(x)
    _same_dim(x, h.p)
    u = mobius_add(-h.p, x)
    num = 2.0 * np.abs(u @ h.w)
    den = (1.0 - np.sum(u * u, axis=-1)) * np.linalg.norm(h.w)
    return np.arcsinh(num / den)


def hyperplane_dist_tangent(v, h: Hyperplane) -> np.ndarray:
    """Same distance computed from ``v = log_p(x)`` in the tangent space."""
    v = _arr(v)
    _same_dim(v, h.p)
    eta = point_weight(h.p, v)
    return np.arcsinh(eta * np.abs(v @ h.w) / np.linalg.norm(h.w))


def decide(x, h: Hyperplane) -> np.ndarray:
    """``sgn(⟨log_p(x), w⟩)`` with ``sgn(0) = +1``."""
    return sgn(log_map(h.p, x) @ h.w)


def decide_ball(x, h: Hyperplane) -> np.ndarray:
    """``sgn(⟨(-p) ⊕ x, w⟩)``; agrees with :func:`decide`."""
    return sgn(mobius_add(-h.p, _arr(x)) @ h.w)


def minkowski(u, v) -> np.ndarray:
    """Minkowski product ``-u₀v₀ + Σ_{j≥1} u_j v_j``."""
    u, v = _arr(u), _arr(v)
    if u.shape[-1] < 2 or v.shape[-1] < 2:
        raise UsageError("Minkowski vectors need length >= 2")
    _same_dim(u, v)
    return np.sum(u * v, axis=-1) - 2.0 * u[..., 0] * v[..., 0]


def check_lorentz(z, name: str = "hyperboloid point") -> np.ndarray:
    z = _arr(z)
    if z.ndim == 0 or z.shape[-1] < 2:
        raise UsageError(f"{name} must have at least two coordinates")
    z0 = z[..., 0]
    resid = np.abs(minkowski(z, z) + 1.0)
    # absolute error in [z, z] grows like z0² in floating point
    if np.any(z0 <= 0) or np.any(resid > LORENTZ_TOL * np.maximum(1.0, z0 * z0)):
        raise UsageError(f"{name} must satisfy [z, z] = -1 with z0 > 0")
    return z


def ball_to_lorentz(x) -> np.ndarray:
    x = check_ball(x)
    x2 = np.sum(x * x, axis=-1, keepdims=True)
    z0 = (1.0 + x2) / (1.0 - x2)
    return np.concatenate([z0, 2.0 * x / (1.0 - x2)], axis=-1)


def lorentz_to_ball(z) -> np.ndarray:
    z = check_lorentz(z)
    return project(z[..., 1:] / (1.0 + z[..., :1]))


def lorentz_dist(z1, z2) -> np.ndarray:
    return np.arccosh(np.maximum(-minkowski(z1, z2), 1.0))


def hyperplane_to_lorentz(h: Hyperplane) -> np.ndarray:
    """Normal ``n`` with ``[n, n] = 1`` of the hyperboloid image of ``h``.

    ``asinh([n, z])`` is the signed distance of ``z`` to the image, positive on
    the side where :func:`decide` returns +1.
    """
    d = h.dim
    # d points spanning the image: p and exp_p of a tangent basis orthogonal to w
    _, _, vt = np.linalg.svd(h.w[None, :])
    basis = vt[1:] * (0.5 / conformal_factor(h.p))
    anchors = np.vstack([h.p[None, :], exp_map(np.broadcast_to(h.p, basis.shape), basis)])
    z = ball_to_lorentz(anchors)
    z[:, 0] = -z[:, 0]
    # n spans the null space of z, i.e. it is Minkowski-orthogonal to every anchor
    n = np.linalg.svd(z)[2][-1]
    n = n / np.sqrt(minkowski(n, n))
    probe = ball_to_lorentz(exp_map(h.p, h.w * (0.5 / (conformal_factor(h.p) * np.linalg.norm(h.w)))))
    return n if minkowski(n, probe) > 0 else -n
