"""Synthetic planted instances, strategic agents, and dataset file I/O."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Protocol

import numpy as np

from . import geometry as geo
from .errors import DataValidationError, GenerationError, UsageError

MIN_ACCEPTANCE = 1e-6


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth behind a planted instance: reference point, unit normal, margin, radius."""

    p: np.ndarray
    w_star: np.ndarray
    eps: float
    R: float
    seed: int | None = None

    @property
    def hyperplane(self) -> geo.Hyperplane:
        return geo.Hyperplane(self.p, self.w_star)

    def to_json(self) -> dict:
        return {
            "p": [float(v) for v in self.p],
            "w_star": [float(v) for v in self.w_star],
            "eps": float(self.eps),
            "R": float(self.R),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PlantedTruth":
        try:
            return cls(
                p=np.asarray(obj["p"], dtype=float),
                w_star=np.asarray(obj["w_star"], dtype=float),
                eps=float(obj["eps"]),
                R=float(obj["R"]),
                seed=obj.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataValidationError(f"malformed truth record: {exc}") from exc


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels).astype(np.int64)
        if self.points.ndim != 2 or self.labels.shape != (self.points.shape[0],):
            raise UsageError("dataset needs (N, d) points and N labels")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def is_binary(self) -> bool:
        return set(self.classes.tolist()) <= {-1, 1}


@dataclass
class PlantedInstance(Dataset):
    truth: PlantedTruth = field(default=None)

    @property
    def seed(self):
        return self.truth.seed


def _random_unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def sample_ball(rng: np.random.Generator, n: int, d: int, R: float, measure: str = "euclidean") -> np.ndarray:
    """``n`` points in the radius-``R`` ball, uniform w.r.t. ``measure``.

    ``"euclidean"`` is uniform Lebesgue volume; ``"hyperbolic"`` is uniform
    Riemannian volume, whose radial density in hyperbolic radius ``ρ`` is
    proportional to ``sinh(ρ)^(d-1)``.
    """
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if measure == "euclidean":
        radius = R * rng.random(n) ** (1.0 / d)
    elif measure == "hyperbolic":
        rho_max = 2.0 * math.atanh(R)
        radius = np.empty(n)
        filled = 0
        while filled < n:
            rho = rho_max * rng.random(n)
            keep = rng.random(n) <= (np.sinh(rho) / math.sinh(rho_max)) ** (d - 1)
            take = np.tanh(rho[keep] / 2.0)[: n - filled]
            radius[filled:filled + take.size] = take
            filled += take.size
    else:
        raise UsageError(f"unknown sampling measure {measure!r}")
    return dirs * radius[:, None]


def sample_points(
    truth: PlantedTruth,
    n: int,
    rng: np.random.Generator,
    measure: str = "euclidean",
    batch: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` margin-respecting labelled points for an existing ground truth."""
    d = truth.p.shape[0]
    h = truth.hyperplane
    batch = batch or max(2 * n, 10_000)
    kept, drawn, total = [], 0, 0
    while total < n:
        x = sample_ball(rng, batch, d, truth.R, measure)
        x = x[geo.hyperplane_dist(x, h) >= truth.eps]
        drawn += batch
        total += x.shape[0]
        kept.append(x)
        if drawn >= 1_000_000 and total / drawn < MIN_ACCEPTANCE:
            raise GenerationError(
                f"margin filter acceptance {total}/{drawn} is below {MIN_ACCEPTANCE:g}: "
                f"eps={truth.eps} is too wide for R={truth.R}, |p|={np.linalg.norm(truth.p):.4g}"
            )
    x = np.concatenate(kept)[:n]
    return x, geo.decide(x, h).astype(np.int64)


def sample_separable(
    n: int,
    d: int,
    p_norm: float,
    eps: float,
    R: float = 0.95,
    seed: int | None = None,
    measure: str = "euclidean",
) -> PlantedInstance:
    """Planted separable instance: random ``p`` of norm ``p_norm``, random unit
    ``w*``, points uniform in the radius-``R`` ball with margin at least ``eps``."""
    if n < 1 or d < 1:
        raise UsageError("need n >= 1 and d >= 1")
    if not (0.0 < R < 1.0) or not (0.0 <= p_norm < R):
        raise UsageError(f"need 0 <= p_norm < R < 1, got p_norm={p_norm}, R={R}")
    if not eps > 0:
        raise UsageError(f"margin must be positive, got {eps}")
    rng = np.random.default_rng(seed)
    p = p_norm * _random_unit(rng, d)
    truth = PlantedTruth(p=p, w_star=_random_unit(rng, d), eps=float(eps), R=float(R), seed=seed)
    x, y = sample_points(truth, n, rng, measure)
    return PlantedInstance(points=x, labels=y, truth=truth)


def sample_clusters(
    k: int,
    n_per_class: int,
    radius: float = 0.6,
    spread: float = 0.25,
    seed: int | None = None,
) -> Dataset:
    """``k`` clusters in the disk with centres evenly spaced on a circle.

    Each cluster is a wrapped Gaussian: tangent samples at the centre pushed
    through the exponential map.  Labels are ``0..k-1``.
    """
    if k < 2 or n_per_class < 1:
        raise UsageError("need k >= 2 and n_per_class >= 1")
    rng = np.random.default_rng(seed)
    pts, labels = [], []
    for c in range(k):
        angle = 2.0 * np.pi * c / k
        centre = radius * np.array([np.cos(angle), np.sin(angle)])
        v = spread * rng.standard_normal((n_per_class, 2)) / geo.conformal_factor(centre)
        pts.append(geo.exp_map(centre, v))
        labels.append(np.full(n_per_class, c))
    return Dataset(points=np.concatenate(pts), labels=np.concatenate(labels))


def sample_lorentz_separable(
    n: int,
    eps: float,
    d: int = 2,
    R: float = 0.95,
    seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Planted hyperboloid instance: ``(points, labels, w_star)`` with
    ``[w*, w*] = 1`` and ``y·asinh([w*, x]) >= eps`` for every point."""
    if not eps > 0:
        raise UsageError("margin must be positive")
    rng = np.random.default_rng(seed)
    w0 = 0.5 * rng.standard_normal()
    w_star = np.concatenate([[w0], math.sqrt(1.0 + w0 * w0) * _random_unit(rng, d)])
    kept, total, drawn = [], 0, 0
    while total < n:
        z = geo.ball_to_lorentz(sample_ball(rng, max(2 * n, 10_000), d, R))
        z = z[np.abs(np.arcsinh(geo.minkowski(w_star, z))) >= eps]
        drawn += max(2 * n, 10_000)
        total += z.shape[0]
        kept.append(z)
        if drawn >= 1_000_000 and total / drawn < MIN_ACCEPTANCE:
            raise GenerationError(f"margin eps={eps} leaves no hyperboloid points")
    z = np.concatenate(kept)[:n]
    return z, geo.sgn(geo.minkowski(w_star, z)).astype(np.int64), w_star


# ---------------------------------------------------------------------------
# strategic agents


@dataclass(frozen=True)
class AgentStep:
    true_point: np.ndarray
    observed_point: np.ndarray
    label: int
    manipulated: bool
    cost: float


class StrategicLearner(Protocol):
    def rule(self) -> tuple[np.ndarray, float]:
        """Current tangent normal ``w`` and projection threshold."""

    def observe(self, z: np.ndarray, y: int) -> bool:
        """Consume an observed point; return True if it was a mistake."""


def best_response(u, w, threshold: float, alpha: float, sigma_p: float) -> np.ndarray:
    """Utility-maximising manipulation of tangent vector ``u``.

    An agent whose signed projection ``π = ⟨w, u⟩/‖w‖`` falls short of
    ``threshold`` by at most ``alpha/sigma_p`` moves along ``w/‖w‖`` exactly
    onto the threshold; everyone else stays put.
    """
    if alpha < 0:
        raise UsageError(f"manipulation budget must be nonnegative, got {alpha}")
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0.0:
        return u.copy()
    w_hat = w / norm
    proj = float(u @ w_hat)
    if threshold - alpha / sigma_p <= proj < threshold:
        return u + (threshold - proj) * w_hat
    return u.copy()


def best_responses(U, w, threshold: float, alpha: float, sigma_p: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`best_response`; also returns the mask of movers."""
    U = np.asarray(U, dtype=float)
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0.0:
        return U.copy(), np.zeros(U.shape[0], dtype=bool)
    w_hat = w / norm
    proj = U @ w_hat
    moved = (threshold - alpha / sigma_p <= proj) & (proj < threshold)
    V = U.copy()
    V[moved] += (threshold - proj[moved])[:, None] * w_hat
    return V, moved


def strategic_stream(
    points,
    labels,
    p,
    alpha: float,
    learner: StrategicLearner,
) -> Iterator[AgentStep]:
    """Closed loop: each agent best-responds to the learner's current rule,
    then the learner observes the (possibly manipulated) point."""
    if alpha < 0:
        raise UsageError(f"manipulation budget must be nonnegative, got {alpha}")
    p = geo.check_ball(p, "reference point")
    sigma = float(geo.conformal_factor(p))
    points = np.asarray(points, dtype=float)
    tangents = geo.log_map(p, points)
    for x, u, y in zip(points, tangents, np.asarray(labels)):
        w, threshold = learner.rule()
        v = best_response(u, w, threshold, alpha, sigma)
        moved = not np.array_equal(v, u)
        z = geo.exp_map(p, v) if moved else x
        cost = sigma * float(np.linalg.norm(u - v)) / alpha if moved else 0.0
        learner.observe(z, int(y))
        yield AgentStep(true_point=x, observed_point=z, label=int(y), manipulated=moved, cost=cost)


# ---------------------------------------------------------------------------
# file I/O


def write_dataset(dataset: Dataset, path) -> None:
    """CSV with header ``x1,...,xd,label``; floats at 17 significant digits."""
    path = Path(path)
    d = dataset.dim
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(d)] + ["label"])
        for x, y in zip(dataset.points, dataset.labels):
            writer.writerow([format(float(v), ".17g") for v in x] + [int(y)])


def read_dataset(path, labels: str = "auto") -> Dataset:
    """Read a CSV written by :func:`write_dataset`, validating every row.

    ``labels`` is ``"binary"`` (±1), ``"multiclass"`` (0..K-1) or ``"auto"``.
    """
    path = Path(path)
    if not path.exists():
        raise UsageError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"empty dataset file: {path}")
    header, body = rows[0], rows[1:]
    if len(header) < 2 or header[-1].strip() != "label":
        raise DataValidationError(f"{path}: header must be x1,...,xd,label")
    if not body:
        raise UsageError(f"dataset {path} has no rows")
    d = len(header) - 1
    pts = np.empty((len(body), d))
    lab = np.empty(len(body), dtype=np.int64)
    for r, row in enumerate(body, start=2):
        if len(row) != d + 1:
            raise DataValidationError(f"{path}:{r}: expected {d + 1} fields, got {len(row)}")
        try:
            pts[r - 2] = [float(v) for v in row[:d]]
            lab[r - 2] = int(row[d])
        except ValueError as exc:
            raise DataValidationError(f"{path}:{r}: {exc}") from exc
        norm = float(np.linalg.norm(pts[r - 2]))
        if not np.isfinite(norm) or norm >= 1.0:
            raise DataValidationError(f"{path}:{r}: point norm {norm:.6g} is outside the unit ball")
    if labels == "auto":
        labels = "binary" if set(np.unique(lab).tolist()) <= {-1, 1} else "multiclass"
    if labels == "binary":
        bad = ~np.isin(lab, (-1, 1))
    elif labels == "multiclass":
        bad = lab < 0
    else:
        raise UsageError(f"unknown label alphabet {labels!r}")
    if np.any(bad):
        r = int(np.argmax(bad)) + 2
        raise DataValidationError(f"{path}:{r}: label {lab[r - 2]} outside the {labels} alphabet")
    return Dataset(points=geo.project(pts), labels=lab)


def write_truth(truth: PlantedTruth, path) -> None:
    Path(path).write_text(json.dumps(truth.to_json(), indent=2) + "\n")


def read_truth(path) -> PlantedTruth:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot read truth file {path}: {exc}") from exc
    return PlantedTruth.from_json(obj)


def convert_dataset(dataset: Dataset, direction: str) -> Dataset:
    """Map every point ball→lorentz or lorentz→ball; labels unchanged.

    Hyperboloid datasets hold ``d + 1`` coordinates per row.
    """
    if direction == "ball->lorentz":
        pts = geo.ball_to_lorentz(dataset.points)
    elif direction == "lorentz->ball":
        pts = geo.lorentz_to_ball(dataset.points)
    else:
        raise UsageError(f"unknown conversion {direction!r}")
    return Dataset(points=pts, labels=dataset.labels.copy())
