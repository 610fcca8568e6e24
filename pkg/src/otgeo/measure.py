"""Core data types shared by every estimator: point clouds, discrete measures,
ground costs, seeded random streams and estimate reports."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

import numpy as np

WEIGHT_TOL = 1e-12
EXACT_DIAMETER_MAX = 4096

# A sampler draws ``n`` i.i.d. points of a measure as an (n, d) array.
Sampler = Callable[[int, np.random.Generator], np.ndarray]


class CostSpec(str, enum.Enum):
    """Euclidean power costs ``||x - y||`` and ``||x - y||^2``."""

    P1 = "euclidean_p1"
    P2_SQUARED = "euclidean_p2_squared"

    @classmethod
    def parse(cls, value: "CostSpec | str") -> "CostSpec":
        if isinstance(value, cls):
            return value
        aliases = {"p1": cls.P1, "1": cls.P1, "p2": cls.P2_SQUARED, "2": cls.P2_SQUARED,
                   "p2_squared": cls.P2_SQUARED, "sqeuclidean": cls.P2_SQUARED}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def power(self) -> int:
        return 1 if self is CostSpec.P1 else 2

    def from_squared(self, sq: np.ndarray | float) -> np.ndarray | float:
        """Map squared Euclidean distances to cost values."""
        return np.sqrt(sq) if self is CostSpec.P1 else sq


@dataclass(frozen=True)
class SeedSpec:
    """A (master seed, stream id) pair naming one independent random stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise ValueError("stream_id must be nonnegative")

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "SeedSpec":
        """A stream derived from this one; distinct ``stream_id`` give distinct streams."""
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        derived = int(ss.generate_state(2, np.uint64)[0])
        return SeedSpec(derived, stream_id)


def as_rng(seed: SeedSpec | np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.rng()
    if seed is None:
        raise ValueError("a seed is required for reproducible sampling")
    return SeedSpec(int(seed)).rng()


class PointCloud:
    """An immutable (n, d) array of finite float64 coordinates."""

    __slots__ = ("_points",)

    def __init__(self, points):
        pts = np.array(points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"point cloud needs n >= 1 and d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains NaN or Inf coordinates")
        pts.setflags(write=False)
        self._points = pts

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def d(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PointCloud(n={self.n}, d={self.d})"

    def subset(self, idx) -> "PointCloud":
        return PointCloud(self._points[np.asarray(idx)])

    def __eq__(self, other) -> bool:
        return isinstance(other, PointCloud) and np.array_equal(self._points, other._points)

    __hash__ = None


def as_cloud(x) -> PointCloud:
    return x if isinstance(x, PointCloud) else PointCloud(x)


class DiscreteMeasure:
    """A point cloud carrying a probability vector on its points."""

    __slots__ = ("support", "_weights")

    def __init__(self, support, weights=None):
        self.support = as_cloud(support)
        n = self.support.n
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.array(weights, dtype=np.float64, copy=True).reshape(-1)
            if w.shape[0] != n:
                raise ValueError(f"{w.shape[0]} weights for {n} support points")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite and nonnegative")
            total = w.sum()
            if abs(total - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights sum to {total}, not 1")
        w = w / w.sum()
        w.setflags(write=False)
        self._weights = w

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def points(self) -> np.ndarray:
        return self.support.points

    @property
    def n(self) -> int:
        return self.support.n

    def drop_zero_weights(self) -> "DiscreteMeasure":
        keep = self._weights > 0
        if keep.all():
            return self
        return DiscreteMeasure(self.support.subset(keep), self._weights[keep] / self._weights[keep].sum())

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n={self.n}, d={self.support.d})"


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with a confidence half-width and the parameters that produced it."""

    value: float
    half_width: float = 0.0
    delta: float = 0.05
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.half_width >= 0):
            raise ValueError("half_width must be nonnegative")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")

    @property
    def lo(self) -> float:
        return self.value - self.half_width

    @property
    def hi(self) -> float:
        return self.value + self.half_width


def _check_same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")


def sq_dist_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise squared distances ``||A[i] - B[i]||^2``.

    This is the canonical evaluation every exact query path goes through.
    Coordinates are accumulated one at a time in a fixed order, so each
    entry is bit-identical however many rows are processed together.
    """
    acc = np.zeros(A.shape[0])
    for k in range(A.shape[1]):
        diff = A[:, k] - B[:, k]
        acc += diff * diff
    return acc


def sq_dist_exact(x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Squared distances from one point ``x`` to each row of ``Y``."""
    return sq_dist_rows(Y, np.broadcast_to(x, Y.shape))


def cost(spec: CostSpec | str, x, y) -> float:
    """Ground cost between two points."""
    spec = CostSpec.parse(spec)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    _check_same_dim(x, y)
    if spec is CostSpec.P1:
        return float(_scaled_norm((x - y)[None, :])[0])
    sq = float(sq_dist_exact(x, y[None, :])[0])
    return float(spec.from_squared(sq))


def _scaled_norm(diff: np.ndarray) -> np.ndarray:
    """Euclidean norm over the last axis.

    Matches ``sqrt`` of the plain sum of squares bit for bit, and rescales
    only where that sum underflows while the difference is nonzero.
    """
    acc = np.zeros(diff.shape[:-1])
    for k in range(diff.shape[-1]):
        acc += diff[..., k] * diff[..., k]
    out = np.sqrt(acc)
    m = np.max(np.abs(diff), axis=-1, initial=0.0)
    low = (acc < np.finfo(np.float64).tiny) & (m > 0)
    if np.any(low):
        r = diff[low] / m[low][:, None]
        out[low] = m[low] * np.sqrt(np.einsum("ij,ij->i", r, r))
    return out


def pairwise_sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Dense matrix of squared distances, computed with a GEMM and clipped at 0.

    Accurate to a few ulps of ``|x|^2 + |y|^2``; callers that need exactness
    refine with :func:`sq_dist_exact`.
    """
    _check_same_dim(X, Y)
    xx = np.einsum("ij,ij->i", X, X)
    yy = np.einsum("ij,ij->i", Y, Y)
    D = X @ Y.T
    D *= -2.0
    D += xx[:, None]
    D += yy[None, :]
    np.maximum(D, 0.0, out=D)
    return D


def cost_matrix(spec: CostSpec | str, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    spec = CostSpec.parse(spec)
    D = pairwise_sq_dists(np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64))
    if spec is CostSpec.P1:
        np.sqrt(D, out=D)
    return D


def cost_matrix_exact(spec: CostSpec | str, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Dense cost matrix without GEMM cancellation; exact zeros on coincident points."""
    spec = CostSpec.parse(spec)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    _check_same_dim(X, Y)
    if spec is CostSpec.P1:
        return _scaled_norm(Y[None, :, :] - X[:, None, :])
    acc = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        diff = Y[None, :, k] - X[:, None, k]
        acc += diff * diff
    return acc


def empirical_measure(cloud) -> DiscreteMeasure:
    """Uniform weights ``1/n`` on the cloud's points."""
    return DiscreteMeasure(as_cloud(cloud))


class Diameter(NamedTuple):
    value: float
    method: str  # "exact" or "bbox"

    def __float__(self) -> float:
        return float(self.value)


def _max_pairwise_sq(P: np.ndarray, block: int = 1024) -> float:
    best = 0.0
    best_pair = (0, 0)
    for s in range(0, P.shape[0], block):
        D = pairwise_sq_dists(P[s:s + block], P)
        k = int(np.argmax(D))
        i, j = divmod(k, D.shape[1])
        if D[i, j] > best:
            best = D[i, j]
            best_pair = (s + i, j)
    # Recompute the winning pair without GEMM cancellation error.
    i, j = best_pair
    exact = float(sq_dist_exact(P[i], P[j:j + 1])[0])
    return max(exact, 0.0)


def diameter_estimate(cloud, spec: CostSpec | str = CostSpec.P1, *,
                      max_exact: int = EXACT_DIAMETER_MAX) -> Diameter:
    """Largest pairwise cost in the sample.

    Up to ``max_exact`` points the full pairwise scan is used.  Beyond that the
    returned value is the cost across the coordinate bounding box, an upper
    proxy for the sample diameter.
    """
    spec = CostSpec.parse(spec)
    P = as_cloud(cloud).points
    n = P.shape[0]
    if n == 1:
        return Diameter(0.0, "exact")
    if n <= max_exact:
        return Diameter(float(spec.from_squared(_max_pairwise_sq(P))), "exact")
    # The bounding-box diagonal dominates every pairwise cost, including the
    # max over any subsample, so it is the value returned on this path.
    box_sq = float(np.sum((P.max(axis=0) - P.min(axis=0)) ** 2))
    return Diameter(float(spec.from_squared(box_sq)), "bbox")


def pooled_diameter(spec: CostSpec | str, *clouds) -> Diameter:
    pts = np.vstack([as_cloud(c).points for c in clouds])
    return diameter_estimate(PointCloud(pts), spec)


def log_terms(delta: float) -> float:
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    return math.log(2.0 / delta)
