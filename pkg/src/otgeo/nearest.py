"""Exact nearest-support queries: the c-transform of the zero potential,
``min_j c(x, x_j)``, and the index attaining it.

Both acceleration paths produce candidate sets that are guaranteed to contain
every exact minimiser, then settle the answer with one canonical distance
evaluation (:func:`otgeo.measure.sq_dist_exact`).  Values and indices are
therefore bit-identical across paths, and ties always go to the lowest index.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .measure import CostSpec, PointCloud, SeedSpec, as_cloud, sq_dist_exact, sq_dist_rows

LEAF_SIZE = 16
KD_MAX_DIM = 30
# Relative slack on squared distances covering GEMM cancellation error.
_GEMM_SLACK = 1e-10
_QUERY_BLOCK = 256


class Acceleration(str, enum.Enum):
    BRUTE_FORCE = "brute_force"
    KD_TREE = "kd_tree"
    AUTO = "auto"


@dataclass(frozen=True, eq=False)
class SupportIndex:
    support: PointCloud
    spec: CostSpec
    acceleration: Acceleration
    seed: SeedSpec | None = None
    _tree: cKDTree | None = field(default=None, repr=False)
    _norms: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.support.n

    @property
    def d(self) -> int:
        return self.support.d

    def query(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Minimum cost and lowest minimising index for each row of ``X``."""
        X = _as_queries(X, self.d)
        sq, idx = self.query_prefixes(X, (self.n,))[0]
        return self.spec.from_squared(sq), idx

    def query_prefixes(self, X, sizes) -> list[tuple[np.ndarray, np.ndarray]]:
        """Exact squared-distance minima over the nested supports ``support[:m]``.

        Returns one ``(min_sq, argmin)`` pair per size.  A single pass over the
        distances serves every prefix when the brute-force path is active.
        """
        X = _as_queries(X, self.d)
        sizes = [int(m) for m in sizes]
        if any(m < 1 or m > self.n for m in sizes):
            raise ValueError(f"prefix sizes must lie in [1, {self.n}]")
        if self.acceleration is Acceleration.KD_TREE:
            return [_kd_query(self._tree if m == self.n else _build_tree(self.support.points[:m]),
                              self.support.points[:m], X) for m in sizes]
        return _brute_query(self.support.points, self._norms, X, sizes)


def _as_queries(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[-1] != d:
        raise ValueError(f"dimension mismatch: queries have d={X.shape[-1]}, support has d={d}")
    return X


def _build_tree(P: np.ndarray) -> cKDTree:
    return cKDTree(P, leafsize=LEAF_SIZE, balanced_tree=True, compact_nodes=False)


def build_index(support, spec: CostSpec | str = CostSpec.P1,
                accel: Acceleration | str = Acceleration.AUTO,
                seed: SeedSpec | None = None) -> SupportIndex:
    """Prepare exact nearest queries over ``support``.

    ``auto`` picks the kd-tree in low dimension, where pruning pays off, and
    the blocked brute-force scan otherwise.  Above ``KD_MAX_DIM`` the kd-tree
    request silently degrades to brute force.
    """
    support = as_cloud(support)
    spec = CostSpec.parse(spec)
    accel = Acceleration(accel)
    if accel is Acceleration.AUTO:
        accel = Acceleration.KD_TREE if support.d <= 3 else Acceleration.BRUTE_FORCE
    if accel is Acceleration.KD_TREE and support.d > KD_MAX_DIM:
        accel = Acceleration.BRUTE_FORCE
    P = support.points
    if accel is Acceleration.KD_TREE:
        return SupportIndex(support, spec, accel, seed, _tree=_build_tree(P))
    return SupportIndex(support, spec, accel, seed, _norms=np.einsum("ij,ij->i", P, P))


def _settle(x: np.ndarray, P: np.ndarray, cand: np.ndarray) -> tuple[float, int]:
    """Exact minimum among candidate indices, lowest index on ties."""
    cand = np.sort(cand)
    sq = sq_dist_exact(x, P[cand])
    k = int(np.argmin(sq))  # argmin returns the first occurrence
    return float(sq[k]), int(cand[k])


def _brute_query(P: np.ndarray, norms: np.ndarray, X: np.ndarray, sizes: list[int]):
    nq = X.shape[0]
    bounds = sorted(set(sizes))
    P = P[:bounds[-1]]
    norms = norms[:bounds[-1]]
    P2 = -2.0 * P
    edges = [0] + bounds
    out = {m: (np.empty(nq), np.empty(nq, dtype=np.int64)) for m in bounds}
    for s in range(0, nq, _QUERY_BLOCK):
        Xb = X[s:s + _QUERY_BLOCK]
        rows = np.arange(Xb.shape[0])
        # ``|y|^2 - 2 x.y`` orders the support like the squared distance does.
        D = Xb @ P2.T
        D += norms[None, :]
        xx = np.einsum("ij,ij->i", Xb, Xb)
        slack = 4.0 * _GEMM_SLACK * (xx + norms.max()) + 1e-300
        run_val = np.full(Xb.shape[0], np.inf)
        run_arg = np.zeros(Xb.shape[0], dtype=np.int64)
        seg_stats = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            seg = D[:, lo:hi]
            a = np.argmin(seg, axis=1)
            v = seg[rows, a]
            # Runner-up value: masks the winner in place, then restores it.
            seg[rows, a] = np.inf
            v2 = seg.min(axis=1)
            seg[rows, a] = v
            seg_stats.append((v, v2))
            better = v < run_val
            run_arg = np.where(better, a + lo, run_arg)
            run_val = np.where(better, v, run_val)
            # Ambiguous when a second entry of support[:hi] sits within slack of the minimum.
            thresh = run_val + slack
            near = sum((sv <= thresh).astype(np.int64) + (sv2 <= thresh) for sv, sv2 in seg_stats)
            vals, idxs = out[hi]
            uniq = near == 1
            r = np.flatnonzero(uniq)
            vals[s + r] = sq_dist_rows(P[run_arg[r]], Xb[r])
            idxs[s + r] = run_arg[r]
            for k in np.flatnonzero(~uniq):
                cand = np.flatnonzero(D[k, :hi] <= thresh[k])
                vals[s + k], idxs[s + k] = _settle(Xb[k], P, cand)
    return [out[m] for m in sizes]


def _kd_query(tree: cKDTree, P: np.ndarray, X: np.ndarray):
    nq = X.shape[0]
    vals = np.empty(nq)
    idxs = np.empty(nq, dtype=np.int64)
    k = min(2, P.shape[0])
    dist, ind = tree.query(X, k=k)
    if k == 1:
        dist = dist[:, None]
        ind = ind[:, None]
    radius = dist[:, 0] * (1.0 + 1e-9) + 1e-300
    uniq = dist[:, 1] > radius if k == 2 else np.ones(nq, dtype=bool)
    rows = np.flatnonzero(uniq)
    vals[rows] = sq_dist_rows(P[ind[rows, 0]], X[rows])
    idxs[rows] = ind[rows, 0]
    for r in np.flatnonzero(~uniq):
        cand = np.asarray(tree.query_ball_point(X[r], radius[r]), dtype=np.int64)
        if cand.size == 0:
            cand = ind[r, :1]
        vals[r], idxs[r] = _settle(X[r], P, cand)
    return vals, idxs


def zero_ctransform(index: SupportIndex, x) -> tuple[float, int]:
    """``(min_j c(x, x_j), argmin_j)`` for a single point."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    vals, idx = index.query(x[None, :])
    return float(vals[0]), int(idx[0])
