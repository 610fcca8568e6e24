"""Solver-free Monte Carlo estimates of the discretization error
``OT_c(rho, rho_n*)`` and of the optimal (Voronoi) weights, with
empirical-Bernstein confidence bands."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .measure import (CostSpec, EstimateReport, PointCloud, Sampler, SeedSpec,
                      diameter_estimate, log_terms)
from .nearest import SupportIndex

MC_CHUNK = 65536
RESERVOIR = 10**6


@dataclass(frozen=True)
class DiscretizationEstimate:
    value: float
    sample_variance: float
    N: int
    n: int
    band: EstimateReport
    minima: np.ndarray | None = field(default=None, repr=False)
    argmins: np.ndarray | None = field(default=None, repr=False)

    @property
    def half_width(self) -> float:
        return self.band.half_width

    def cell_contributions(self) -> np.ndarray:
        """Per-support-point share of the estimate, ``sum_k min_k 1{argmin_k = i} / N``."""
        if self.minima is None or self.argmins is None:
            raise ValueError("per-sample minima were not retained (pass keep_minima=True)")
        return np.bincount(self.argmins, weights=self.minima, minlength=self.n) / self.minima.size


@dataclass(frozen=True)
class OptimalWeights:
    weights: np.ndarray
    counts: np.ndarray
    half_widths: np.ndarray
    delta: float
    N: int

    @property
    def n(self) -> int:
        return self.weights.size


def bernstein_half_width(var: float, N: int, delta: float, bound: float) -> float:
    """Empirical Bernstein half-width for the mean of N samples in [0, bound]."""
    if N < 2:
        raise ValueError("N >= 2 is required for the Bernstein band")
    L = log_terms(delta)
    return math.sqrt(2.0 * max(var, 0.0) * L / N) + 7.0 * bound * L / (3.0 * (N - 1))


def draw_mc(mc, N: int | None, seed: SeedSpec | None, index: SupportIndex) -> np.ndarray:
    """Materialise the Monte Carlo stream.

    ``mc`` is either an (N, d) array of points already drawn from rho or a
    sampler; a sampler needs its own seed, which must differ from the seed the
    support was drawn with.
    """
    if callable(mc):
        if N is None or seed is None:
            raise ValueError("a sampler needs both N and an MC seed")
        if index.seed is not None and seed == index.seed:
            raise ValueError("the MC stream must be independent of the support stream (same SeedSpec given)")
        rng = seed.rng()
        chunks = []
        left = int(N)
        while left > 0:
            k = min(left, MC_CHUNK)
            chunks.append(np.asarray(mc(k, rng), dtype=np.float64))
            left -= k
        X = np.vstack(chunks) if chunks else np.empty((0, index.d))
    else:
        X = np.asarray(mc.points if isinstance(mc, PointCloud) else mc, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if N is not None:
            if N > X.shape[0]:
                raise ValueError(f"requested N={N} but only {X.shape[0]} MC points were given")
            X = X[:N]
    if X.shape[1] != index.d:
        raise ValueError(f"dimension mismatch: MC points have d={X.shape[1]}, support has d={index.d}")
    return X


def _query_chunks(index: SupportIndex, X: np.ndarray, sizes, threads):
    starts = range(0, X.shape[0], MC_CHUNK)
    parts = ordered_map(lambda s: index.query_prefixes(X[s:s + MC_CHUNK], sizes), starts, threads)
    out = []
    for j in range(len(sizes)):
        sq = np.concatenate([p[j][0] for p in parts])
        idx = np.concatenate([p[j][1] for p in parts])
        out.append((index.spec.from_squared(sq), idx))
    return out


def _c_rho(index: SupportIndex, X: np.ndarray):
    pooled = PointCloud(np.vstack([index.support.points, X]))
    return diameter_estimate(pooled, index.spec)


def nested_discretization_errors(index: SupportIndex, mc, sizes, N: int | None = None,
                                 delta: float = 0.05, *, seed: SeedSpec | None = None,
                                 c_rho: float | None = None, keep_minima: bool = False,
                                 threads: int | None = None) -> list[DiscretizationEstimate]:
    """Discretization error of every prefix support ``support[:m]`` on one shared MC stream."""
    X = draw_mc(mc, N, seed, index)
    N = X.shape[0]
    if N < 2:
        raise ValueError("N >= 2 is required for the Bernstein band")
    log_terms(delta)
    if c_rho is None:
        diam = _c_rho(index, X)
        c_val, c_method = diam.value, diam.method
    else:
        c_val, c_method = float(c_rho), "user"
    results = []
    for m, (mins, idx) in zip(sizes, _query_chunks(index, X, sizes, threads)):
        value = float(np.mean(mins))
        var = float(np.mean((mins - value) ** 2))
        hw = bernstein_half_width(var, N, delta, c_val)
        meta = {"n": int(m), "N": N, "delta": delta, "sigma2": var, "C_rho": c_val,
                "C_rho_method": c_method, "cost": index.spec.value,
                # the sample diameter under-estimates sup c over supp(rho)
                "C_rho_caveat": c_method != "user",
                "seed": None if seed is None else (seed.master_seed, seed.stream_id)}
        keep = slice(0, RESERVOIR)
        results.append(DiscretizationEstimate(
            value, var, N, int(m), EstimateReport(value, hw, delta, meta),
            mins[keep].copy() if keep_minima else None,
            idx[keep].copy() if keep_minima else None))
    return results


def estimate_discretization_error(index: SupportIndex, mc, N: int | None = None,
                                  delta: float = 0.05, *, seed: SeedSpec | None = None,
                                  c_rho: float | None = None, keep_minima: bool = False,
                                  threads: int | None = None) -> DiscretizationEstimate:
    """Monte Carlo estimate ``(1/N) sum_k min_j c(X_k, x_j)`` with its Bernstein band.

    Parameters
    ----------
    index : SupportIndex
        Nearest-support index over the fixed support ``x_1..x_n``.
    mc : array or sampler
        Points drawn i.i.d. from rho independently of the support, or a
        sampler ``(k, rng) -> (k, d)`` array.
    N : int, optional
        Number of MC samples (required for samplers, truncates arrays).
    delta : float
        The band holds with probability at least ``1 - delta``.
    seed : SeedSpec, optional
        Stream for the sampler; must differ from ``index.seed``.
    c_rho : float, optional
        Bound on the cost over the support of rho.  Defaults to the sample
        diameter of support and MC points, which may be slightly optimistic.
    """
    return nested_discretization_errors(index, mc, (index.n,), N, delta, seed=seed, c_rho=c_rho,
                                        keep_minima=keep_minima, threads=threads)[0]


def estimate_optimal_weights(index: SupportIndex, mc, N: int | None = None, delta: float = 0.05,
                             *, seed: SeedSpec | None = None, joint: bool = False,
                             threads: int | None = None) -> OptimalWeights:
    """Voronoi-cell masses ``w_i`` estimated by nearest-support hit frequencies.

    With ``joint=True`` each band uses ``delta / n`` so that all ``n`` bands
    hold simultaneously (union bound).
    """
    X = draw_mc(mc, N, seed, index)
    N = X.shape[0]
    if N < 2:
        raise ValueError("N >= 2 is required for the Bernstein band")
    (_, idx), = _query_chunks(index, X, (index.n,), threads)
    counts = np.bincount(idx, minlength=index.n)
    w = counts / N
    d_each = delta / index.n if joint else delta
    L = log_terms(d_each)
    hw = np.sqrt(2.0 * w * (1.0 - w) * L / N) + 7.0 * L / (3.0 * (N - 1))
    return OptimalWeights(w, counts, hw, d_each, N)
