"""Intrinsic dimension from the decay of the discretization error.

With ``OT(n) ~ C n^(-1/d)``, two support sizes ``n`` and ``eta n`` give

    d_hat = log(eta) / (log OT(n) - log OT(eta n)).

The error is always measured with the Euclidean cost ``c(x, y) = |x - y|``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .discretization import DiscretizationEstimate, nested_discretization_errors
from .entropic import ASSIGNMENT_MAX_N, exact_ot_assignment
from .measure import CostSpec, PointCloud, Sampler, SeedSpec, as_cloud
from .nearest import Acceleration, build_index

DEFAULT_ETA = 1.5
# Below this the decay law is not expected to hold; such estimates are flagged.
LOW_DIM_FLAG = 2.0


class DegenerateRatio(ArithmeticError):
    """The larger support did not reduce the estimated error."""


@dataclass(frozen=True)
class DimensionEstimate:
    d_hat: float
    eta: float
    n: int
    N: int
    ot_n: DiscretizationEstimate
    ot_eta_n: DiscretizationEstimate
    propagated_band: tuple[float, float]
    low_dimension: bool = False

    @property
    def eta_n(self) -> int:
        return self.ot_eta_n.n


@dataclass(frozen=True)
class DimensionProfile:
    grid: tuple[int, ...]
    ot: tuple[DiscretizationEstimate, ...] = field(repr=False)
    d_hat: tuple[float, ...]

    @property
    def ot_values(self) -> np.ndarray:
        return np.array([e.value for e in self.ot])

    def to_csv(self) -> str:
        """Rows ``n, ot, half_width, d_hat`` where ``d_hat`` pairs a row with the next."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "ot", "half_width", "d_hat_to_next"])
        for i, (m, e) in enumerate(zip(self.grid, self.ot)):
            dh = self.d_hat[i] if i < len(self.d_hat) else math.nan
            w.writerow([m, repr(e.value), repr(e.half_width), "" if math.isnan(dh) else repr(dh)])
        return buf.getvalue()


def dimension_from_values(ot_n: float, ot_eta_n: float, eta: float) -> float:
    """``log(eta) / (log ot_n - log ot_eta_n)``."""
    if not eta > 1:
        raise ValueError(f"eta must exceed 1, got {eta}")
    if not (ot_n > 0 and ot_eta_n > 0):
        raise ValueError(f"error estimates must be positive, got {ot_n} and {ot_eta_n}")
    if ot_eta_n >= ot_n:
        raise DegenerateRatio(f"error did not decrease ({ot_n} -> {ot_eta_n}); increase N or n")
    # log of the ratio keeps the estimate exactly invariant to power-of-two rescaling
    return math.log(eta) / math.log(ot_n / ot_eta_n)


def propagated_band(ot_n: float, h_n: float, ot_eta_n: float, h_eta_n: float,
                    eta: float) -> tuple[float, float]:
    """Worst-case range of ``d_hat`` over the two error bands, clipped to ``(0, inf)``."""
    log_eta = math.log(eta)
    # Smallest d_hat: largest log gap.
    lo_big, lo_small = ot_n + h_n, ot_eta_n - h_eta_n
    lo = 0.0 if lo_small <= 0 else log_eta / math.log(lo_big / lo_small)
    hi_big, hi_small = ot_n - h_n, ot_eta_n + h_eta_n
    hi = math.inf if hi_big <= hi_small else log_eta / math.log(hi_big / hi_small)
    return lo, hi


def _draw_support(sampler: Sampler, m: int, seed: SeedSpec) -> PointCloud:
    return PointCloud(np.asarray(sampler(m, seed.rng()), dtype=np.float64))


def _check_seeds(seeds: tuple[SeedSpec, SeedSpec]) -> tuple[SeedSpec, SeedSpec]:
    support_seed, mc_seed = seeds
    if support_seed == mc_seed:
        raise ValueError("support and MC streams need distinct seeds")
    return support_seed, mc_seed


def estimate_dimension(sampler: Sampler, n: int, eta: float = DEFAULT_ETA, N: int = 20_000,
                       delta: float = 0.05, seeds: tuple[SeedSpec, SeedSpec] = (SeedSpec(0, 0), SeedSpec(0, 1)),
                       accel: Acceleration | str = Acceleration.AUTO,
                       threads: int | None = None) -> DimensionEstimate:
    """Two-scale dimension estimate on nested supports and one shared MC stream.

    The support of size ``ceil(eta n)`` is drawn once from ``seeds[0]``; its
    first ``n`` points form the smaller support.  Both errors are evaluated on
    the same ``N`` points drawn from ``seeds[1]``.

    Raises
    ------
    DegenerateRatio
        If the larger support does not show a smaller error.
    """
    if not eta > 1:
        raise ValueError(f"eta must exceed 1, got {eta}")
    m = math.ceil(eta * n)
    if n < 1 or m < n + 1:
        raise ValueError(f"ceil(eta * n) = {m} must exceed n = {n}")
    support_seed, mc_seed = _check_seeds(seeds)
    support = _draw_support(sampler, m, support_seed)
    index = build_index(support, CostSpec.P1, accel, seed=support_seed)
    e_n, e_m = nested_discretization_errors(index, sampler, (n, m), N, delta, seed=mc_seed,
                                            threads=threads)
    return _combine(e_n, e_m, eta)


def _combine(e_n: DiscretizationEstimate, e_m: DiscretizationEstimate, eta: float) -> DimensionEstimate:
    d_hat = dimension_from_values(e_n.value, e_m.value, eta)
    band = propagated_band(e_n.value, e_n.half_width, e_m.value, e_m.half_width, eta)
    return DimensionEstimate(d_hat, eta, e_n.n, e_n.N, e_n, e_m, band, d_hat <= LOW_DIM_FLAG)


def estimate_dimension_from_cloud(cloud, n: int | None = None, eta: float = DEFAULT_ETA,
                                  delta: float = 0.05, seed: SeedSpec = SeedSpec(0, 0)) -> DimensionEstimate:
    """Dimension estimate from a finite sample only.

    The cloud is shuffled; its first ``ceil(eta n)`` points serve as the
    support and every remaining point as an MC draw, which keeps the two
    independent.  ``n`` defaults to a fifth of the cloud.
    """
    pts = as_cloud(cloud).points
    total = pts.shape[0]
    if n is None:
        n = max(2, total // 5)
    m = math.ceil(eta * n)
    if total - m < 2:
        raise ValueError(f"cloud of {total} points leaves no MC points for supports of size {m}")
    perm = seed.rng().permutation(total)
    support = PointCloud(pts[perm[:m]])
    index = build_index(support, CostSpec.P1, seed=seed)
    e_n, e_m = nested_discretization_errors(index, pts[perm[m:]], (n, m), None, delta)
    return _combine(e_n, e_m, eta)


def dimension_profile(sampler: Sampler, grid: Sequence[int], N: int = 20_000, delta: float = 0.05,
                      seeds: tuple[SeedSpec, SeedSpec] = (SeedSpec(0, 0), SeedSpec(0, 1)),
                      accel: Acceleration | str = Acceleration.AUTO,
                      threads: int | None = None) -> DimensionProfile:
    """Errors on nested supports across ``grid`` and ``d_hat`` for each consecutive pair.

    Pairs whose error does not decrease get ``nan``.
    """
    grid = tuple(int(m) for m in grid)
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"grid must be strictly increasing with at least two sizes, got {grid}")
    if grid[0] < 1:
        raise ValueError("support sizes must be >= 1")
    support_seed, mc_seed = _check_seeds(seeds)
    support = _draw_support(sampler, grid[-1], support_seed)
    index = build_index(support, CostSpec.P1, accel, seed=support_seed)
    ests = nested_discretization_errors(index, sampler, grid, N, delta, seed=mc_seed, threads=threads)
    d_hat = []
    for (a, ea), (b, eb) in zip(zip(grid, ests), zip(grid[1:], ests[1:])):
        try:
            d_hat.append(dimension_from_values(ea.value, eb.value, b / a))
        except (DegenerateRatio, ValueError):
            d_hat.append(math.nan)
    return DimensionProfile(grid, tuple(ests), tuple(d_hat))


def discrete_w1_dimension_baseline(sampler: Sampler, n: int, eta: float = DEFAULT_ETA,
                                   seed: SeedSpec = SeedSpec(0, 0), backend: str = "native") -> float:
    """Two-sample estimate from exact W1 between independent uniform empirical measures.

    Draws four independent samples of sizes ``n, n, eta n, eta n`` and solves
    both equal-size assignment problems exactly.
    """
    if not eta > 1:
        raise ValueError(f"eta must exceed 1, got {eta}")
    m = math.ceil(eta * n)
    if m > ASSIGNMENT_MAX_N:
        raise ValueError(f"ceil(eta * n) = {m} exceeds the exact solver limit {ASSIGNMENT_MAX_N}")
    if n < 1 or m < n + 1:
        raise ValueError(f"ceil(eta * n) = {m} must exceed n = {n}")
    rng = seed.rng()
    a, b = sampler(n, rng), sampler(n, rng)
    c, d = sampler(m, rng), sampler(m, rng)
    w_n = exact_ot_assignment(a, b, CostSpec.P1, backend)
    w_m = exact_ot_assignment(c, d, CostSpec.P1, backend)
    return dimension_from_values(w_n, w_m, eta)
