"""Synthetic measures with known intrinsic dimension, and transport pairs with
closed-form ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measure import PointCloud, SeedSpec, as_rng

KINDS = ("hypercube_mixture", "lowrank_gaussian_mixture", "lowrank_gaussian",
         "intro_mixture", "uniform_cube")

_PSD_TOL = 1e-10


@dataclass(frozen=True)
class Component:
    """One mixture component living on the first ``dim`` coordinates.

    ``kind`` is ``"cube"`` (U[0,1]^dim x {0}^(d-dim)) or ``"gaussian"``
    (N(0, P P^T) with P a d x dim orthonormal frame).  A scalar ``offset``
    shifts the active coordinates of a cube and every coordinate of a Gaussian;
    a vector offset is added as is.
    """

    kind: str
    dim: int
    weight: float = 1.0
    offset: float | tuple[float, ...] = 0.0
    scale: float = 1.0


@dataclass(frozen=True)
class ManifoldConfig:
    kind: str
    ambient_d: int
    components: tuple[Component, ...]
    frame_seed: int = 0
    _frames: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}; expected one of {KINDS}")
        if self.ambient_d < 1:
            raise ValueError("ambient_d must be >= 1")
        if not self.components:
            raise ValueError("at least one component is required")
        w = np.array([c.weight for c in self.components], dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture proportions {w.tolist()} are not on the simplex")
        for c in self.components:
            if c.kind not in ("cube", "gaussian"):
                raise ValueError(f"unknown component kind {c.kind!r}")
            if not 1 <= c.dim <= self.ambient_d:
                raise ValueError(f"component dimension {c.dim} not in [1, {self.ambient_d}]")
            if not np.isscalar(c.offset) and len(c.offset) != self.ambient_d:
                raise ValueError("vector offsets must have ambient_d entries")
        # Frames are a property of the config, drawn once and frozen.
        rng = SeedSpec(self.frame_seed, 7919).rng()
        frames = []
        for c in self.components:
            if c.kind == "gaussian":
                G = rng.standard_normal((self.ambient_d, c.dim))
                Q, R = np.linalg.qr(G)
                Q = Q * np.sign(np.diag(R))
                frames.append(Q)
            else:
                frames.append(None)
        object.__setattr__(self, "_frames", tuple(frames))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=np.float64)

    def _offset(self, c: Component) -> np.ndarray:
        d = self.ambient_d
        if np.isscalar(c.offset):
            off = np.zeros(d)
            if c.kind == "cube":
                off[:c.dim] = c.offset
            else:
                off[:] = c.offset
            return off
        return np.asarray(c.offset, dtype=np.float64)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        d = self.ambient_d
        comp = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.zeros((n, d))
        for i, c in enumerate(self.components):
            rows = np.flatnonzero(comp == i)
            if rows.size == 0:
                continue
            if c.kind == "cube":
                out[rows, :c.dim] = c.scale * rng.random((rows.size, c.dim))
            else:
                z = rng.standard_normal((rows.size, c.dim))
                out[rows] = c.scale * (z @ self._frames[i].T)
            out[rows] += self._offset(c)
        return out

    def __call__(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.draw(n, rng)

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean vector and covariance matrix of the mixture."""
        d = self.ambient_d
        mean = np.zeros(d)
        second = np.zeros((d, d))
        for i, c in enumerate(self.components):
            off = self._offset(c)
            if c.kind == "cube":
                m = off.copy()
                m[:c.dim] += 0.5 * c.scale
                S = np.zeros((d, d))
                S[np.arange(c.dim), np.arange(c.dim)] = c.scale ** 2 / 12.0
            else:
                m = off
                P = self._frames[i]
                S = c.scale ** 2 * (P @ P.T)
            mean += c.weight * m
            second += c.weight * (S + np.outer(m, m))
        cov = second - np.outer(mean, mean)
        return mean, 0.5 * (cov + cov.T)

    @property
    def intrinsic_dims(self) -> tuple[int, ...]:
        return tuple(c.dim for c in self.components)


def uniform_cube(d: int) -> ManifoldConfig:
    return ManifoldConfig("uniform_cube", d, (Component("cube", d),))


def hypercube_mixture(ambient_d: int, dims: Sequence[int], weights: Sequence[float],
                      offsets: Sequence[float] | None = None) -> ManifoldConfig:
    offsets = offsets or [0.0] * len(dims)
    comps = tuple(Component("cube", k, w, o) for k, w, o in zip(dims, weights, offsets))
    return ManifoldConfig("hypercube_mixture", ambient_d, comps)


def lowrank_gaussian_mixture(ambient_d: int, ranks: Sequence[int], weights: Sequence[float],
                             frame_seed: int = 0, scale: float = 1.0) -> ManifoldConfig:
    comps = tuple(Component("gaussian", k, w, 0.0, scale) for k, w in zip(ranks, weights))
    return ManifoldConfig("lowrank_gaussian_mixture", ambient_d, comps, frame_seed)


def lowrank_gaussian(ambient_d: int, rank: int, frame_seed: int = 0, offset: float = 0.0,
                     scale: float = 1.0) -> ManifoldConfig:
    return ManifoldConfig("lowrank_gaussian", ambient_d,
                          (Component("gaussian", rank, 1.0, offset, scale),), frame_seed)


def intro_mixture() -> ManifoldConfig:
    """Half U([0,1]^2 x {0}^8), half U([1,2]^8 x {0}^2) in R^10."""
    return ManifoldConfig("intro_mixture", 10,
                          (Component("cube", 2, 0.5, 0.0), Component("cube", 8, 0.5, 1.0)))


def fig1_configs() -> dict[str, ManifoldConfig]:
    """The three dimension-benchmark measures in R^20 with effective dimension 10."""
    return {
        "hypercube_mixture": hypercube_mixture(20, (2, 10), (0.8, 0.2)),
        "lowrank_gaussian_mixture": lowrank_gaussian_mixture(20, (2, 10), (0.8, 0.2), frame_seed=1),
        "lowrank_gaussian": lowrank_gaussian(20, 10, frame_seed=2),
    }


def sample_manifold(cfg: ManifoldConfig, n: int, seed: SeedSpec) -> PointCloud:
    return PointCloud(cfg.draw(n, as_rng(seed)))


def _check_psd(S: np.ndarray, name: str) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(S, S.T, rtol=0, atol=1e-10 * max(1.0, np.abs(S).max())):
        raise ValueError(f"{name} is not symmetric")
    S = 0.5 * (S + S.T)
    lam = np.linalg.eigvalsh(S)
    if lam[0] < -_PSD_TOL * max(1.0, abs(lam[-1])):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {lam[0]:.3g})")
    return S


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric square root with eigenvalues clamped at zero."""
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)) @ V.T


def bures_w2sq(m1, S1, m2, S2) -> float:
    """Squared 2-Wasserstein distance between two Gaussians."""
    m1 = np.atleast_1d(np.asarray(m1, dtype=np.float64))
    m2 = np.atleast_1d(np.asarray(m2, dtype=np.float64))
    S1 = _check_psd(np.atleast_2d(S1), "S1")
    S2 = _check_psd(np.atleast_2d(S2), "S2")
    if not (m1.shape == m2.shape and S1.shape == S2.shape and S1.shape[0] == m1.shape[0]):
        raise ValueError("means and covariances must share one dimension")
    r1 = psd_sqrt(S1)
    cross = psd_sqrt(r1 @ S2 @ r1)
    val = float(np.sum((m1 - m2) ** 2) + np.trace(S1) + np.trace(S2) - 2.0 * np.trace(cross))
    return max(val, 0.0)


@dataclass(frozen=True)
class BrenierPair:
    """Source measure and the affine Brenier map ``x -> A x + b`` with ``A`` PSD."""

    source: ManifoldConfig
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        d = self.source.ambient_d
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if A.shape != (d, d) or b.shape != (d,):
            raise ValueError(f"map dimension does not match source dimension {d}")
        A = _check_psd(A, "A")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def transport(self, x: np.ndarray) -> np.ndarray:
        return x @ self.A.T + self.b

    @property
    def true_w2sq(self) -> float:
        """E||x - T(x)||^2 from the source moments."""
        m, S = self.source.moments()
        B = self.A - np.eye(len(self.b))
        shift = B @ m + self.b
        return float(shift @ shift + np.trace(B @ S @ B.T))

    def monte_carlo_w2sq(self, N: int = 10**6, seed: SeedSpec = SeedSpec(0, 99)) -> tuple[float, float]:
        """Monte Carlo value of E||x - T(x)||^2 and its standard error."""
        x = self.source.draw(N, as_rng(seed))
        r = np.sum((x - self.transport(x)) ** 2, axis=1)
        return float(r.mean()), float(r.std(ddof=1) / np.sqrt(N))


def sample_brenier_pair(pair: BrenierPair, n: int, seed: SeedSpec) -> tuple[PointCloud, PointCloud, float]:
    """Source sample X, target sample T(X') from an independent draw X', and W2^2."""
    X = pair.source.draw(n, seed.rng())
    Xp = pair.source.draw(n, seed.child(1).rng())
    return PointCloud(X), PointCloud(pair.transport(Xp)), pair.true_w2sq


def gaussian_translation_pair(d: int = 5, shift: float = 1.0) -> BrenierPair:
    """N(0, I_d) pushed to N(shift * 1, I_d)."""
    return BrenierPair(lowrank_gaussian(d, d), np.eye(d), np.full(d, shift))


def sensitivity_pair(frame_seed: int = 5, map_seed: int = 11, shift: float = 0.5) -> BrenierPair:
    """90% rank-5 + 10% rank-1 Gaussian mixture in R^10 pushed by a fixed SPD affine map.

    The map has eigenvalues spread evenly over [0.5, 2] in a seeded frame, so
    the target keeps the source's intrinsic dimensions.
    """
    src = lowrank_gaussian_mixture(10, (5, 1), (0.9, 0.1), frame_seed=frame_seed)
    Q, _ = np.linalg.qr(SeedSpec(map_seed, 7919).rng().standard_normal((10, 10)))
    A = (Q * np.linspace(0.5, 2.0, 10)) @ Q.T
    return BrenierPair(src, 0.5 * (A + A.T), np.full(10, shift))


MANIFOLDS = {
    "hypercube_mixture": lambda: fig1_configs()["hypercube_mixture"],
    "lowrank_gaussian_mixture": lambda: fig1_configs()["lowrank_gaussian_mixture"],
    "lowrank_gaussian": lambda: fig1_configs()["lowrank_gaussian"],
    "intro_mixture": intro_mixture,
}

PAIRS = {
    "gaussian_translation": gaussian_translation_pair,
    "sensitivity_mixture": sensitivity_pair,
}


def named_manifold(name: str, ambient_d: int | None = None) -> ManifoldConfig:
    """Registry lookup; ``uniform_cube`` needs ``ambient_d``."""
    if name == "uniform_cube":
        if ambient_d is None:
            raise ValueError("uniform_cube needs ambient_d")
        return uniform_cube(int(ambient_d))
    try:
        return MANIFOLDS[name]()
    except KeyError:
        raise ValueError(f"unknown manifold {name!r}; expected one of "
                         f"{sorted(MANIFOLDS) + ['uniform_cube']}") from None


def named_pair(name: str, **kw) -> BrenierPair:
    try:
        factory = PAIRS[name]
    except KeyError:
        raise ValueError(f"unknown transport pair {name!r}; expected one of {sorted(PAIRS)}") from None
    return factory(**kw)
