"""Ensemble simulation and regression conditional expectations.

Everything here is a pure function of its inputs and the seed.  Conditional
expectations are least-squares projections of particle values onto a basis of
functions of the Markovian state W_{t_k}; at the root node (k = 0) the
projection degenerates to the plain sample mean.  Constant targets bypass the
solver entirely so that deterministic fields are reproduced bitwise.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

# Attached to every report that quotes sup/BMO figures.
PROXY_CAVEAT = (
    "sup_abs_Y and bmo values are discrete ensemble proxies of the S-infinity "
    "and BMO norms (finite particles, finite regression basis, finite grid); "
    "they can under-estimate the continuous-time norms."
)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_M = T."""

    M: int
    T: float
    dt: float
    nodes: np.ndarray = field(repr=False)

    @classmethod
    def make(cls, M: int, T: float) -> "TimeGrid":
        if M < 1:
            raise ValueError(f"M must be >= 1, got {M}")
        if T <= 0.0:
            raise ValueError(f"T must be positive, got {T}")
        dt = T / M
        nodes = np.linspace(0.0, T, M + 1)
        return cls(M=M, T=float(T), dt=float(dt), nodes=nodes)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """N Brownian paths on a grid: increments (N, M, d) and cumulative (N, M+1, d)."""

    grid: TimeGrid
    N: int
    d: int
    seed: int
    increments: np.ndarray = field(repr=False)
    cumulative: np.ndarray = field(repr=False)


def generate_ensemble(grid: TimeGrid, N: int, d: int, seed: int) -> Ensemble:
    """Draw N paths of a d-dimensional Brownian motion on the grid, reproducibly."""
    if N < 2:
        raise ValueError(f"need at least 2 particles for regression, got N = {N}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    increments = rng.standard_normal((N, grid.M, d)) * np.sqrt(grid.dt)
    cumulative = np.zeros((N, grid.M + 1, d))
    np.cumsum(increments, axis=1, out=cumulative[:, 1:, :])
    return Ensemble(grid=grid, N=N, d=d, seed=seed, increments=increments, cumulative=cumulative)


@dataclass(frozen=True)
class RegressionBasis:
    """Design-matrix recipe for state regression.

    kind "polynomial": all monomials of total degree <= degree in the d state
    coordinates.  kind "piecewise-bins": indicator columns of equal-quantile
    bins (d = 1 only).
    """

    kind: str = "polynomial"
    degree: int = 3
    bins: int = 8

    def __post_init__(self):
        if self.kind not in ("polynomial", "piecewise-bins"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        if self.kind == "piecewise-bins" and self.bins < 2:
            raise ValueError("need at least 2 bins")

    def design(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        N, d = states.shape
        if self.kind == "polynomial":
            cols = [np.ones(N)]
            for deg in range(1, self.degree + 1):
                for combo in itertools.combinations_with_replacement(range(d), deg):
                    col = np.ones(N)
                    for j in combo:
                        col = col * states[:, j]
                    cols.append(col)
            return np.column_stack(cols)
        if d != 1:
            raise ValueError("piecewise-bins basis supports d = 1 only")
        w = states[:, 0]
        edges = np.quantile(w, np.linspace(0.0, 1.0, self.bins + 1))
        idx = np.clip(np.searchsorted(edges[1:-1], w, side="right"), 0, self.bins - 1)
        design = np.zeros((N, self.bins))
        design[np.arange(N), idx] = 1.0
        return design


def default_basis(d: int) -> RegressionBasis:
    """House default: cubic polynomials for a scalar state, quadratic tensor above."""
    return RegressionBasis(kind="polynomial", degree=3 if d == 1 else 2)


@dataclass(frozen=True)
class RegressionInfo:
    cond: float
    fallback: bool


def project(values: np.ndarray, k: int, ens: Ensemble, basis: RegressionBasis):
    """Least-squares projection of values onto basis functions of W_{t_k}.

    values: (N,) or (N, m) for several targets sharing one design matrix.
    Returns (fitted, RegressionInfo).  Constant columns are reproduced
    bitwise; k = 0 yields the sample mean; a rank-deficient design falls back
    to the sample mean with a logged warning.
    """
    vals = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("regression targets must be finite")
    if not 0 <= k <= ens.grid.M:
        raise ValueError(f"node index {k} outside grid 0..{ens.grid.M}")
    single = vals.ndim == 1
    V = vals[:, None] if single else vals
    if V.shape[0] != ens.N:
        raise ValueError(f"{V.shape[0]} values for {ens.N} particles")

    const_cols = np.ptp(V, axis=0) == 0.0
    if const_cols.all():
        out = V.copy()
        return (out[:, 0] if single else out), RegressionInfo(cond=1.0, fallback=False)

    def _mean_fallback(cond, flag):
        out = np.broadcast_to(V.mean(axis=0), V.shape).copy()
        out[:, const_cols] = V[0:1, const_cols]
        return (out[:, 0] if single else out), RegressionInfo(cond=cond, fallback=flag)

    if k == 0:
        return _mean_fallback(1.0, False)

    X = basis.design(ens.cumulative[:, k, :])
    coef, _, rank, sv = np.linalg.lstsq(X, V, rcond=None)
    if rank < X.shape[1]:
        log.warning(
            "rank-deficient regression design at node %d (rank %d < %d); "
            "falling back to the sample mean",
            k, rank, X.shape[1],
        )
        return _mean_fallback(float("inf"), True)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    out = X @ coef
    out[:, const_cols] = V[0:1, const_cols]
    return (out[:, 0] if single else out), RegressionInfo(cond=cond, fallback=False)


def conditional_expectation(
    values: np.ndarray, k: int, ens: Ensemble, basis: RegressionBasis
) -> np.ndarray:
    """Per-particle estimate of E[values | W_{t_k}]."""
    fitted, _ = project(values, k, ens, basis)
    return fitted


@dataclass(eq=False)
class ProcessPair:
    """Solution fields on the full grid: Y (N, M+1, n) and Z (N, M, n, d),
    with their per-node particle means carried alongside."""

    Y: np.ndarray
    Z: np.ndarray
    mean_Y: np.ndarray
    mean_Z: np.ndarray

    @classmethod
    def from_fields(cls, Y: np.ndarray, Z: np.ndarray) -> "ProcessPair":
        Y = np.asarray(Y, dtype=float)
        Z = np.asarray(Z, dtype=float)
        if Y.ndim != 3 or Z.ndim != 4:
            raise ValueError(f"expected Y (N, M+1, n) and Z (N, M, n, d), got {Y.shape}, {Z.shape}")
        if Z.shape[0] != Y.shape[0] or Z.shape[1] != Y.shape[1] - 1 or Z.shape[2] != Y.shape[2]:
            raise ValueError(f"inconsistent field shapes {Y.shape}, {Z.shape}")
        return cls(Y=Y, Z=Z, mean_Y=Y.mean(axis=0), mean_Z=Z.mean(axis=0))

    def means_current(self) -> bool:
        return np.array_equal(self.mean_Y, self.Y.mean(axis=0)) and np.array_equal(
            self.mean_Z, self.Z.mean(axis=0)
        )


def empirical_means(pair: ProcessPair) -> tuple[np.ndarray, np.ndarray]:
    """Recompute (mean_Y, mean_Z) from the particle fields."""
    return pair.Y.mean(axis=0), pair.Z.mean(axis=0)


def sup_norm_estimate(pair: ProcessPair, k_lo: int = 0, k_hi: int | None = None) -> float:
    """Max over particles and nodes in [k_lo, k_hi] of the Euclidean norm of Y."""
    M = pair.Y.shape[1] - 1
    k_hi = M if k_hi is None else k_hi
    if not 0 <= k_lo <= k_hi <= M:
        raise ValueError(f"bad node range [{k_lo}, {k_hi}] for M = {M}")
    block = pair.Y[:, k_lo : k_hi + 1, :]
    return float(np.sqrt((block * block).sum(axis=2)).max())


def bmo_norm_estimate(
    pair: ProcessPair,
    ens: Ensemble,
    basis: RegressionBasis,
    k_lo: int = 0,
    k_hi: int | None = None,
) -> float:
    """Discrete BMO proxy of Z on [k_lo, k_hi].

    sqrt of the max over nodes k and particles of the regression estimate of
    E[ sum_{j >= k} |Z_{t_j}|^2 dt | W_{t_k} ], the remaining quadratic
    variation inside the window.
    """
    M = ens.grid.M
    k_hi = M if k_hi is None else k_hi
    if not 0 <= k_lo <= k_hi <= M:
        raise ValueError(f"bad node range [{k_lo}, {k_hi}] for M = {M}")
    z_sq = (pair.Z * pair.Z).sum(axis=(2, 3))           # (N, M)
    tail = np.zeros(ens.N)
    best = 0.0
    for k in range(k_hi - 1, k_lo - 1, -1):
        tail += z_sq[:, k] * ens.grid.dt
        est, _ = project(tail, k, ens, basis)
        top = float(est.max())
        if top > best:
            best = top
    return float(np.sqrt(max(best, 0.0)))


def bmo_profile(pair: ProcessPair, ens: Ensemble, basis: RegressionBasis) -> np.ndarray:
    """Per-node remaining quadratic variation proxy, (M+1,), zero at T.

    Entry k is the square root of the worst-particle regression estimate of
    E[ sum_{j >= k} |Z_{t_j}|^2 dt | W_{t_k} ] over the full remaining horizon.
    """
    M = ens.grid.M
    z_sq = (pair.Z * pair.Z).sum(axis=(2, 3))
    tail = np.zeros(ens.N)
    out = np.zeros(M + 1)
    for k in range(M - 1, -1, -1):
        tail += z_sq[:, k] * ens.grid.dt
        est, _ = project(tail, k, ens, basis)
        out[k] = math.sqrt(max(float(est.max()), 0.0))
    return out
