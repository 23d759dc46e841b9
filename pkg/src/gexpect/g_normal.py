"""Centered distributions driven by a covariance set.

Exact even-moment recursion for a single Gaussian factor, moment bounds for
the whole set, one-dimensional projection bands, per-measure sampling and the
static (supremum over extremes) upper-expectation evaluator.

The static evaluator is exact whenever the supremum over adapted volatility
controls is attained by a constant control (convex or concave payoffs in the
1-d projection); the general case lives in ``control_sim`` and dominates it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .covariance_set import CovarianceSet, covset_scale
from .operator_core import as_coords, as_matrix, psd_sqrt

__all__ = [
    "GNormal",
    "VolatilityBand",
    "MomentBounds",
    "StaticEstimate",
    "split_seed",
    "gaussian_even_moment",
    "moment_constant",
    "moment_upper",
    "moment_bounds_check",
    "project_band",
    "covariance_form",
    "sample_gaussian",
    "static_upper_expectation",
    "static_upper_report",
    "dump_samples_csv",
]

_MASK64 = (1 << 64) - 1
# Moment-bound constants are certified only this far; see README.
MOMENT_CONSTANT_MAX_ORDER = 5
MOMENT_CONSTANT_MAX_DIM = 8


def split_seed(seed: int, index: int) -> int:
    """Derive an independent sub-seed from (seed, worker index).

    SplitMix64 finalizer over the pair; this is the documented splitting rule
    for parallel workers, so runs stay reproducible regardless of scheduling.
    """
    z = ((int(seed) & _MASK64) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class GNormal:
    """Law of sqrt(scale) * X for X centered with covariance set ``sigma``."""

    sigma: CovarianceSet
    scale: float = 1.0

    def __post_init__(self):
        if self.scale < 0.0:
            raise ValueError(f"scale must be nonnegative, got {self.scale}")

    @property
    def dim(self) -> int:
        return self.sigma.dim

    def scaled_set(self) -> CovarianceSet:
        """Covariance set of the scaled variable, scale * Sigma."""
        return covset_scale(self.sigma, math.sqrt(self.scale))


@dataclass(frozen=True)
class VolatilityBand:
    """Directional variance band [sigma_down_sq, sigma_up_sq]."""

    sigma_up_sq: float
    sigma_down_sq: float

    def __post_init__(self):
        if not (self.sigma_up_sq >= self.sigma_down_sq >= 0.0):
            raise ValueError(
                f"band must satisfy up >= down >= 0, got "
                f"({self.sigma_up_sq}, {self.sigma_down_sq})"
            )


class MomentBounds(NamedTuple):
    lower: float
    value: float
    upper: float
    ok: bool


class StaticEstimate(NamedTuple):
    value: float
    stderr: float
    extreme_index: int


def _eigenvalues_psd(q) -> np.ndarray:
    w = np.linalg.eigvalsh(as_matrix(q))
    return np.clip(w, 0.0, None)


def gaussian_even_moment(q, m: int) -> float:
    """E ||X||^(2m) for a single centered Gaussian with covariance ``q``.

    Uses the exact recursion for the derivatives of
    F(eps) = det(1 - eps q)^(-1/2) at zero:

        F_r = (r-1)!/2 * sum_{j<r} F_j / j! * Tr[q^(r-j)],   F_0 = 1,

    and E ||X||^(2m) = 2^m * F_m, with the trace powers read off the
    eigenvalues.  m = 0 is rejected to keep the contract sharp.
    """
    if m < 1:
        raise ValueError(f"moment order must be >= 1, got {m}")
    w = _eigenvalues_psd(q)
    trace_pow = [0.0] + [float(np.sum(w**k)) for k in range(1, m + 1)]
    f = [1.0]
    for r in range(1, m + 1):
        acc = sum(f[j] / math.factorial(j) * trace_pow[r - j] for j in range(r))
        f.append(math.factorial(r - 1) / 2.0 * acc)
    return float(2.0**m * f[m])


def moment_constant(m: int) -> float:
    """Certified constant K_m for the moment sandwich, from the recursion.

    Equals the 2m-th absolute moment of a standard 1-d Gaussian (the rank-one
    worst case), i.e. the double factorial (2m-1)!!.  Certified for
    m <= MOMENT_CONSTANT_MAX_ORDER and dim <= MOMENT_CONSTANT_MAX_DIM.
    """
    return gaussian_even_moment(np.eye(1), m)


def moment_upper(gn: GNormal, m: int) -> float:
    """sup over extremes of E_Q ||X||^(2m); exact, no sampling.

    For m = 1 this is exactly scale * sup Tr Q.
    """
    per = [gaussian_even_moment(q, m) for q in gn.sigma.matrices]
    return float(gn.scale**m * max(per))


def moment_bounds_check(gn: GNormal, m: int) -> MomentBounds:
    """Sandwich sup Tr[Q^m] <= E||X||^(2m) <= (sup Tr Q)^m up to K_m.

    ``ok`` asserts lower <= K_m * value and value <= K_m * upper with the
    certified K_m of ``moment_constant``.
    """
    value = moment_upper(gn, m)
    lower = float(
        gn.scale**m
        * max(np.sum(_eigenvalues_psd(q) ** m) for q in gn.sigma.matrices)
    )
    upper = float(
        gn.scale**m * max(np.trace(q) for q in gn.sigma.matrices) ** m
    )
    k_m = moment_constant(m)
    tol = 1.0 + 1e-12
    ok = (lower <= k_m * value * tol) and (value <= k_m * upper * tol)
    return MomentBounds(lower, value, upper, bool(ok))


def project_band(gn: GNormal, h) -> VolatilityBand:
    """Variance band of the 1-d projection <X, h>.

    Upper edge is scale * max over extremes of <Q h, h>, lower edge the
    minimum; the band ordering is guaranteed by construction.
    """
    hc = as_coords(h)
    if hc.size != gn.dim:
        raise ValueError(f"dimension mismatch in project_band: {hc.size} != {gn.dim}")
    quad = np.einsum("qij,i,j->q", gn.sigma.matrices, hc, hc)
    return VolatilityBand(
        sigma_up_sq=float(gn.scale * quad.max()),
        sigma_down_sq=float(gn.scale * max(quad.min(), 0.0)),
    )


def covariance_form(gn: GNormal, h, k) -> float:
    """Upper covariance scale * sup over extremes of <Q h, k>.

    May be negative when every extreme gives a negative inner product.
    """
    hc, kc = as_coords(h), as_coords(k)
    if hc.size != gn.dim or kc.size != gn.dim:
        raise ValueError("dimension mismatch in covariance_form")
    vals = np.einsum("qij,i,j->q", gn.sigma.matrices, hc, kc)
    return float(gn.scale * vals.max())


def sample_gaussian(q, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws of sqrt(q) @ Z, returned as an (n, N) array.

    Deterministic for a given seed; the empirical covariance converges to q.
    """
    if n < 1:
        raise ValueError(f"need at least one draw, got n={n}")
    root = psd_sqrt(q).entries
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, root.shape[0]))
    return z @ root.T


def _evaluate_rows(f: Callable, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(x), dtype=float)
    if vals.shape != (x.shape[0],):
        raise ValueError(
            f"test functional must map (n, N) draws to (n,) values, "
            f"got shape {vals.shape} for n={x.shape[0]}"
        )
    return vals


def static_upper_report(gn: GNormal, f: Callable, n: int, seed: int) -> StaticEstimate:
    """Static evaluator with the standard error of the achieving extreme.

    Common random numbers: one block of standard normals is pushed through
    every extreme's square root, which makes positive homogeneity,
    monotonicity and subadditivity of the estimate exact, not just within
    Monte Carlo noise.
    """
    if n < 1:
        raise ValueError(f"need at least one draw, got n={n}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, gn.dim))
    sqrt_scale = math.sqrt(gn.scale)
    best: StaticEstimate | None = None
    for i, q in enumerate(gn.sigma.extremes):
        x = z @ (sqrt_scale * psd_sqrt(q).entries).T
        vals = _evaluate_rows(f, x)
        mean = float(vals.mean())
        if best is None or mean > best.value:
            se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            best = StaticEstimate(mean, se, i)
    return best


def static_upper_expectation(gn: GNormal, f: Callable, n: int, seed: int) -> float:
    """max over extremes Q of the Monte Carlo average of f under N(0, scale*Q).

    A lower bound for the dynamic (adapted-control) value; coincides with it
    when a constant control attains the supremum.  ``f`` must be vectorized
    over rows: it receives an (n, N) array of draws and returns (n,) values.
    """
    return static_upper_report(gn, f, n, seed).value


def dump_samples_csv(path, samples: np.ndarray) -> None:
    """Write draws to CSV, one row per draw."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(samples.shape[1])])
        writer.writerows(samples.tolist())
