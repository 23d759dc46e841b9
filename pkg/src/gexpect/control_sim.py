"""Controlled Gaussian path simulation and policy optimization.

A path of the driving process accrues, over each step, an increment
``gamma_k Z_k sqrt(dt)`` where the factor ``gamma_k`` is selected by an
adapted policy from the square roots of the covariance-set extremes.  The
upper expectation of a terminal functional is the supremum of classical
Monte Carlo means over an enumerated policy family (constant, time-table and
bang-bang feedback policies), evaluated with common random numbers so that
sup comparisons are low-variance and positive homogeneity is exact.

``lattice_1d`` provides the exact one-dimensional benchmark: a trinomial
dynamic-programming lattice whose per-node quadrature matches mean and
variance for either edge of the volatility band and converges to the
viscosity solution of the one-dimensional fully nonlinear heat equation.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .covariance_set import CovarianceSet
from .g_normal import VolatilityBand, split_seed
from .operator_core import as_coords, psd_sqrt

__all__ = [
    "FactorSet",
    "ControlPolicy",
    "PolicyFamily",
    "PathBundle",
    "UpperEstimate",
    "simulate_gbm",
    "estimate_upper_expectation",
    "lattice_1d",
    "NestedSpec",
    "nested_expectation",
    "export_paths",
    "build_policies",
]

FACTOR_TOL = 1e-9


class FactorSet:
    """Square-root factors gamma with gamma @ gamma^T running over extremes."""

    __slots__ = ("gammas", "sigma")

    def __init__(self, gammas, sigma: CovarianceSet):
        stack = np.stack([np.asarray(g, dtype=float) for g in gammas])
        if stack.shape[0] != len(sigma):
            raise ValueError("one factor per extreme required")
        for g, q in zip(stack, sigma.matrices):
            if np.linalg.norm(g @ g.T - q) > FACTOR_TOL:
                raise ValueError("factor does not reproduce its extreme")
        stack.flags.writeable = False
        object.__setattr__(self, "gammas", stack)
        object.__setattr__(self, "sigma", sigma)

    def __setattr__(self, name, value):
        raise AttributeError("FactorSet is immutable")

    @classmethod
    def from_covariance_set(cls, sigma: CovarianceSet) -> "FactorSet":
        return cls([psd_sqrt(q).entries for q in sigma.extremes], sigma)

    def __len__(self) -> int:
        return self.gammas.shape[0]


@dataclass(frozen=True)
class ControlPolicy:
    """Adapted volatility-selection rule with values in a factor set.

    ``kind`` is one of constant / time_table / feedback.  A feedback rule is
    called once per step with ``(t_k, states_k)`` where ``states_k`` is the
    (n_paths, N) array of positions already fixed at time t_k, and must
    return per-path factor indices; the simulator's call order is what
    enforces adaptedness.  ``horizon`` and ``steps`` are optional declarations
    validated against the simulation grid when present.
    """

    kind: str
    index: int = 0
    table: tuple[int, ...] = ()
    rule: Callable | None = None
    name: str = ""
    horizon: tuple[float, float] | None = None
    steps: int | None = None

    @classmethod
    def constant(cls, index: int) -> "ControlPolicy":
        return cls(kind="constant", index=index, name=f"constant[{index}]")

    @classmethod
    def time_table(cls, table: Sequence[int]) -> "ControlPolicy":
        tab = tuple(int(i) for i in table)
        return cls(kind="time_table", table=tab, name=f"table{list(tab)}")

    @classmethod
    def feedback(cls, rule: Callable, name: str = "feedback") -> "ControlPolicy":
        return cls(kind="feedback", rule=rule, name=name)

    def select_indices(self, k, t, states, n_factors) -> np.ndarray:
        """Factor index per path for step k starting at time t."""
        n_paths = states.shape[0]
        if self.kind == "constant":
            idx = np.full(n_paths, self.index, dtype=int)
        elif self.kind == "time_table":
            if k >= len(self.table):
                raise ValueError(
                    f"time-table policy covers {len(self.table)} steps, "
                    f"needed step {k}"
                )
            idx = np.full(n_paths, self.table[k], dtype=int)
        elif self.kind == "feedback":
            raw = np.asarray(self.rule(t, states))
            idx = np.broadcast_to(raw.astype(int), (n_paths,)).copy()
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if idx.min() < 0 or idx.max() >= n_factors:
            raise ValueError(
                f"policy produced factor index outside [0, {n_factors})"
            )
        return idx

    def describe(self) -> str:
        return self.name or self.kind


@dataclass(frozen=True)
class PolicyFamily:
    """Enumeration spec for the policies competing in a supremum.

    Always includes one constant policy per factor when ``constants`` is set;
    a scalar state statistic adds every ordered bang-bang pair (use factor i
    when the statistic is >= 0, factor j otherwise); explicit time tables are
    appended verbatim.
    """

    constants: bool = True
    bang_bang_stat: Callable | None = None
    bang_bang_name: str = "stat"
    time_tables: tuple[tuple[int, ...], ...] = ()

    def build(self, n_factors: int) -> list[ControlPolicy]:
        policies: list[ControlPolicy] = []
        if self.constants:
            policies.extend(ControlPolicy.constant(i) for i in range(n_factors))
        if self.bang_bang_stat is not None:
            stat = self.bang_bang_stat
            for i in range(n_factors):
                for j in range(n_factors):
                    if i == j:
                        continue
                    rule = _bang_bang_rule(stat, i, j)
                    policies.append(
                        ControlPolicy.feedback(
                            rule, name=f"bang[{self.bang_bang_name}>=0:{i},else:{j}]"
                        )
                    )
        policies.extend(ControlPolicy.time_table(t) for t in self.time_tables)
        if not policies:
            raise ValueError("policy family is empty")
        return policies


def _bang_bang_rule(stat: Callable, i: int, j: int) -> Callable:
    def rule(t, states):
        return np.where(np.asarray(stat(states)) >= 0.0, i, j)

    return rule


class PathBundle:
    """Simulated paths on a uniform grid with their generating metadata."""

    __slots__ = ("times", "states", "increments", "seed", "policy", "sigma")

    def __init__(self, times, states, increments, seed, policy, sigma):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing with >= 2 points")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "increments", increments)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "policy", policy)
        object.__setattr__(self, "sigma", sigma)

    def __setattr__(self, name, value):
        raise AttributeError("PathBundle is immutable")

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1, :]


class UpperEstimate(NamedTuple):
    value: float
    policy: ControlPolicy
    stderr: float


def simulate_gbm(
    sigma: CovarianceSet,
    policy: ControlPolicy,
    n_paths: int,
    steps: int,
    T: float,
    seed: int,
    normals: np.ndarray | None = None,
) -> PathBundle:
    """Simulate paths started at zero under an adapted volatility policy.

    Each increment over ``[t_k, t_{k+1}]`` is ``gamma Z_k sqrt(dt)`` with the
    factor chosen by the policy from ``(t_k, states_k)``.  Deterministic for
    a given seed.  ``normals`` injects a pre-drawn (steps, n_paths, N) block
    of standard normals for common-random-number comparisons; by default it
    is drawn from the seed, which is the same thing.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not T > 0.0:
        raise ValueError(f"horizon must be positive, got T={T}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if policy.steps is not None and policy.steps != steps:
        raise ValueError(
            f"policy declares {policy.steps} steps, simulation uses {steps}"
        )
    if policy.horizon is not None and not math.isclose(
        policy.horizon[1] - policy.horizon[0], T
    ):
        raise ValueError("policy horizon length differs from simulation horizon")

    factors = FactorSet.from_covariance_set(sigma)
    n = sigma.dim
    dt = T / steps
    sqrt_dt = math.sqrt(dt)
    times = np.linspace(0.0, T, steps + 1)
    if normals is None:
        rng = np.random.default_rng(seed)
        normals = rng.standard_normal((steps, n_paths, n))
    elif normals.shape != (steps, n_paths, n):
        raise ValueError(
            f"normals must have shape {(steps, n_paths, n)}, got {normals.shape}"
        )

    states = np.zeros((n_paths, steps + 1, n))
    increments = np.empty((n_paths, steps, n))
    for k in range(steps):
        idx = policy.select_indices(k, times[k], states[:, k, :], len(factors))
        z = normals[k]
        if idx.min() == idx.max():
            db = (z @ factors.gammas[idx[0]].T) * sqrt_dt
        else:
            db = np.empty_like(z)
            for i in np.unique(idx):
                mask = idx == i
                db[mask] = (z[mask] @ factors.gammas[i].T) * sqrt_dt
        increments[:, k, :] = db
        states[:, k + 1, :] = states[:, k, :] + db
    return PathBundle(times, states, increments, seed, policy, sigma)


def _policy_mean(sigma, policy, f, x0, T, steps, n_paths, seed, normals):
    bundle = simulate_gbm(sigma, policy, n_paths, steps, T, seed, normals=normals)
    vals = np.asarray(f(x0 + bundle.terminal), dtype=float)
    if vals.shape != (n_paths,):
        raise ValueError(
            "terminal functional must map (n_paths, N) states to (n_paths,) values"
        )
    se = float(vals.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    return float(vals.mean()), se


def build_policies(policies, n_factors: int) -> list[ControlPolicy]:
    """Normalize a PolicyFamily or explicit policy list."""
    if isinstance(policies, PolicyFamily):
        return policies.build(n_factors)
    out = list(policies)
    if not out:
        raise ValueError("policy family is empty")
    return out


def estimate_upper_expectation(
    sigma: CovarianceSet,
    f: Callable,
    x0,
    T: float,
    steps: int,
    n_paths: int,
    policy_family,
    seed: int,
    threads: int = 1,
) -> UpperEstimate:
    """Supremum over the enumerated policy family of Monte Carlo means.

    Every policy sees the same underlying normal draws (common random
    numbers), so each member's estimate is dominated by the returned value
    exactly, and scaling the payoff scales the value exactly.  Returns the
    achieving policy and the standard error of its mean.
    """
    x0 = as_coords(x0) if not np.isscalar(x0) else np.full(sigma.dim, float(x0))
    policies = build_policies(policy_family, len(sigma))
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((steps, n_paths, sigma.dim))

    def one(policy):
        return _policy_mean(sigma, policy, f, x0, T, steps, n_paths, seed, normals)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, policies))
    else:
        results = [one(p) for p in policies]
    best = max(range(len(policies)), key=lambda i: results[i][0])
    return UpperEstimate(results[best][0], policies[best], results[best][1])


def lattice_1d(band: VolatilityBand, f: Callable, x0: float, T: float, steps: int) -> float:
    """Backward dynamic programming on a trinomial lattice in one dimension.

    At each node the continuation value is the larger of the two three-point
    quadratures with variances ``band.sigma_down_sq * dt`` and
    ``band.sigma_up_sq * dt`` (moments 0 and variance matched exactly).  The
    value converges first order in 1/steps to the viscosity solution at
    (0, x0) and is monotone in the terminal data.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not T > 0.0:
        raise ValueError(f"horizon must be positive, got T={T}")
    up, down = band.sigma_up_sq, band.sigma_down_sq
    if up == 0.0:
        return float(np.asarray(f(np.array([x0])))[0])
    dt = T / steps
    # dx chosen so the top-volatility jump probability is 1/3 (monotone).
    dx = math.sqrt(1.5 * up * dt)
    p_up_vol = up * dt / (2.0 * dx * dx)
    p_dn_vol = down * dt / (2.0 * dx * dx)

    nodes = x0 + dx * np.arange(-steps, steps + 1)
    values = np.asarray(f(nodes), dtype=float)
    if values.shape != nodes.shape:
        raise ValueError("lattice payoff must map node array to value array")
    for _ in range(steps):
        mid = values[1:-1]
        jump = values[2:] + values[:-2]
        cand_hi = p_up_vol * jump + (1.0 - 2.0 * p_up_vol) * mid
        cand_lo = p_dn_vol * jump + (1.0 - 2.0 * p_dn_vol) * mid
        values = np.maximum(cand_hi, cand_lo)
    return float(values[0])


@dataclass(frozen=True)
class NestedSpec:
    """Horizon, discretization and policy family for one nesting level."""

    T: float = 1.0
    steps: int = 8
    n_paths: int = 2000
    family: PolicyFamily = field(default_factory=PolicyFamily)
    seed: int = 0


def nested_expectation(
    sigma: CovarianceSet,
    f2: Callable,
    inner_spec: NestedSpec,
    outer_spec: NestedSpec,
) -> float:
    """Nested evaluation of E[f2(X, Y)] with Y independent from X.

    The inner supremum is taken pointwise in the outer sample (Y independent
    from X; the reverse order would be a different quantity).  ``f2`` must
    broadcast: it is called with x of shape (n_outer, 1, N) and y of shape
    (1, n_inner, N) and must return an (n_outer, n_inner) array.
    """
    n = sigma.dim
    inner_policies = build_policies(inner_spec.family, len(sigma))
    outer_policies = build_policies(outer_spec.family, len(sigma))

    inner_samples = [
        simulate_gbm(
            sigma, pol, inner_spec.n_paths, inner_spec.steps, inner_spec.T,
            split_seed(inner_spec.seed, 1),
        ).terminal
        for pol in inner_policies
    ]

    best = -math.inf
    for pol in outer_policies:
        x = simulate_gbm(
            sigma, pol, outer_spec.n_paths, outer_spec.steps, outer_spec.T,
            split_seed(outer_spec.seed, 0),
        ).terminal
        g_vals = None
        for y in inner_samples:
            vals = np.asarray(
                f2(x[:, None, :], y[None, :, :]), dtype=float
            )
            if vals.shape != (x.shape[0], y.shape[0]):
                raise ValueError(
                    "f2 must broadcast (n_outer,1,N) x (1,n_inner,N) -> "
                    "(n_outer, n_inner)"
                )
            mean_inner = vals.mean(axis=1)
            g_vals = mean_inner if g_vals is None else np.maximum(g_vals, mean_inner)
        best = max(best, float(g_vals.mean()))
    return best


def export_paths(bundle: PathBundle, csv_path, sidecar_path=None, max_paths=None) -> None:
    """Write paths to CSV (one row per path per coordinate) plus a JSON sidecar."""
    n_out = bundle.n_paths if max_paths is None else min(bundle.n_paths, max_paths)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "coord"] + [f"t={t:.10g}" for t in bundle.times])
        for p in range(n_out):
            for d in range(bundle.dim):
                writer.writerow(
                    [p, d] + [repr(float(v)) for v in bundle.states[p, :, d]]
                )
    if sidecar_path is not None:
        meta = {
            "seed": int(bundle.seed),
            "policy": bundle.policy.describe(),
            "sigma_label": bundle.sigma.label,
            "n_paths": int(n_out),
            "steps": int(bundle.n_steps),
            "t0": float(bundle.times[0]),
            "T": float(bundle.times[-1]),
        }
        with open(sidecar_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
