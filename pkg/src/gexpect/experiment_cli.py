"""Reproducible experiment runner.

``gexpect run config.json`` executes one named experiment deterministically
for the configured seed and writes a JSON report plus CSV artifacts;
``gexpect plot report.json --series NAME`` flattens a recorded series to
plot-ready CSV.  Exit codes: 0 all checks pass, 1 a check failed (report
still written), 2 usage error.  The runner only formats numbers produced by
the library modules.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .covariance_set import CovarianceSet
from .control_sim import (
    ControlPolicy,
    NestedSpec,
    PolicyFamily,
    estimate_upper_expectation,
    export_paths,
    lattice_1d,
    nested_expectation,
    simulate_gbm,
)
from .g_normal import (
    GNormal,
    dump_samples_csv,
    moment_bounds_check,
    moment_constant,
    moment_upper,
    project_band,
    sample_gaussian,
    split_seed,
    static_upper_report,
)
from .g_pde import (
    McControlSpec,
    MeshSpec,
    PdeProblem,
    flow_property_discrepancy,
    mc_value,
    ou_mild_path,
    solve_gheat,
    solve_gpde,
    write_slice_csv,
)
from .stoch_integral import (
    ElementaryProcess,
    bdg_check,
    check_record,
    convolution_condition,
    convolution_path,
    fubini_check,
    integrate_elementary,
    ito_isometry_check,
    sigma_of_integral,
)

__all__ = ["ExperimentConfig", "run", "emit_plotdata", "main", "KINDS"]

SEED_OVERRIDE_ENV = "GEXPECT_SEED_OVERRIDE"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    sigma: CovarianceSet
    params: dict
    seed: int
    output_dir: Path

    @classmethod
    def load(cls, path, out_override=None) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed JSON config: {exc}") from exc
        for key in ("name", "kind", "sigma", "seed"):
            if key not in doc:
                raise UsageError(f"config is missing required key {key!r}")
        if doc["kind"] not in KINDS:
            raise UsageError(
                f"unknown kind {doc['kind']!r}; known: {', '.join(sorted(KINDS))}"
            )
        sigma_doc = doc["sigma"]
        if isinstance(sigma_doc, str):
            sigma_path = (path.parent / sigma_doc).resolve()
            if not sigma_path.is_file():
                raise UsageError(f"covariance-set file not found: {sigma_path}")
            sigma = CovarianceSet.from_json(sigma_path.read_text())
        else:
            sigma = CovarianceSet.from_dict(sigma_doc)
        seed = doc["seed"]
        if not isinstance(seed, int):
            raise UsageError("seed must be an integer (no implicit randomness)")
        override = os.environ.get(SEED_OVERRIDE_ENV)
        if override is not None:
            try:
                seed = int(override)
            except ValueError as exc:
                raise UsageError(
                    f"{SEED_OVERRIDE_ENV} must be an integer, got {override!r}"
                ) from exc
        out_dir = Path(out_override or doc.get("output_dir", "gexpect-out"))
        return cls(
            name=str(doc["name"]),
            kind=str(doc["kind"]),
            sigma=sigma,
            params=dict(doc.get("params", {})),
            seed=seed,
            output_dir=out_dir,
        )

    def echo(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "sigma": self.sigma.to_dict(),
            "params": self.params,
            "seed": self.seed,
        }


def _norm_sq(x):
    return np.sum(x * x, axis=1)


def _unit_directions(dim, count, seed):
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((count, dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _run_moments(cfg, out_dir, threads):
    p = cfg.params
    m_max = int(p.get("m_max", 3))
    n = int(p.get("n_samples", 100_000))
    gn = GNormal(cfg.sigma, scale=float(p.get("scale", 1.0)))
    records, rows = [], []
    for m in range(1, m_max + 1):
        b = moment_bounds_check(gn, m)
        records.append(
            check_record(f"moment-bounds-m{m}", b.value, moment_constant(m) * b.upper,
                         0.0, b.ok)
        )
        rows.append([m, b.lower, b.value, b.upper])
    exact = moment_upper(gn, 1)
    trace_sup = gn.scale * cfg.sigma.max_trace()
    records.append(
        check_record("second-moment-exact", exact, trace_sup, 1e-12,
                     abs(exact - trace_sup) <= 1e-12)
    )
    est = static_upper_report(gn, _norm_sq, n, cfg.seed)
    records.append(
        check_record("second-moment-mc", est.value, exact, 3.0 * est.stderr,
                     abs(est.value - exact) <= 3.0 * est.stderr,
                     n_paths=n, seed=cfg.seed)
    )
    series = {"moments": {"columns": ["m", "lower", "value", "upper"], "rows": rows}}
    artifacts = []
    if p.get("dump_samples"):
        dest = out_dir / "samples.csv"
        dump_samples_csv(dest, sample_gaussian(cfg.sigma.extremes[0], min(n, 10_000),
                                               cfg.seed))
        artifacts.append(dest.name)
    return records, series, artifacts


def _run_band(cfg, out_dir, threads):
    p = cfg.params
    count = int(p.get("n_directions", 4))
    n = int(p.get("n_samples", 50_000))
    gn = GNormal(cfg.sigma, scale=float(p.get("scale", 1.0)))
    dirs = _unit_directions(cfg.sigma.dim, count, split_seed(cfg.seed, 991))
    records, rows = [], []
    for i, h in enumerate(dirs):
        band = project_band(gn, h)
        est = static_upper_report(gn, lambda x, h=h: (x @ h) ** 2, n, cfg.seed)
        records.append(
            check_record(f"band-mc-up-{i}", est.value, band.sigma_up_sq,
                         3.0 * est.stderr,
                         abs(est.value - band.sigma_up_sq) <= 3.0 * est.stderr,
                         n_paths=n, seed=cfg.seed)
        )
        records.append(
            check_record(f"band-order-{i}", band.sigma_down_sq, band.sigma_up_sq,
                         0.0, band.sigma_down_sq <= band.sigma_up_sq)
        )
        rows.append([i, band.sigma_up_sq, band.sigma_down_sq, est.value, est.stderr])
    series = {
        "band": {"columns": ["direction", "up", "down", "mc_up", "stderr"],
                 "rows": rows}
    }
    return records, series, []


def _family(sigma):
    return PolicyFamily(bang_bang_stat=lambda s: s[:, 0], bang_bang_name="x1")


def _run_isometry(cfg, out_dir, threads):
    p = cfg.params
    T = float(p.get("T", 1.0))
    steps = int(p.get("steps", 8))
    n_paths = int(p.get("n_paths", 4000))
    trials = int(p.get("trials", 5))
    mode = p.get("mode", "adapted")
    part = np.linspace(0.0, T, steps + 1)
    rng = np.random.default_rng(split_seed(cfg.seed, 17))
    dim = cfg.sigma.dim
    records = []
    for trial in range(trials):
        if mode == "deterministic":
            blocks = [rng.standard_normal((dim, dim)) for _ in range(steps)]
            phi = ElementaryProcess.deterministic(part, blocks)
        else:
            c = rng.uniform(0.5, 2.0, size=2)

            def rule(t, states, c=c):
                scale = c[0] + c[1] * np.tanh(states[:, 0])
                return scale[:, None, None] * np.eye(dim)[None]

            phi = ElementaryProcess.adapted(part, rule, out_dim=dim, in_dim=dim)
        chk = ito_isometry_check(phi, cfg.sigma, _family(cfg.sigma), n_paths,
                                 split_seed(cfg.seed, trial))
        records.append(
            check_record(f"isometry-{mode}-{trial}", chk.lhs, chk.rhs,
                         3.0 * chk.stderr, chk.ok, n_paths=n_paths, seed=cfg.seed)
        )
    return records, {}, []


def _run_bdg(cfg, out_dir, threads):
    p = cfg.params
    T = float(p.get("T", 1.0))
    steps = int(p.get("steps", 4))
    n_paths = int(p.get("n_paths", 20_000))
    p_values = [int(v) for v in p.get("p_values", [1, 2, 4])]
    rng = np.random.default_rng(split_seed(cfg.seed, 29))
    dim = cfg.sigma.dim
    blocks = [rng.standard_normal((dim, dim)) for _ in range(steps)]
    phi = ElementaryProcess.deterministic(np.linspace(0.0, T, steps + 1), blocks)
    records = []
    for pv in p_values:
        chk = bdg_check(phi, cfg.sigma, pv, PolicyFamily(), n_paths,
                        split_seed(cfg.seed, pv))
        records.append(
            check_record(f"bdg-p{pv}", chk.lhs, chk.rhs, 3.0 * chk.stderr, chk.ok,
                         n_paths=n_paths, seed=cfg.seed)
        )
    return records, {}, []


def _run_sigma_integral(cfg, out_dir, threads):
    p = cfg.params
    a_diag = np.asarray(p.get("a_diag", [-0.5, -1.0]), dtype=float)
    T = float(p.get("T", 1.0))
    quad_steps = int(p.get("quad_steps", 2000))
    steps = int(p.get("steps", 32))
    n_paths = int(p.get("n_paths", 20_000))
    closed_tol = float(p.get("closed_tol", 1e-6))
    frob_tol = float(p.get("frobenius_tol", 0.05))
    if a_diag.size != cfg.sigma.dim:
        raise UsageError("a_diag length must equal the covariance-set dimension")

    phi_fn = lambda t: np.diag(np.exp((T - t) * a_diag))
    sigma_i = sigma_of_integral(phi_fn, cfg.sigma, T, quad_steps)
    # closed form per extreme: entry (i, j) integrates exp((T-t)(a_i + a_j))
    rates = a_diag[:, None] + a_diag[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.where(rates == 0.0, T, (np.exp(rates * T) - 1.0) / rates)
    records = []
    for i, q in enumerate(cfg.sigma.matrices):
        closed = q * factors
        scale = max(1.0, float(np.linalg.norm(closed)))
        diff = float(np.linalg.norm(sigma_i.matrices[i] - closed))
        records.append(
            check_record(f"closed-form-extreme-{i}", diff, 0.0, closed_tol * scale,
                         diff <= closed_tol * scale)
        )
    part = np.linspace(0.0, T, steps + 1)
    phi = ElementaryProcess.deterministic(part, [phi_fn(t) for t in part[:-1]])
    for i in range(len(cfg.sigma)):
        bundle = simulate_gbm(cfg.sigma, ControlPolicy.constant(i), n_paths, steps,
                              T, split_seed(cfg.seed, i))
        vals = integrate_elementary(phi, bundle).values
        emp = vals.T @ vals / n_paths
        diff = float(np.linalg.norm(emp - sigma_i.matrices[i]))
        records.append(
            check_record(f"empirical-extreme-{i}", diff, 0.0, frob_tol,
                         diff <= frob_tol, n_paths=n_paths, seed=cfg.seed)
        )
    rows = []
    prev = sigma_of_integral(phi_fn, cfg.sigma, T, 64)
    for m in (128, 256, 512):
        cur = sigma_of_integral(phi_fn, cfg.sigma, T, m)
        change = max(
            float(np.linalg.norm(a - b))
            for a, b in zip(cur.matrices, prev.matrices)
        )
        rows.append([m, change])
        prev = cur
    series = {"quad-convergence": {"columns": ["quad_steps", "change"], "rows": rows}}
    return records, series, []


def _run_fubini(cfg, out_dir, threads):
    p = cfg.params
    steps = int(p.get("steps", 6))
    weights = [float(w) for w in p.get("weights", [0.5, 0.5])]
    n_paths = int(p.get("n_paths", 50))
    dim = cfg.sigma.dim
    bundle = simulate_gbm(cfg.sigma, ControlPolicy.constant(0), n_paths, steps, 1.0,
                          cfg.seed)
    part = np.linspace(0.0, 1.0, steps + 1)
    rng = np.random.default_rng(split_seed(cfg.seed, 3))
    phis = [
        ElementaryProcess.deterministic(
            part, [rng.standard_normal((dim, dim)) for _ in range(steps)]
        )
        for _ in weights
    ]
    chk = fubini_check(phis, weights, bundle)
    records = [
        check_record("fubini-interchange", chk.diff_norm, 0.0, 1e-10, chk.ok,
                     n_paths=n_paths, seed=cfg.seed)
    ]
    return records, {}, []


_TERMINALS = {
    "square": (lambda p: p[..., 0] ** 2, lambda x: x**2),
    "neg_square": (lambda p: -(p[..., 0] ** 2), lambda x: -(x**2)),
    "abs": (lambda p: np.abs(p[..., 0]), np.abs),
    "cos": (lambda p: np.cos(p[..., 0]), np.cos),
}


def _run_gheat(cfg, out_dir, threads):
    p = cfg.params
    if cfg.sigma.dim != 1:
        raise UsageError("gheat experiment is one-dimensional")
    terminal = p.get("terminal", "square")
    if terminal not in _TERMINALS:
        raise UsageError(f"unknown terminal {terminal!r}")
    f_grid, f_line = _TERMINALS[terminal]
    T = float(p.get("T", 0.5))
    x0 = float(p.get("x0", 0.3))
    box = tuple(p.get("box", [-3.0, 3.0]))
    nodes = int(p.get("nodes", 121))
    lattice_steps = int(p.get("lattice_steps", 600))
    steps = int(p.get("steps", 16))
    n_paths = int(p.get("n_paths", 20_000))

    prob = PdeProblem(1, cfg.sigma, f_grid, T, (box,))
    sol = solve_gheat(prob, MeshSpec(nodes=nodes))
    h = sol.axes[0][1] - sol.axes[0][0]
    disc = 2.0 * (h**2 + sol.dt)
    band = project_band(GNormal(cfg.sigma), [1.0])
    lat = lattice_1d(band, f_line, x0, T, lattice_steps)
    pde = sol.value_at(0.0, [x0])
    est = estimate_upper_expectation(
        cfg.sigma, lambda x: f_line(x[:, 0]), x0, T, steps, n_paths,
        _family(cfg.sigma), cfg.seed, threads=threads,
    )
    lat_tol = 6.0 / lattice_steps
    records = [
        check_record("pde-vs-lattice", pde, lat, disc + lat_tol,
                     abs(pde - lat) <= disc + lat_tol),
        check_record("pde-vs-mc", pde, est.value, 3.0 * est.stderr + disc,
                     abs(pde - est.value) <= 3.0 * est.stderr + disc,
                     n_paths=n_paths, seed=cfg.seed),
        check_record("lattice-vs-mc", lat, est.value, 3.0 * est.stderr + lat_tol,
                     abs(lat - est.value) <= 3.0 * est.stderr + lat_tol,
                     n_paths=n_paths, seed=cfg.seed),
    ]
    if terminal == "square":
        want = x0**2 + band.sigma_up_sq * T
        records.append(
            check_record("closed-form", pde, want, disc, abs(pde - want) <= disc)
        )
    dest = out_dir / "gheat_slice.csv"
    write_slice_csv(sol, 0.0, dest)
    rows = [[float(x), float(u)] for x, u in zip(sol.axes[0], sol.values[0])]
    sweep = []
    for pol in _family(cfg.sigma).build(len(cfg.sigma)):
        single = estimate_upper_expectation(
            cfg.sigma, lambda x: f_line(x[:, 0]), x0, T, steps, n_paths,
            [pol], cfg.seed, threads=threads,
        )
        sweep.append([pol.describe(), single.value, single.stderr])
    series = {
        "profile": {"columns": ["x", "u0"], "rows": rows},
        "policy-sweep": {"columns": ["policy", "value", "stderr"], "rows": sweep},
    }
    return records, series, [dest.name]


def _run_gpde(cfg, out_dir, threads):
    p = cfg.params
    if cfg.sigma.dim != 2:
        raise UsageError("gpde experiment is two-dimensional")
    a_diag = np.asarray(p.get("a_diag", [-1.0, -2.0]), dtype=float)
    quad = np.asarray(p.get("quad_coeffs", [0.5, 0.3]), dtype=float)
    T = float(p.get("T", 0.5))
    box = tuple(p.get("box", [-2.4, 2.4]))
    nodes = int(p.get("nodes", 49))
    steps = int(p.get("steps", 64))
    n_paths = int(p.get("n_paths", 20_000))
    n_probes = int(p.get("n_probes", 10))
    c_disc = float(p.get("c_disc", 10.0))

    f = lambda pts: quad[0] * pts[..., 0] ** 2 + quad[1] * pts[..., 1] ** 2
    prob = PdeProblem(2, cfg.sigma, f, T, (box, box), a_gen=np.diag(a_diag))
    sol = solve_gpde(prob, MeshSpec(nodes=nodes))
    h = sol.axes[0][1] - sol.axes[0][0]
    probes = _unit_directions(2, n_probes, split_seed(cfg.seed, 5)) * (
        0.5 * (box[1] - box[0]) * 0.25
    )
    spec = McControlSpec(steps=steps, n_paths=n_paths, seed=cfg.seed)
    records, rows = [], []
    for i, probe in enumerate(probes):
        mc = mc_value(prob, probe, 0.0, spec)
        pde = sol.value_at(0.0, probe)
        tol = 3.0 * mc.stderr + c_disc * (h**2 + sol.dt)
        records.append(
            check_record(f"probe-{i}", pde, mc.value, tol,
                         abs(pde - mc.value) <= tol, n_paths=n_paths, seed=cfg.seed)
        )
        rows.append([i, float(probe[0]), float(probe[1]), pde, mc.value, mc.stderr])

    lam = float(p.get("scalar_lambda", 0.8))
    band1 = CovarianceSet([[[1.0]], [[0.25]]], label="unit-band")
    prob1 = PdeProblem(1, band1, lambda q: q[..., 0] ** 2, T, ((-3.0, 3.0),),
                       a_gen=np.array([[-lam]]))
    sol1 = solve_gpde(prob1, MeshSpec(nodes=int(p.get("scalar_nodes", 241))))
    want = math.exp(-2 * lam * T) * 0.25 + (1 - math.exp(-2 * lam * T)) / (2 * lam)
    got = sol1.value_at(0.0, [0.5])
    h1 = sol1.axes[0][1] - sol1.axes[0][0]
    tol1 = c_disc * (h1**2 + sol1.dt) + 2.0 * h1
    records.append(
        check_record("scalar-ou-closed-form", got, want, tol1,
                     abs(got - want) <= tol1)
    )
    dest = out_dir / "gpde_slice.csv"
    write_slice_csv(sol, 0.0, dest)
    series = {"probes": {"columns": ["probe", "x1", "x2", "pde", "mc", "stderr"],
                         "rows": rows}}
    return records, series, [dest.name]


def _run_ou(cfg, out_dir, threads):
    p = cfg.params
    a_diag = np.asarray(p.get("a_diag", [-1.0] * cfg.sigma.dim), dtype=float)
    if a_diag.size != cfg.sigma.dim:
        raise UsageError("a_diag length must equal the covariance-set dimension")
    T = float(p.get("T", 1.0))
    steps = int(p.get("steps", 200))
    n_paths = int(p.get("n_paths", 20_000))
    substeps = int(p.get("substeps", 10))
    beta = float(p.get("beta", 0.5))
    a_mat = np.diag(a_diag)

    bundle = simulate_gbm(cfg.sigma, ControlPolicy.constant(0), n_paths, steps, T,
                          cfg.seed)
    conv = convolution_path(a_mat, bundle, substeps=substeps)
    dt = T / steps
    q0 = np.diag(cfg.sigma.matrices[0])
    records, rows = [], []
    for idx in range(1, conv.shape[1]):
        k = idx * substeps
        t = bundle.times[k]
        # exact covariance of the discrete left-point recursion
        m = np.arange(1, k + 1)
        exact = np.array(
            [q0[d] * dt * np.sum(np.exp(2.0 * a_diag[d] * m * dt))
             for d in range(cfg.sigma.dim)]
        )
        emp = np.var(conv[:, idx, :], axis=0)
        se = exact * math.sqrt(2.0 / n_paths)
        ok = bool(np.all(np.abs(emp - exact) <= 3.0 * se + 1e-12))
        records.append(
            check_record(f"variance-t{t:.3g}", float(emp[0]), float(exact[0]),
                         float(3.0 * se[0]), ok, n_paths=n_paths, seed=cfg.seed)
        )
        rows.append([float(t)] + [float(v) for v in emp] + [float(v) for v in exact])

    mild = ou_mild_path(a_mat, cfg.sigma, ControlPolicy.constant(0),
                        np.ones(cfg.sigma.dim), 0.0, T, steps, min(n_paths, 500),
                        split_seed(cfg.seed, 2))
    gap = flow_property_discrepancy(mild, a_mat, steps // 3)
    records.append(check_record("flow-property", gap, 0.0, 1e-10, gap <= 1e-10))

    cond = convolution_condition(a_mat, cfg.sigma, beta, T,
                                 int(p.get("quad_steps", 2000)))
    records.append(
        check_record("convolution-condition", cond.value, 0.0, 0.0, cond.finite)
    )
    csv_dest = out_dir / "ou_paths.csv"
    meta_dest = out_dir / "ou_paths.json"
    export_paths(mild, csv_dest, meta_dest, max_paths=int(p.get("export_paths", 20)))
    cols = (["t"] + [f"emp{d}" for d in range(cfg.sigma.dim)]
            + [f"exact{d}" for d in range(cfg.sigma.dim)])
    series = {"variance": {"columns": cols, "rows": rows}}
    return records, series, [csv_dest.name, meta_dest.name]


def _run_nested(cfg, out_dir, threads):
    p = cfg.params
    form = p.get("form", "sum")
    T = float(p.get("T", 1.0))
    steps = int(p.get("steps", 8))
    n_paths = int(p.get("n_paths", 4000))
    inner = NestedSpec(T=T, steps=steps, n_paths=n_paths, seed=split_seed(cfg.seed, 1))
    outer = NestedSpec(T=T, steps=steps, n_paths=n_paths, seed=split_seed(cfg.seed, 2))
    band = project_band(GNormal(cfg.sigma, scale=T), [1.0] + [0.0] * (cfg.sigma.dim - 1))
    if form == "sum":
        f2 = lambda x, y: x[..., 0] ** 2 + 2.0 * y[..., 0] ** 2
        want = band.sigma_up_sq + 2.0 * band.sigma_up_sq
        margin = 3.0 * 3.0 * band.sigma_up_sq * math.sqrt(2.0 / n_paths)
    elif form == "product":
        f2 = lambda x, y: x[..., 0] * y[..., 0]
        want = 0.0  # four-term product formula with centered projections
        margin = 3.0 * band.sigma_up_sq / math.sqrt(n_paths)
    elif form == "constant":
        c = float(p.get("constant", 1.0))
        f2 = lambda x, y, c=c: np.broadcast_to(c, (x.shape[0], y.shape[1]))
        want, margin = c, 0.0
    else:
        raise UsageError(f"unknown nested form {form!r}")
    v = nested_expectation(cfg.sigma, f2, inner, outer)
    records = [
        check_record(f"nested-{form}", v, want, margin, abs(v - want) <= margin,
                     n_paths=n_paths, seed=cfg.seed)
    ]
    return records, {}, []


KINDS = {
    "moments": _run_moments,
    "band": _run_band,
    "isometry": _run_isometry,
    "bdg": _run_bdg,
    "sigma_integral": _run_sigma_integral,
    "fubini": _run_fubini,
    "gheat": _run_gheat,
    "gpde": _run_gpde,
    "ou": _run_ou,
    "nested": _run_nested,
}


def run(config_path, out_override=None, threads: int = 1) -> tuple[dict, Path]:
    """Execute the configured experiment; returns (report dict, report path)."""
    cfg = ExperimentConfig.load(config_path, out_override)
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    records, series, artifacts = KINDS[cfg.kind](cfg, out_dir, threads)
    elapsed = time.perf_counter() - t0
    report = {
        "config": cfg.echo(),
        "records": records,
        "ok": all(r["ok"] for r in records),
        "series": series,
        "artifacts": artifacts,
        "timings": {"total_s": elapsed},
    }
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report, report_path


def emit_plotdata(report: dict, series_name: str, out_dir) -> Path:
    """Flatten one recorded series to CSV; raises UsageError if unknown."""
    series = report.get("series", {})
    if series_name not in series:
        known = ", ".join(sorted(series)) or "(none)"
        raise UsageError(f"unknown series {series_name!r}; report has: {known}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dest = out_dir / f"{series_name}.csv"
    spec = series[series_name]
    with open(dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(spec["columns"])
        writer.writerows(spec["rows"])
    return dest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gexpect", description="Reproducible sublinear-expectation experiments."
    )
    sub = parser.add_subparsers(dest="command")
    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("config", help="path to the JSON experiment config")
    run_p.add_argument("--threads", type=int, default=1,
                       help="worker cap for policy optimization")
    run_p.add_argument("--out", default=None, help="output directory override")
    plot_p = sub.add_parser("plot", help="flatten a report series to CSV")
    plot_p.add_argument("report", help="path to a report.json")
    plot_p.add_argument("--series", required=True, help="series name to export")
    plot_p.add_argument("--out", default=".", help="output directory")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "run":
            report, report_path = run(args.config, args.out, threads=args.threads)
            status = "ok" if report["ok"] else "CHECK FAILED"
            print(f"{status}: {len(report['records'])} records -> {report_path}")
            return 0 if report["ok"] else 1
        report_path = Path(args.report)
        if not report_path.is_file():
            raise UsageError(f"report file not found: {report_path}")
        try:
            report = json.loads(report_path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed report JSON: {exc}") from exc
        dest = emit_plotdata(report, args.series, args.out)
        print(f"wrote {dest}")
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
