"""Experiment drivers: exact propagation checked against the closed-form bounds.

Each driver returns an :class:`ExperimentResult` whose rows go to CSV. Rows
carry the full set of bound constants so every bound can be recomputed offline.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from . import algebra, bounds
from .algebra import Op
from .bounds import BoundParams, PreconditionError
from .config import ExperimentConfig, apply_overrides, build_config, config_hash, to_dict
from .lattice import chain, distance, extension, fit_growth_constants, grid, volume
from .liouvillian import LiouvillianSpec, TimeProfile, dense_generator, term_norm
from .presets import PRESETS
from .propagator import SolverConfig, heisenberg_trajectory, local_propagator, state_trajectory
from .trotter import build_circuit, circuit_to_text, light_cone_schedule, measure_error

CONSTANT_COLUMNS = ["a", "Z", "ell_norm", "v", "M", "kappa"]


class ScaleError(PreconditionError):
    """Exact propagation requested beyond the configured qubit limit."""


@dataclass
class ExperimentResult:
    kind: str
    columns: list
    rows: list
    constants: dict = field(default_factory=dict)
    solver_error: float = 0.0
    violations: int = 0
    precondition_failures: int = 0
    summary: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)  # file name -> text

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.precondition_failures == 0


# --- model construction ------------------------------------------------------

def build_profile(pc) -> TimeProfile:
    return TimeProfile(pc.kind, value=pc.value, breakpoints=tuple(pc.breakpoints), values=tuple(pc.values),
                       before=pc.before, after=pc.after, at=pc.at, offset=pc.offset,
                       amplitude=pc.amplitude, omega=pc.omega, phase=pc.phase)


def build_spec(cfg: ExperimentConfig) -> LiouvillianSpec:
    m = cfg.model
    if m.preset not in PRESETS:
        raise ValueError(f"unknown preset {m.preset!r}; available: {sorted(PRESETS)}")
    geom = chain(m.size[0]) if m.lattice == "chain" else grid(m.size, m.metric)
    kwargs = dict(m.params)
    if m.preset != "commuting_zz":
        kwargs["coupling_profile"] = build_profile(m.coupling_profile)
    elif m.coupling_profile.kind != "constant" or m.coupling_profile.value != 1.0:
        raise ValueError("commuting_zz takes no coupling profile")
    return PRESETS[m.preset](geom, **kwargs)


def _site(spec, s):
    s = tuple(s) if isinstance(s, list) else s
    if s not in spec.sites:
        raise ValueError(f"site {s!r} is not in the lattice")
    return s


def product_op(spec: LiouvillianSpec, label: str, sites) -> Op:
    return algebra.local_op(label, [_site(spec, s) for s in sites])


def solver_from(cfg: ExperimentConfig) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(step=s.step, tol=s.tol, halving=s.halving, max_halvings=s.max_halvings,
                        step_rule=s.step_rule, max_sites=cfg.limits.max_qubits)


def guard(n_sites: int, cfg: ExperimentConfig, what: str):
    if n_sites > cfg.limits.max_qubits:
        raise ScaleError(f"{what} needs {n_sites} qubits, above the limit of {cfg.limits.max_qubits} "
                         f"(raise limits.max_qubits to override)")


def model_constants(spec: LiouvillianSpec, cfg: ExperimentConfig, window: tuple) -> BoundParams:
    """``a``, ``Z``, ``||l||`` (sup over ``window``), ``M`` and ``kappa`` for the model."""
    c = cfg.constants
    cache = {}
    ell = 0.0
    for term in spec.terms:
        key = (term.hamiltonian.tobytes(), tuple(L.tobytes() for L in term.lindblads), len(term.support))
        if key not in cache:
            cache[key] = term_norm(term.__class__(tuple(range(len(term.support))), term.hamiltonian,
                                                  term.lindblads, TimeProfile.constant(1.0)),
                                   restarts=c.norm_restarts, seed=0)
        ell = max(ell, cache[key] * term.profile.sup_abs(window[0], window[1], c.norm_grid))
    M = c.M if c.M is not None else fit_growth_constants(spec.geometry, spec.hypergraph, c.kappa)
    return BoundParams(spec.a(), spec.Z(), ell, M, c.kappa)


def _constants_row(p: BoundParams) -> dict:
    return {"a": p.a, "Z": p.Z_max, "ell_norm": p.ell_norm, "v": p.v, "M": p.M, "kappa": p.kappa}


def commutator_norm(A: Op) -> float:
    """Induced norm of ``O -> i[A, O]`` on operators of any extension.

    For Hermitian ``A`` this is the spread of its spectrum; otherwise ``2||A||``
    is used, which is an upper bound.
    """
    m = A.matrix
    if np.allclose(m, m.conj().T, atol=1e-14, rtol=0):
        ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        return float(ev[-1] - ev[0])
    return 2 * algebra.inf_norm(m)


def _durations(cfg):
    t = cfg.times.final
    durs = [float(d) for d in cfg.times.durations]
    return t, durs, [t - d for d in durs]


# --- Lieb-Robinson -----------------------------------------------------------

LR_COLUMNS = ["x_sites", "d_XY", "r", "t", "duration", "measured", "bound", "ratio", "solver_error",
              "status"] + CONSTANT_COLUMNS


def run_lr(cfg: ExperimentConfig) -> ExperimentResult:
    spec = build_spec(cfg)
    guard(len(spec.sites), cfg, "Lieb-Robinson reference evolution")
    t, durs, s_values = _durations(cfg)
    p = model_constants(spec, cfg, (min(s_values, default=t), t))
    OY = product_op(spec, cfg.observable.label, cfg.observable.sites)
    traj = heisenberg_trajectory(spec, spec.sites, OY, t, s_values, solver_from(cfg))
    hg = spec.hypergraph
    volY = volume(hg, extension(hg, OY.sites))
    rows, violations = [], 0
    for x in cfg.probe.sites:
        OX = product_op(spec, cfg.probe.label, [x])
        normK = commutator_norm(OX)
        volX = volume(hg, extension(hg, OX.sites))
        d = distance(spec.geometry, OX.sites, OY.sites)
        for dur, s in zip(durs, s_values):
            A, B = algebra.align(OX, traj.ops[s])
            measured = algebra.inf_norm(1j * (A.matrix @ B.matrix - B.matrix @ A.matrix))
            bound = bounds.lr_bound(p, volX, volY, d, s, t, normK, algebra.inf_norm(OY.matrix))
            ok = measured <= bound + cfg.limits.slack
            violations += not ok
            rows.append({"x_sites": json.dumps(list(OX.region)), "d_XY": d, "r": s, "t": t, "duration": dur,
                         "measured": measured, "bound": bound, "ratio": measured / bound if bound else math.nan,
                         "solver_error": traj.error, "status": "ok" if ok else "violation", **_constants_row(p)})
    return ExperimentResult("lr", LR_COLUMNS, rows, p.as_dict(), traj.error, violations,
                            summary={"max_ratio": max((r["ratio"] for r in rows), default=0.0)})


# --- quasi-locality ----------------------------------------------------------

QL_COLUMNS = ["radius", "region_size", "extended_size", "D", "r", "t", "duration", "measured", "bound",
              "ratio", "solver_error", "status"] + CONSTANT_COLUMNS


def strictly_decreasing(errors) -> bool:
    """Each error below the previous one; a zero error may only be followed by zeros."""
    for a, b in zip(errors, errors[1:]):
        if a == 0.0:
            if b != 0.0:
                return False
        elif not b < a:
            return False
    return True


def run_quasilocal(cfg: ExperimentConfig) -> ExperimentResult:
    spec = build_spec(cfg)
    guard(len(spec.sites), cfg, "quasi-locality reference evolution")
    t, durs, s_values = _durations(cfg)
    p = model_constants(spec, cfg, (min(s_values, default=t), t))
    solver = solver_from(cfg)
    OY = product_op(spec, cfg.observable.label, cfg.observable.sites)
    normO = algebra.inf_norm(OY.matrix)
    full = heisenberg_trajectory(spec, spec.sites, OY, t, s_values, solver)
    budget = full.error
    rows, violations, failures = [], 0, 0
    per_duration = {dur: [] for dur in durs}
    for radius in sorted(cfg.quasilocal.radii):
        V = spec.geometry.ball(OY.sites, radius) | OY.sites
        Vb = spec.extension(V) | V
        rest = spec.sites - V
        D = math.ceil(distance(spec.geometry, OY.sites, rest) / p.a - 1e-12) if rest else None
        sub = heisenberg_trajectory(spec, Vb, OY, t, s_values, solver)
        budget = max(budget, sub.error)
        for dur, s in zip(durs, s_values):
            A, B = algebra.align(full.ops[s], sub.ops[s])
            measured = algebra.inf_norm(A.matrix - B.matrix)
            per_duration[dur].append(measured)
            if D is None:
                bound, status = 0.0, "saturated"
            else:
                try:
                    bound = bounds.quasi_locality_bound(p, D, s, t, normO)
                    status = "ok"
                except PreconditionError:
                    bound, status = None, "precondition"
                    failures += 1
            if bound is not None and measured > bound + cfg.limits.slack:
                status = "violation"
                violations += 1
            rows.append({"radius": radius, "region_size": len(V), "extended_size": len(Vb), "D": D,
                         "r": s, "t": t, "duration": dur, "measured": measured, "bound": bound,
                         "ratio": (measured / bound) if bound else None,
                         "solver_error": max(full.error, sub.error), "status": status, **_constants_row(p)})
    summary = {"strictly_decreasing": {repr(d): strictly_decreasing(e) for d, e in per_duration.items()}}
    return ExperimentResult("quasilocal", QL_COLUMNS, rows, p.as_dict(), budget, violations, failures, summary)


# --- Trotter -----------------------------------------------------------------

TROTTER_COLUMNS = ["dt", "N", "observed_sup", "bound", "truncation_part", "trotter_part",
                   "comparator_truncation", "ratio", "ratio_to_previous", "comparator_size", "solver_error",
                   "status"] + CONSTANT_COLUMNS


def run_trotter(cfg: ExperimentConfig) -> ExperimentResult:
    spec = build_spec(cfg)
    tc = cfg.trotter
    solver = solver_from(cfg)
    p = model_constants(spec, cfg, (0.0, tc.t_total))
    Y = frozenset(_site(spec, s) for s in cfg.observable.sites)
    rows, artifacts, comparators = [], {}, {}
    violations = failures = 0
    budget = 0.0
    prev = None
    for idx, dt in enumerate(tc.dt):
        sched = light_cone_schedule(spec, Y, tc.t_total, dt, tc.D0, p.v)
        circuit = build_circuit(spec, sched, tc.ordering, tc.averaged, cfg.seed)
        artifacts[f"circuit_{idx:02d}.tsv"] = circuit_to_text(circuit)
        VbN = spec.extension(sched.regions[-1]) | Y
        guard(len(VbN | circuit.sites), cfg, "Trotter comparator")
        D = sched.cone_distances(spec, Y)
        row = {"dt": dt, "N": sched.N, "comparator_size": len(VbN), **_constants_row(p)}
        try:
            parts = bounds.trotter_bound_parts(p, sched.times, D, sched.volumes(spec))
            comp_trunc = 0.0
            if not sched.saturated(spec)[-1]:
                comp_trunc = bounds.quasi_locality_bound(p, D[-1], sched.times[0], sched.times[-1], 1.0)
        except PreconditionError as exc:
            failures += 1
            rows.append(row | {"status": f"precondition: {exc}"})
            continue
        m = measure_error(spec, sched, circuit, Y, tc.sample_count, cfg.seed, solver,
                          comparators.setdefault(VbN, {}))
        budget = max(budget, m.solver_error)
        ok = m.observed_sup <= parts.total + comp_trunc + cfg.limits.slack
        violations += not ok
        row |= {"observed_sup": m.observed_sup, "bound": parts.total, "truncation_part": parts.truncation_total,
                "trotter_part": parts.trotter_total, "comparator_truncation": comp_trunc,
                "ratio": m.observed_sup / parts.total if parts.total else None,
                "ratio_to_previous": (m.observed_sup / prev) if prev else None,
                "solver_error": m.solver_error, "status": "ok" if ok else "violation"}
        rows.append(row)
        prev = m.observed_sup
    summary = {"scaling": trotter_scaling(rows, tc.scaling_window)}
    return ExperimentResult("trotter", TROTTER_COLUMNS, rows, p.as_dict(), budget, violations, failures,
                            summary, artifacts)


def trotter_scaling(rows, window) -> dict:
    """dt-halving ratios over rows where the splitting part dominates the bound."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if "observed_sup" not in a or "observed_sup" not in b or not a["observed_sup"]:
            continue
        if not math.isclose(b["dt"], a["dt"] / 2):
            continue
        dominated = all(r["truncation_part"] + r["comparator_truncation"] <= 0.1 * r["trotter_part"]
                        for r in (a, b))
        ratio = b["observed_sup"] / a["observed_sup"]
        out.append({"dt": b["dt"], "ratio": ratio, "trotter_dominated": dominated,
                    "in_window": window[0] <= ratio <= window[1]})
    return {"ratios": out, "all_in_window": all(r["in_window"] for r in out if r["trotter_dominated"])}


# --- self-test ---------------------------------------------------------------

SELFTEST_COLUMNS = ["check", "case", "value", "reference", "margin", "passed"]


def _random_cpt(rng, D, n_kraus):
    G = rng.normal(size=(D * n_kraus, D)) + 1j * rng.normal(size=(D * n_kraus, D))
    Q, _ = np.linalg.qr(G)
    return [Q[k * D:(k + 1) * D] for k in range(n_kraus)]


def run_selftest(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []

    def add(check, case, value, reference, passed, margin=None):
        rows.append({"check": check, "case": case, "value": value, "reference": reference,
                     "margin": reference - value if margin is None else margin, "passed": bool(passed)})

    for i in range(51):
        x = round(0.1 * i, 10)
        for N in range(31):
            exact, bnd = bounds.partial_exp_sum(x, N)
            add("partial_exp_sum", f"x={x!r} N={N}", exact, bnd, exact <= bnd)
    for kappa in (0.0, 0.5, 1.0, 2.0):
        for D in range(1, 41):
            if not bounds.tail_lemma_valid(kappa, D):
                continue
            exact, bnd = bounds.exp_tail_sum(kappa, D)
            add("exp_tail_sum", f"kappa={kappa!r} D={D}", exact, bnd, exact <= bnd)
    rng = np.random.default_rng(cfg.seed)
    for k in range(cfg.selftest.duality_cases):
        T = algebra.SuperOp((0,), rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        lhs = algebra.inf_inf_norm(T, mode="estimate", restarts=16, seed=k).value
        rhs = algebra.one_to_one_norm(algebra.adjoint(T), mode="exact-small").value
        add("norm_duality", f"case={k}", lhs, rhs, abs(lhs - rhs) <= 1e-6, 1e-6 - abs(lhs - rhs))
    for k in range(cfg.selftest.cpt_cases):
        D = 2 if k % 2 == 0 else 4
        region = (0,) if D == 2 else (0, 1)
        T = algebra.kraus_superop(_random_cpt(rng, D, 1 + k % 3), region)
        val = algebra.one_to_one_norm(T, restarts=8, seed=k).value
        add("cpt_unit_norm", f"case={k} dim={D}", val, 1.0, abs(val - 1) <= 1e-6, 1e-6 - abs(val - 1))
        rep = algebra.cpt_check(T)
        add("cpt_choi", f"random case={k} dim={D}", rep.min_eigenvalue, -1e-9, rep.ok, rep.min_eigenvalue + 1e-9)
    spec = build_spec(cfg) if len(cfg.model.size) == 1 and cfg.model.size[0] <= 4 else None
    if spec is None:
        from .presets import dissipative_ising
        spec = dissipative_ising(2)
    for term in spec.terms[:4]:
        tau = local_propagator(term, 0.0, 0.3, method="expm")
        rep = algebra.cpt_check(algebra.adjoint(tau))
        add("cpt_choi", f"channel {term.name} {list(term.support)}", rep.min_eigenvalue, -1e-9, rep.ok,
            rep.min_eigenvalue + 1e-9)
    region = tuple(sorted(spec.sites))[:2]
    gen = dense_generator(spec, region, 0.0, region)
    rep = algebra.cpt_check(algebra.adjoint(algebra.SuperOp(region, expm(0.5 * gen.matrix))))
    add("cpt_choi", f"two-site evolution {list(region)}", rep.min_eigenvalue, -1e-9, rep.ok, rep.min_eigenvalue + 1e-9)
    failed = sum(not r["passed"] for r in rows)
    worst = {}
    for r in rows:
        worst[r["check"]] = min(worst.get(r["check"], math.inf), r["margin"])
    return ExperimentResult("selftest", SELFTEST_COLUMNS, rows, {}, 0.0, failed,
                            summary={"checks": len(rows), "failed": failed, "worst_margin": worst})


# --- plain simulation --------------------------------------------------------

SIMULATE_COLUMNS = ["t", "observable", "expectation", "trace", "min_eigenvalue", "solver_error", "status"]

_KETS = {"0": np.array([1, 0]), "1": np.array([0, 1]),
         "+": np.array([1, 1]) / np.sqrt(2), "-": np.array([1, -1]) / np.sqrt(2)}


def initial_state(spec: LiouvillianSpec, name: str) -> Op:
    sites = tuple(sorted(spec.sites))
    pattern = {"excited": "0", "ground": "1", "plus": "+"}.get(name)
    chars = pattern * len(sites) if pattern else name
    if len(chars) != len(sites) or set(chars) - set(_KETS):
        raise ValueError(f"initial state {name!r}: use excited, ground, plus or one of 0 1 + - per site")
    psi = np.array([1.0 + 0j])
    for c in chars:
        psi = np.kron(psi, _KETS[c])
    return Op(sites, np.outer(psi, psi.conj()))


def parse_observable(spec, text: str) -> Op:
    label, _, sites = text.partition("@")
    return product_op(spec, label, [int(s) if s.strip().lstrip("-").isdigit() else s for s in sites.split(",")])


def run_simulate(cfg: ExperimentConfig) -> ExperimentResult:
    spec = build_spec(cfg)
    guard(len(spec.sites), cfg, "state evolution")
    sc = cfg.simulate
    rho = initial_state(spec, sc.initial_state)
    times = sorted(float(t) for t in sc.times)
    traj = state_trajectory(spec, spec.sites, rho, times[0], times, solver_from(cfg))
    obs = [(text, parse_observable(spec, text)) for text in sc.observables]
    rows, bad = [], 0
    for t in times:
        r = traj.ops[t].matrix
        tr = float(np.trace(r).real)
        lam = float(np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T))))
        ok = abs(tr - 1) <= 1e-9 and lam >= -1e-9
        bad += not ok
        for text, O in obs:
            val = float(np.trace(r @ algebra.embed(O, traj.ops[t].region).matrix).real)
            rows.append({"t": t, "observable": text, "expectation": val, "trace": tr, "min_eigenvalue": lam,
                         "solver_error": traj.error, "status": "ok" if ok else "invalid state"})
    return ExperimentResult("simulate", SIMULATE_COLUMNS, rows, {}, traj.error, bad)


# --- dispatch, sweeps and output ---------------------------------------------

RUNNERS = {"simulate": run_simulate, "lr": run_lr, "quasilocal": run_quasilocal,
           "trotter": run_trotter, "selftest": run_selftest}


def run_experiment(cfg: ExperimentConfig, kind: str | None = None, jobs: int = 1) -> ExperimentResult:
    kind = kind or cfg.kind
    if kind is None:
        raise ValueError("experiment kind not given")
    if cfg.kind is not None and cfg.kind != kind:
        raise ValueError(f"config is for {cfg.kind!r}, not {kind!r}")
    if kind == "sweep":
        return run_sweep(cfg, to_dict(cfg), jobs)
    return RUNNERS[kind](cfg)


def _sweep_point(args):
    raw, experiment = args
    cfg = build_config(raw)
    try:
        return run_experiment(cfg, experiment)
    except PreconditionError as exc:
        return ExperimentResult(experiment, [], [], summary={"error": str(exc)}, precondition_failures=1)


def _strip_none(d):
    if isinstance(d, dict):
        return {k: _strip_none(v) for k, v in d.items() if v is not None}
    return d


def run_sweep(cfg: ExperimentConfig, raw: dict, jobs: int = 1) -> ExperimentResult:
    sw = cfg.sweep
    if not sw.values:
        raise ValueError("sweep.values is empty")
    base = _strip_none(raw)
    base.pop("kind", None)
    points = [(apply_overrides(base, [(sw.parameter, v)]), sw.experiment) for v in sw.values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, points))  # map keeps sweep order
    else:
        results = [_sweep_point(pt) for pt in points]
    columns = ["sweep_index", "sweep_value"] + (next((r.columns for r in results if r.columns), []))
    rows, per_point = [], []
    for i, (v, res) in enumerate(zip(sw.values, results)):
        rows.extend({"sweep_index": i, "sweep_value": json.dumps(v)} | r for r in res.rows)
        per_point.append({"index": i, "value": v, "constants": res.constants, "solver_error": res.solver_error,
                          "violations": res.violations, "precondition_failures": res.precondition_failures,
                          "summary": res.summary})
    return ExperimentResult("sweep", columns, rows, {}, max((r.solver_error for r in results), default=0.0),
                            sum(r.violations for r in results), sum(r.precondition_failures for r in results),
                            {"parameter": sw.parameter, "experiment": sw.experiment, "points": per_point})


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_cell(row.get(c)) for c in result.columns])
    return buf.getvalue()


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def sidecar(result: ExperimentResult, cfg: ExperimentConfig, elapsed: float | None = None) -> dict:
    return _json_safe({
        "kind": result.kind,
        "config_version": cfg.version,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "constants": result.constants,
        "solver_error_budget": result.solver_error,
        "solver_tolerance": cfg.solver.tol,
        "violations": result.violations,
        "precondition_failures": result.precondition_failures,
        "ok": result.ok,
        "summary": result.summary,
        "rows": len(result.rows),
        "elapsed_seconds": elapsed,
        "config": to_dict(cfg),
    })


def write_outputs(result: ExperimentResult, cfg: ExperimentConfig, out_dir, elapsed: float | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{result.kind}.csv"
    csv_path.write_bytes(to_csv(result).encode())
    (out / f"{result.kind}.json").write_text(json.dumps(sidecar(result, cfg, elapsed), indent=2, sort_keys=True) + "\n")
    for name, text in result.artifacts.items():
        (out / name).write_text(text)
    return csv_path


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    res = fn(*args, **kw)
    return res, time.perf_counter() - t0
