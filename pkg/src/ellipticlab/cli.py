"""Scenario runner and command-line interface.

Scenarios live in flat INI-style config files, one section per scenario:

    [scenario:abp_quadratic]
    kind = abp
    operator = pucci_plus
    lambda_F = 1.0
    n = 2
    npts = 65
    side = 2.0
    ball_d = 1.0
    boundary = quadratic_well:1.0
    f_constant = 4.0
    seed = 1

Every scenario writes NAME.json into the output directory (floats with 17
significant digits, written atomically), the runner writes a suite-level
summary.csv, and some kinds emit two-column CSV plot data.  Exit codes:
0 success, 1 scenario failure (a margin or verdict check failed), 2
config/parse error.  Fixed config + seed gives byte-identical reports.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import os
import sys

import numpy as np

from . import abp as abp_mod
from . import barrier as barrier_mod
from . import envelope as envelope_mod
from . import harnack as harnack_mod
from . import pucci as pucci_mod
from .solve import (
    ProblemSpec,
    cole_hopf,
    cole_hopf_profile,
    rescale,
    solve as run_solve,
)
from .core import (
    Ball,
    Cube,
    Grid,
    GridFunction,
    StructureParams,
    eigvals_sym,
    grid_function_from_callable,
    load_grid_function,
    lp_norm,
    save_grid_function,
    sup_inf_osc,
)

__all__ = ["main", "run_config", "dumps17"]


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Deterministic JSON with 17 significant digits
# ---------------------------------------------------------------------------

def _fmt_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def dumps17(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k, v in obj.items():
            items.append(f'{pad}  "{k}": {dumps17(v, indent + 1)}')
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {dumps17(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        import json as _json

        return _json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def write_atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def file_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# ---------------------------------------------------------------------------
# Analytic boundary/data profiles
# ---------------------------------------------------------------------------

def make_profile(spec, grid):
    """Named analytic profiles: 'name:arg1,arg2' or 'file:path'."""
    name, _, argstr = spec.partition(":")
    args = [a for a in argstr.split(",") if a] if argstr else []
    d = 0.5 * grid.side
    c = np.asarray(grid.center)

    def sample(fn):
        return grid_function_from_callable(grid, fn, name)

    if name == "file":
        return load_grid_function(argstr)
    if name == "constant":
        val = float(args[0])
        return sample(lambda X: np.full(len(X), val))
    if name == "affine":
        coefs = np.array([float(a) for a in args[: grid.n]])
        const = float(args[grid.n]) if len(args) > grid.n else 0.0
        return sample(lambda X: X @ coefs + const)
    if name == "quadratic_well":
        A = float(args[0]) if args else 1.0
        return sample(lambda X: -A * (d**2 - ((X - c) ** 2).sum(1)))
    if name == "cone":
        A = float(args[0]) if args else 1.0
        return sample(lambda X: A * (np.linalg.norm(X - c, axis=1) - d))
    if name == "radial_power":
        beta = float(args[0])
        sign = float(args[1]) if len(args) > 1 else 1.0
        return sample(lambda X: sign * np.linalg.norm(X - c, axis=1) ** beta)
    if name == "abs_sqrt":
        return sample(lambda X: np.sqrt(np.abs(X[:, 0] - c[0])))
    if name == "harmonic_exp":
        amp = float(args[0]) if args else 0.3
        base = float(args[1]) if len(args) > 1 else 2.0
        if grid.n == 1:
            return sample(lambda X: base + amp * (X[:, 0] - c[0]))
        return sample(lambda X: base + amp * np.exp(X[:, 0] - c[0]) * np.cos(X[:, 1] - c[1]))
    if name == "bilinear":
        base = float(args[0]) if args else 2.0
        amp = float(args[1]) if len(args) > 1 else 1.0
        if grid.n == 1:
            return sample(lambda X: base + amp * (X[:, 0] - c[0]))
        return sample(lambda X: base + amp * (X[:, 0] - c[0]) * (X[:, 1] - c[1]))
    if name == "sup_power":
        cc = float(args[0])
        e0 = float(args[1])
        floor = float(args[2]) if len(args) > 2 else 2.0 * grid.h
        return sample(
            lambda X: cc * np.maximum(np.max(np.abs(X - c), axis=1), floor) ** (-grid.n / e0)
        )
    if name == "chain_profile":
        mb = float(args[0])
        mu = float(args[1])
        def fn(X):
            s = np.maximum(np.max(np.abs(X - c), axis=1) / d, 1e-9)
            k = np.log(s**grid.n) / np.log(1.0 - mu)
            return mb**k
        return sample(fn)
    raise ConfigError(f"unknown profile {name!r} in key 'boundary'")


# ---------------------------------------------------------------------------
# Scenario plumbing
# ---------------------------------------------------------------------------

def _build_grid(cfg):
    n = int(cfg.get("n", 2))
    npts = int(cfg.get("npts", 65))
    side = float(cfg.get("side", 2.0))
    center = tuple(float(v) for v in cfg.get("center", "0").split(",")) if "center" in cfg else (0.0,) * n
    if len(center) == 1 and n > 1:
        center = center * n
    return Grid(center, side, npts)


def _build_domain(cfg, grid):
    if "ball_d" in cfg:
        return Ball(grid.center, float(cfg["ball_d"]))
    if "cube_side" in cfg:
        return Cube(grid.center, float(cfg["cube_side"]))
    return Cube(grid.center, grid.side)


def _build_operator(cfg, grid):
    op_cfg = dict(cfg)
    for scalar_key in ("f_constant", "sigma_constant"):
        if scalar_key in cfg:
            val = float(cfg[scalar_key])
            field = grid_function_from_callable(grid, lambda X, v=val: np.full(len(X), v))
            op_cfg[scalar_key.replace("_constant", "_field")] = field
    def load_field(ref):
        if isinstance(ref, GridFunction):
            return ref
        return load_grid_function(ref)
    if "operator" not in op_cfg:
        raise ConfigError("missing key 'operator'")
    try:
        return pucci_mod.operator_from_config(op_cfg, load_field)
    except ValueError as exc:
        raise ConfigError(f"key 'operator': {exc}") from exc


def _maybe_solve(cfg, grid, domain, op):
    boundary = make_profile(cfg.get("boundary", "constant:0"), grid)
    if cfg.get("analytic", "false").lower() == "true":
        return boundary, None
    prob = ProblemSpec(op, domain, boundary)
    res = run_solve(
        prob,
        tol_solve=float(cfg.get("tol_solve", 1e-9)),
        max_iter=int(cfg.get("max_iter", 60)),
        method=cfg.get("method", "policy"),
        damping=float(cfg.get("damping", 0.8)),
    )
    return res.u, res


# -- scenario kinds ---------------------------------------------------------

def _scenario_solve(name, cfg, outdir):
    grid = _build_grid(cfg)
    op = _build_operator(cfg, grid)
    domain = _build_domain(cfg, grid)
    u, res = _maybe_solve(cfg, grid, domain, op)
    if res is None:
        raise ConfigError("solve scenario needs analytic = false")
    payload = {"kind": "solve", "solve": res.to_dict()}
    failures = [] if res.converged else [f"{name}: solver did not converge"]
    if "exact_profile" in cfg:
        exact = make_profile(cfg["exact_profile"], grid)
        err = float(np.max(np.abs(u.values - exact.values)))
        payload["sup_error_vs_exact"] = err
        tol = float(cfg.get("error_tol", math.inf))
        if err > tol:
            failures.append(f"{name}: error {err:.3g} above tolerance {tol:.3g}")
    if cfg.get("save_solution", "false").lower() == "true":
        save_grid_function(os.path.join(outdir, f"{name}_solution.grid"), u)
    return payload, failures


def _scenario_abp(name, cfg, outdir):
    grid = _build_grid(cfg)
    op = _build_operator(cfg, grid)
    ball = Ball(grid.center, float(cfg.get("ball_d", 0.5 * grid.side)))
    u, res = _maybe_solve(cfg, grid, ball, op)
    report = abp_mod.abp_check(u, ball, op.params)
    margin_tol = float(cfg.get("margin_tol", 10.0 * grid.h))
    payload = {"kind": "abp", "abp": report.to_dict()}
    if res is not None:
        payload["solve"] = res.to_dict()
    failures = []
    if res is not None and not res.converged:
        failures.append(f"{name}: solver did not converge")
    if report.margin < -margin_tol:
        failures.append(f"{name}: margin {report.margin:.6g} below -{margin_tol:.3g}")
    with open(os.path.join(outdir, f"{name}_abp.csv"), "w") as fh:
        fh.write("lhs,m_partial,contact_integral,C_used,rhs,margin\n")
        fh.write(report.csv_row() + "\n")
    return payload, failures


def _scenario_barrier(name, cfg, outdir):
    n = int(cfg.get("n", 2))
    lam = float(cfg.get("lambda_F", 1.0))
    Lam = float(cfg.get("Lambda_F", lam))
    eps0 = float(cfg.get("eps0", 0.1))
    spec = barrier_mod.build_barrier(n, lam, Lam, eps0)
    reports = barrier_mod.verify_barrier(
        spec, n_samples=int(cfg.get("samples", 4000)), seed=int(cfg.get("seed", 11))
    )
    payload = {
        "kind": "barrier",
        "constants": {
            k: getattr(spec, k)
            for k in ("n", "lambda_F", "Lambda_F", "eps0", "alpha", "q_factor", "r", "R", "M1", "M2", "M_B", "C_B")
        },
        "reports": {k: r.to_dict() for k, r in reports.items()},
    }
    failures = [
        f"{name}: property {k} violated" for k, r in reports.items() if not r.passed
    ]
    return payload, failures


def _scenario_envelope(name, cfg, outdir):
    grid = _build_grid(cfg)
    u = make_profile(cfg.get("boundary", "cone:1.0"), grid)
    m_partial = float(cfg.get("m_partial", 0.0))
    env = envelope_mod.convex_envelope(u, m_partial)
    cov = envelope_mod.gradient_image(env, m_f=float(cfg.get("M_F", 0.0)), seed=int(cfg.get("seed", 7)))
    env.dump(outdir, prefix=name, witness_points=())
    payload = {
        "kind": "envelope",
        "m_partial": env.m_partial,
        "m_value": env.m_value,
        "sweeps": env.sweeps,
        "contact_count": int(env.contact_mask.sum()),
        "coverage": cov.to_dict(),
    }
    failures = []
    min_cov = float(cfg.get("min_coverage", 0.0))
    if cov.fraction < min_cov:
        failures.append(f"{name}: annulus coverage {cov.fraction:.3f} < {min_cov}")
    return payload, failures


def empirical_osc_constant(u, params, fallback=3.0):
    """Harnack constant for the oscillation recursion, estimated from the
    shifted nonnegative parts u - inf and sup - u (the functions the
    recursion is actually derived from)."""
    quotients = []
    full = Cube(u.grid.center, u.grid.side)
    sup, inf, _ = sup_inf_osc(u, full)
    for shifted in (u.with_values(u.values - inf), u.with_values(sup - u.values)):
        rep = harnack_mod.harnack_report(shifted, params)
        if not rep["infinite"]:
            quotients.append(rep["quotient"])
    C = max(quotients) if quotients else fallback
    return C if C > 1.0 else fallback


def _scenario_harnack(name, cfg, outdir):
    grid = _build_grid(cfg)
    op = _build_operator(cfg, grid)
    domain = _build_domain(cfg, grid)
    u, res = _maybe_solve(cfg, grid, domain, op)
    params = op.params
    verifiers = [v.strip() for v in cfg.get("verifiers", "harnack").split(",") if v.strip()]
    payload = {"kind": "harnack"}
    failures = []
    if res is not None:
        payload["solve"] = res.to_dict()
        if not res.converged:
            failures.append(f"{name}: solver did not converge")
    C_hyp = float(cfg["C_hypothesis"]) if "C_hypothesis" in cfg else None
    for v in verifiers:
        if v == "harnack":
            payload["harnack"] = harnack_mod.harnack_report(u, params, C_hypothesis=C_hyp)
        elif v == "weak":
            payload["weak"] = harnack_mod.weak_harnack_report(
                u, params, p0=float(cfg.get("p0", 0.5)), C_hypothesis=C_hyp
            )
        elif v == "localmax":
            payload["localmax"] = harnack_mod.local_max_report(
                u, params, p=float(cfg.get("p", 1.0)), C_hypothesis=C_hyp
            )
        elif v == "osc":
            C_emp = empirical_osc_constant(u, params)
            payload["osc"] = harnack_mod.osc_decay_check(u, C_emp, params, steps=int(cfg.get("osc_steps", 3)))
            if not payload["osc"]["passed"]:
                failures.append(f"{name}: oscillation decay step failed")
        elif v == "holder":
            alpha = float(cfg.get("alpha", 0.5))
            payload["holder"] = {
                "alpha": alpha,
                "seminorm": harnack_mod.holder_seminorm(u, alpha, seed=int(cfg.get("seed", 0))),
            }
        elif v == "decay":
            t_lo, t_hi, t_n = (float(cfg.get("t_lo", 1.0)), float(cfg.get("t_hi", 32.0)), int(cfg.get("t_n", 12)))
            fit = harnack_mod.level_set_decay(
                u, Cube(grid.center, grid.side), np.geomspace(t_lo, t_hi, t_n)
            )
            fit.to_csv(os.path.join(outdir, f"{name}_decay.csv"))
            payload["decay"] = fit.to_dict()
        else:
            raise ConfigError(f"unknown verifier {v!r} in key 'verifiers'")
        last = payload.get({"harnack": "harnack", "weak": "weak", "localmax": "localmax"}.get(v, ""), None)
        if isinstance(last, dict) and last.get("passed") is False:
            failures.append(f"{name}: verifier {v} exceeded C_hypothesis")
    return payload, failures


def _scenario_czd(name, cfg, outdir):
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    instances = int(cfg.get("instances", 200))
    results = []
    failures = []
    for i in range(instances):
        n = int(rng.integers(1, 4))
        cells = {1: 256, 2: 64, 3: 16}[n]
        delta = float(rng.uniform(0.15, 0.85))
        A, B = harnack_mod.czd_random_instance(rng, n, cells, delta)
        res = harnack_mod.czd(A, B, 1.0, delta)
        results.append(res.verdict)
        if res.verdict != "holds":
            failures.append(f"{name}: instance {i} verdict {res.verdict}")
    payload = {
        "kind": "czd",
        "instances": instances,
        "verdict_counts": {v: results.count(v) for v in sorted(set(results))},
    }
    return payload, failures


def _scenario_calculus(name, cfg, outdir):
    """Transform calculus battery: change-of-unknown ODE + sandwich, and the
    window-rescaling norm identities."""
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    lam = float(cfg.get("lambda_F", 1.0))
    s2 = float(cfg.get("sigma2", 1.0))
    failures = []
    t = np.linspace(0.0, 0.9 * lam / s2, 1000)
    h, h1, h2 = cole_hopf_profile(t, lam, s2)
    ode_residual = float(np.max(np.abs(lam * h2 - s2 * h1**2)))
    if ode_residual > 1e-10:
        failures.append(f"{name}: transform ODE residual {ode_residual:.2e}")
    g = Grid((0.0, 0.0), 1.0, 33)
    sandwich_ok = True
    for _ in range(10):
        vals = np.abs(rng.standard_normal(g.shape))
        u = GridFunction(g, vals)
        v = cole_hopf(u, lam, s2)
        M = float(np.max(vals))
        lower = (1.0 - math.exp(-s2 * M / lam)) / (s2 * M / lam) * vals
        sandwich_ok &= bool(np.all(v.values <= vals + 1e-12) and np.all(v.values >= lower - 1e-12))
    if not sandwich_ok:
        failures.append(f"{name}: transform sandwich violated")
    # constant-field rescaling identities (exact)
    cval, t0, M0, q = 0.7, 0.5, 2.0, 3.0
    gg = Grid((0.0, 0.0), 2.0, 65)
    sig = grid_function_from_callable(gg, lambda X: np.full(len(X), cval))
    par = StructureParams(1.0, 1.0, M_F=0.3, gamma_F=0.2, sigma_field=sig, f_field=sig)
    u0 = grid_function_from_callable(gg, lambda X: X[:, 0])
    R0 = gg.side / t0 / 2.0
    u_s, par_s = rescale_checked = rescale(u0, par, (0.0, 0.0), t0, M0, R0)
    lhs_f = lp_norm(par_s.f_field, gg.n, Cube((0.0, 0.0), R0))
    rhs_f = (t0 / M0) * lp_norm(par.f_field, gg.n, Cube((0.0, 0.0), t0 * R0))
    lhs_s = lp_norm(par_s.sigma_field, q, Cube((0.0, 0.0), R0))
    rhs_s = t0 ** (1 - gg.n / q) * lp_norm(par.sigma_field, q, Cube((0.0, 0.0), t0 * R0))
    if abs(lhs_f - rhs_f) > 1e-12 * max(1.0, rhs_f):
        failures.append(f"{name}: forcing norm identity off by {lhs_f - rhs_f:.2e}")
    if abs(lhs_s - rhs_s) > 1e-12 * max(1.0, rhs_s):
        failures.append(f"{name}: sigma norm identity off by {lhs_s - rhs_s:.2e}")
    payload = {
        "kind": "calculus",
        "ode_residual": ode_residual,
        "sandwich_ok": sandwich_ok,
        "f_norm_identity": [lhs_f, rhs_f],
        "sigma_norm_identity": [lhs_s, rhs_s],
    }
    return payload, failures


def _scenario_pucci(name, cfg, outdir):
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    count = int(cfg.get("samples", 10000))
    worst = {"duality": 0.0, "subadditivity": 0.0, "homogeneity": 0.0, "monotone": 0.0}
    lam, Lam = 1.0, 2.5
    for _ in range(count):
        n = int(rng.integers(1, 4))
        A = rng.standard_normal((n, n))
        A = A + A.T
        B = rng.standard_normal((n, n))
        B = B + B.T
        pA = pucci_mod.pucci_plus(A, lam, Lam)
        worst["duality"] = max(worst["duality"], abs(pucci_mod.pucci_minus(A, lam, Lam) + pucci_mod.pucci_plus(-A, lam, Lam)))
        worst["subadditivity"] = max(worst["subadditivity"], pucci_mod.pucci_plus(A + B, lam, Lam) - pA - pucci_mod.pucci_plus(B, lam, Lam))
        t = float(rng.uniform(0, 3))
        worst["homogeneity"] = max(worst["homogeneity"], abs(pucci_mod.pucci_plus(t * A, lam, Lam) - t * pA))
        P = rng.standard_normal((n, n))
        P = P @ P.T
        worst["monotone"] = max(worst["monotone"], pucci_mod.pucci_plus(A + P, lam, Lam) - pA)
    failures = [f"{name}: {k} worst {v:.2e}" for k, v in worst.items() if v > 1e-12]
    payload = {"kind": "pucci", "samples": count, "worst": worst}
    return payload, failures


_SCENARIO_KINDS = {
    "solve": _scenario_solve,
    "abp": _scenario_abp,
    "barrier": _scenario_barrier,
    "envelope": _scenario_envelope,
    "harnack": _scenario_harnack,
    "czd": _scenario_czd,
    "calculus": _scenario_calculus,
    "pucci": _scenario_pucci,
}


def _run_one(task):
    name, cfg, outdir = task
    kind = cfg.get("kind")
    if kind not in _SCENARIO_KINDS:
        raise ConfigError(f"scenario {name}: unknown kind {kind!r}")
    payload, failures = _SCENARIO_KINDS[kind](name, cfg, outdir)
    payload = {"scenario": name, "seed": int(cfg.get("seed", 0)), **payload, "failures": failures}
    write_atomic(os.path.join(outdir, f"{name}.json"), dumps17(payload) + "\n")
    return name, payload, failures


def run_config(path, outdir=None, workers=1):
    """Execute every scenario in the config; returns (exit_code, results)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    scenarios = []
    for section in parser.sections():
        if section == "suite":
            continue
        if not section.startswith("scenario:"):
            raise ConfigError(f"unexpected section [{section}] (want [scenario:NAME])")
        name = section.split(":", 1)[1]
        scenarios.append((name, dict(parser[section])))
    if outdir is None:
        outdir = parser.get("suite", "output_dir", fallback="elliptic_out")
    os.makedirs(outdir, exist_ok=True)
    tasks = [(name, cfg, outdir) for name, cfg in scenarios]
    results = []
    if workers > 1 and len(tasks) > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    # deterministic summary ordered by scenario name
    results.sort(key=lambda r: r[0])
    lines = ["scenario,kind,status"]
    all_failures = []
    for name, payload, failures in results:
        status = "ok" if not failures else "FAIL"
        lines.append(f"{name},{payload.get('kind')},{status}")
        all_failures.extend(failures)
    write_atomic(os.path.join(outdir, "summary.csv"), "\n".join(lines) + "\n")
    return (1 if all_failures else 0), results, all_failures


# ---------------------------------------------------------------------------
# Bundled suite
# ---------------------------------------------------------------------------

SUITE_CONFIG = """
[scenario:pucci_algebra]
kind = pucci
samples = 4000
seed = 5

[scenario:barrier_table]
kind = barrier
n = 2
lambda_F = 1.0
Lambda_F = 1.0
eps0 = 0.1
samples = 4000
seed = 11

[scenario:envelope_tent_1d]
kind = envelope
n = 1
npts = 257
side = 2.0
boundary = cone:1.0
m_partial = 0.0
min_coverage = 1.0

[scenario:abp_quadratic]
kind = abp
operator = pucci_plus
lambda_F = 1.0
Lambda_F = 1.0
n = 2
npts = 65
side = 2.0
ball_d = 1.0
analytic = true
boundary = quadratic_well:1.0
f_constant = 4.0

[scenario:abp_solved]
kind = abp
operator = pucci_plus
lambda_F = 1.0
Lambda_F = 1.0
n = 2
npts = 65
side = 2.0
ball_d = 1.0
boundary = constant:0.0
f_constant = 4.0
tol_solve = 1e-9

[scenario:solve_radial]
kind = solve
operator = pucci_minus
lambda_F = 1.0
Lambda_F = 2.0
n = 2
npts = 65
side = 2.0
boundary = radial_power:0.5,-1.0
exact_profile = radial_power:0.5,-1.0
error_tol = 1.2

[scenario:harnack_solved]
kind = harnack
operator = laplace
lambda_F = 1.0
Lambda_F = 1.0
n = 2
npts = 129
side = 1.0
boundary = harmonic_exp:0.3,2.0
verifiers = harnack,weak,localmax,osc
tol_solve = 1e-8

[scenario:holder_sqrt]
kind = harnack
operator = laplace
lambda_F = 1.0
Lambda_F = 1.0
n = 1
npts = 65
side = 1.0
analytic = true
boundary = abs_sqrt
verifiers = holder
alpha = 0.5

[scenario:decay_power]
kind = harnack
operator = laplace
lambda_F = 1.0
Lambda_F = 1.0
n = 2
npts = 257
side = 1.0
analytic = true
boundary = sup_power:0.3,1.5
verifiers = decay
t_lo = 1.0
t_hi = 40.0
t_n = 14

[scenario:czd_battery]
kind = czd
instances = 200
seed = 3

[scenario:calculus]
kind = calculus
lambda_F = 1.0
sigma2 = 1.0
seed = 2
"""

_SELFCHECK_SCENARIOS = ("pucci_algebra", "abp_quadratic", "czd_battery")


def run_suite(outdir, selfcheck=True, workers=1):
    os.makedirs(outdir, exist_ok=True)
    cfg_path = os.path.join(outdir, "suite.cfg")
    write_atomic(cfg_path, SUITE_CONFIG)
    code, results, failures = run_config(cfg_path, outdir=outdir, workers=workers)
    for name, payload, fails in results:
        status = "PASS" if not fails else "FAIL"
        print(f"[{status}] {name} ({payload.get('kind')})")
    if selfcheck:
        rerun_dir = os.path.join(outdir, "determinism_rerun")
        os.makedirs(rerun_dir, exist_ok=True)
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser.read(cfg_path)
        sub = configparser.ConfigParser()
        sub.optionxform = str
        for s in parser.sections():
            if s.startswith("scenario:") and s.split(":", 1)[1] in _SELFCHECK_SCENARIOS:
                sub[s] = parser[s]
        sub_path = os.path.join(rerun_dir, "rerun.cfg")
        with open(sub_path, "w") as fh:
            sub.write(fh)
        run_config(sub_path, outdir=rerun_dir, workers=1)
        mismatches = []
        for s in _SELFCHECK_SCENARIOS:
            a = file_hash(os.path.join(outdir, f"{s}.json"))
            b = file_hash(os.path.join(rerun_dir, f"{s}.json"))
            if a != b:
                mismatches.append(s)
        if mismatches:
            failures.append(f"determinism self-check failed for {mismatches}")
            print(f"[FAIL] determinism self-check: {mismatches}")
        else:
            print("[PASS] determinism self-check")
    if failures:
        for f in failures:
            print("failure:", f, file=sys.stderr)
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None):
    ap = argparse.ArgumentParser(prog="ellipticlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--workers", type=int, default=1)

    p_abp = sub.add_parser("abp", help="maximum-principle constant or scenario")
    p_abp.add_argument("--constant", action="store_true")
    p_abp.add_argument("--n", type=int, default=2)
    p_abp.add_argument("--lam", type=float, default=1.0)
    p_abp.add_argument("--sigma", type=float, default=0.0)
    p_abp.add_argument("--config", default=None)
    p_abp.add_argument("--out", default="elliptic_out")

    p_bar = sub.add_parser("barrier", help="build and verify the barrier")
    p_bar.add_argument("--n", type=int, default=2)
    p_bar.add_argument("--lam", type=float, default=1.0)
    p_bar.add_argument("--Lam", type=float, default=1.0)
    p_bar.add_argument("--eps0", type=float, default=0.1)
    p_bar.add_argument("--verify", action="store_true")
    p_bar.add_argument("--samples", type=int, default=10000)

    p_env = sub.add_parser("envelope", help="envelope of a named profile")
    p_env.add_argument("--n", type=int, default=1)
    p_env.add_argument("--npts", type=int, default=257)
    p_env.add_argument("--side", type=float, default=2.0)
    p_env.add_argument("--profile", default="cone:1.0")
    p_env.add_argument("--m-partial", type=float, default=0.0)
    p_env.add_argument("--out", default="elliptic_out")

    p_solve = sub.add_parser("solve", help="run one solve scenario config")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", default=None)

    p_har = sub.add_parser("harnack", help="run one harnack scenario config")
    p_har.add_argument("config")
    p_har.add_argument("--out", default=None)

    p_czd = sub.add_parser("czd", help="cube decomposition battery")
    p_czd.add_argument("--demo", action="store_true")
    p_czd.add_argument("--instances", type=int, default=200)
    p_czd.add_argument("--seed", type=int, default=3)

    p_suite = sub.add_parser("suite", help="bundled acceptance-scale battery")
    p_suite.add_argument("--out", default="elliptic_out")
    p_suite.add_argument("--workers", type=int, default=1)
    p_suite.add_argument("--no-selfcheck", action="store_true")

    args = ap.parse_args(argv)
    try:
        if args.cmd == "run":
            code, _, failures = run_config(args.config, outdir=args.out, workers=args.workers)
            for f in failures:
                print("failure:", f, file=sys.stderr)
            return code
        if args.cmd == "abp":
            if args.constant or not args.config:
                c0 = args.n * 2.0 ** (args.n - 2) / (abp_mod.unit_ball_volume(args.n) * args.lam**args.n)
                C = abp_mod.abp_constant(args.n, args.lam, args.sigma)
                print(f"C_ABP = {_fmt_float(c0)}")
                print(f"C = {_fmt_float(C)}")
                return 0
            code, _, failures = run_config(args.config, outdir=args.out)
            return code
        if args.cmd == "barrier":
            spec = barrier_mod.build_barrier(args.n, args.lam, args.Lam, args.eps0)
            print(spec.constants_block())
            if args.verify:
                reports = barrier_mod.verify_barrier(spec, n_samples=args.samples)
                bad = 0
                for k, r in reports.items():
                    print(r.summary())
                    bad += 0 if r.passed else 1
                return 1 if bad else 0
            return 0
        if args.cmd == "envelope":
            grid = Grid((0.0,) * args.n, args.side, args.npts)
            u = make_profile(args.profile, grid)
            env = envelope_mod.convex_envelope(u, args.m_partial)
            os.makedirs(args.out, exist_ok=True)
            env.dump(args.out, prefix="envelope")
            cov = envelope_mod.gradient_image(env)
            print(f"sweeps = {env.sweeps}")
            print(f"m_value = {_fmt_float(env.m_value)}")
            print(f"contact points = {int(env.contact_mask.sum())}")
            print(f"annulus coverage = {_fmt_float(cov.fraction)}")
            return 0
        if args.cmd in ("solve", "harnack"):
            code, _, failures = run_config(args.config, outdir=args.out)
            for f in failures:
                print("failure:", f, file=sys.stderr)
            return code
        if args.cmd == "czd":
            rng = np.random.default_rng(args.seed)
            bad = 0
            for i in range(args.instances):
                n = int(rng.integers(1, 4))
                cells = {1: 256, 2: 64, 3: 16}[n]
                delta = float(rng.uniform(0.15, 0.85))
                A, B = harnack_mod.czd_random_instance(rng, n, cells, delta)
                res = harnack_mod.czd(A, B, 1.0, delta)
                if res.verdict != "holds":
                    bad += 1
            print(f"instances = {args.instances}, failures = {bad}")
            return 1 if bad else 0
        if args.cmd == "suite":
            return run_suite(args.out, selfcheck=not args.no_selfcheck, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
