"""Harnack-side verifiers: quotient reports, oscillation decay, level sets,
and the dyadic stopping-time (Calderon-Zygmund) cube decomposition.

The quotient reports measure both sides of the inequalities

    ||u||_{L^p0(Q_1/4)} <= C (inf_{Q_1/2} u + max(M_F, ||f||_n))     (weak)
    sup_{Q_1/4} u <= C(p) (||u^+||_{L^p(Q_1/2)} + max(M_F, ||f||_n)) (local max)
    sup_{Q_1/2} u <= C (inf_{Q_1/2} u + max(M_F, ||f||_n))           (full)

on the grid's own unit cube; the universal constants are never assumed,
only the computed quotients are reported (optionally compared against a
hypothesis value).  p0 and p default to 1/2 and 1; every report echoes
the exponents it used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Cube, GridFunction, cell_weights, lp_norm, sup_inf_osc
from .solve import rescale

__all__ = [
    "CzdResult",
    "DecayFit",
    "DyadicCube",
    "czd",
    "czd_random_instance",
    "harnack_report",
    "holder_seminorm",
    "level_set_decay",
    "local_max_report",
    "osc_decay_check",
    "weak_harnack_report",
]


def _windows(grid):
    c = grid.center
    return (
        Cube(c, grid.side),
        Cube(c, 0.5 * grid.side),
        Cube(c, 0.25 * grid.side),
    )


def _data_term(u, params):
    q1, _, _ = _windows(u.grid)
    f_norm = 0.0
    if params.f_field is not None:
        f_norm = lp_norm(params.f_field, u.grid.n, q1)
    return max(params.M_F, f_norm), f_norm


def harnack_report(u, params, C_hypothesis=None):
    """sup/inf quotient of a nonnegative solution over the half cube."""
    if np.min(u.values) < -1e-12 * max(1.0, np.max(np.abs(u.values))):
        raise ValueError("harnack_report expects a nonnegative function")
    _, q_half, _ = _windows(u.grid)
    sup, inf, _ = sup_inf_osc(u, q_half)
    data, f_norm = _data_term(u, params)
    denom = inf + data
    infinite = denom == 0.0
    quotient = math.inf if infinite else sup / denom
    out = {
        "sup_half": sup,
        "inf_half": inf,
        "data_term": data,
        "f_norm": f_norm,
        "quotient": quotient,
        "infinite": infinite,
        "C_hypothesis": C_hypothesis,
    }
    if C_hypothesis is not None:
        out["passed"] = (not infinite) and quotient <= C_hypothesis
    return out


def weak_harnack_report(u, params, p0=0.5, C_hypothesis=None):
    """L^p0 mass of a nonnegative supersolution vs. its infimum plus data."""
    if p0 <= 0:
        raise ValueError("p0 must be positive")
    _, q_half, q_quarter = _windows(u.grid)
    lhs = lp_norm(u, p0, q_quarter)
    _, inf, _ = sup_inf_osc(u, q_half)
    data, f_norm = _data_term(u, params)
    denom = inf + data
    infinite = denom == 0.0
    quotient = math.inf if infinite else lhs / denom
    out = {
        "p0": p0,
        "lhs_norm": lhs,
        "inf_half": inf,
        "data_term": data,
        "f_norm": f_norm,
        "quotient": quotient,
        "infinite": infinite,
        "C_hypothesis": C_hypothesis,
    }
    if C_hypothesis is not None:
        out["passed"] = (not infinite) and quotient <= C_hypothesis
    return out


def local_max_report(u, params, p=1.0, C_hypothesis=None):
    """Peak of a subsolution vs. the L^p mass of its positive part plus data."""
    if p <= 0:
        raise ValueError("p must be positive")
    _, q_half, q_quarter = _windows(u.grid)
    sup, _, _ = sup_inf_osc(u, q_quarter)
    uplus = u.with_values(np.maximum(u.values, 0.0))
    rhs_norm = lp_norm(uplus, p, q_half)
    data, f_norm = _data_term(u, params)
    denom = rhs_norm + data
    infinite = denom == 0.0
    quotient = math.inf if infinite and sup > 0 else (0.0 if infinite else sup / denom)
    out = {
        "p": p,
        "sup_quarter": sup,
        "plus_norm": rhs_norm,
        "data_term": data,
        "f_norm": f_norm,
        "quotient": quotient,
        "infinite": infinite,
        "C_hypothesis": C_hypothesis,
    }
    if C_hypothesis is not None:
        out["passed"] = sup <= 0 or (not infinite and quotient <= C_hypothesis)
    return out


# ---------------------------------------------------------------------------
# Hoelder seminorm
# ---------------------------------------------------------------------------

def holder_seminorm(u, alpha, domain=None, max_pairs=10**6, seed=0):
    """sup |u(x)-u(y)| / |x-y|^alpha over grid pairs in the domain.

    All pairs are enumerated when their count stays below max_pairs;
    otherwise a seeded stratified sample of max_pairs pairs is used, so
    results are deterministic for a fixed seed.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    g = u.grid
    domain = Cube(g.center, 0.5 * g.side) if domain is None else domain
    mask = domain.contains(g.points, closed=True)
    pts = g.points[mask]
    vals = u.values.ravel()[mask]
    m = len(pts)
    if m < 2:
        return 0.0
    best = 0.0
    if m * (m - 1) // 2 <= max_pairs:
        chunk = max(1, max_pairs // m)
        for s in range(0, m, chunk):
            block = slice(s, min(s + chunk, m))
            dv = np.abs(vals[block, None] - vals[None, :])
            dx = np.linalg.norm(pts[block, None, :] - pts[None, :, :], axis=2)
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(dx > 0, dv / dx**alpha, 0.0)
            best = max(best, float(q.max()))
        return best
    rng = np.random.default_rng(seed)
    done = 0
    while done < max_pairs:
        take = min(200_000, max_pairs - done)
        i = rng.integers(0, m, take)
        j = rng.integers(0, m, take)
        keep = i != j
        dv = np.abs(vals[i[keep]] - vals[j[keep]])
        dx = np.linalg.norm(pts[i[keep]] - pts[j[keep]], axis=1)
        q = dv / dx**alpha
        if q.size:
            best = max(best, float(q.max()))
        done += take
    return best


# ---------------------------------------------------------------------------
# Oscillation decay
# ---------------------------------------------------------------------------

def osc_decay_check(u, C_hypothesis, params, steps=3):
    """Dyadic oscillation-decay recursion, chained through rescaling.

    Each step checks, on the window rescaled to the unit cube,
        osc_half <= kappa osc_full + 2 max(M_F, ||f||_n + gamma ||u||_inf)
    with kappa = (C-1)/(C+1); the chained oscillations yield an empirical
    decay exponent to compare with -log2(kappa).
    """
    if C_hypothesis <= 1:
        raise ValueError("the decay factor needs C > 1")
    kappa = (C_hypothesis - 1.0) / (C_hypothesis + 1.0)
    g = u.grid
    records = []
    oscs = []
    all_ok = True
    for k in range(steps + 1):
        t0 = 2.0 ** (-k)
        npts_k = (g.npts - 1) // 2**k + 1
        if npts_k < 5 or (g.npts - 1) % 2**k:
            break
        u_k, params_k = rescale(u, params, g.center, t0, 1.0, g.side, npts=npts_k)
        q1, q_half, _ = _windows(u_k.grid)
        _, _, osc_full = sup_inf_osc(u_k, q1)
        _, _, osc_half = sup_inf_osc(u_k, q_half)
        f_norm = lp_norm(params_k.f_field, g.n, q1) if params_k.f_field is not None else 0.0
        sup_abs = float(np.max(np.abs(u_k.values)))
        additive = 2.0 * max(params_k.M_F, f_norm + params_k.gamma_F * sup_abs)
        bound = kappa * osc_full + additive
        ok = osc_half <= bound + 1e-12 * max(1.0, osc_full)
        all_ok = all_ok and ok
        records.append(
            {
                "level": k,
                "osc_full": osc_full,
                "osc_half": osc_half,
                "bound": bound,
                "additive": additive,
                "ok": ok,
            }
        )
        if k == 0:
            oscs.append(osc_full)
        oscs.append(osc_half)
    exponent_theory = -math.log2(kappa)
    floor = 10.0 * max(r["additive"] for r in records) if records else 0.0
    usable = [o for o in oscs if o > max(floor, 1e-14)]
    exponent_measured = None
    if len(usable) >= 2:
        ks = np.arange(len(usable))
        exponent_measured = float(-np.polyfit(ks, np.log2(usable), 1)[0])
    return {
        "C_hypothesis": C_hypothesis,
        "kappa": kappa,
        "steps": records,
        "passed": all_ok,
        "exponent_theory": exponent_theory,
        "exponent_measured": exponent_measured,
    }


# ---------------------------------------------------------------------------
# Level-set decay
# ---------------------------------------------------------------------------

@dataclass
class DecayFit:
    """Upper power envelope |{u >= t}| <= d t^(-eps) over the sampled t."""

    d_fit: float
    eps_fit: float
    t_values: np.ndarray
    measures: np.ndarray
    residuals: np.ndarray
    eps_infinite: bool = False

    def __post_init__(self):
        if not self.eps_infinite and len(self.residuals):
            if np.min(self.residuals) < -1e-12:
                raise ValueError("fit is not a valid upper envelope")

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(f"# d_fit = {format(self.d_fit, '.17g')}\n")
            eps = "inf" if self.eps_infinite else format(self.eps_fit, ".17g")
            fh.write(f"# eps_fit = {eps}\n")
            fh.write("t,measure\n")
            for t, m in zip(self.t_values, self.measures):
                fh.write(f"{format(t, '.17g')},{format(m, '.17g')}\n")

    def to_dict(self):
        return {
            "d_fit": self.d_fit,
            "eps_fit": None if self.eps_infinite else self.eps_fit,
            "eps_infinite": self.eps_infinite,
            "n_points": int(len(self.t_values)),
        }


def level_set_decay(u, cube, t_grid):
    """Measure |{u >= t} /\\ cube| by cell counting and fit the tightest
    upper power envelope (max-margin in log-log scale, preferring the
    largest exponent among ties)."""
    from scipy.optimize import linprog

    t_grid = np.asarray(t_grid, dtype=float)
    if len(t_grid) < 8:
        raise ValueError("need at least 8 level values")
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("levels must be positive and increasing")
    if np.min(u.values) < -1e-12 * max(1.0, float(np.max(np.abs(u.values)))):
        raise ValueError("level_set_decay expects a nonnegative function")
    w = cell_weights(u.grid, cube)
    measures = np.array([float(np.sum(w[u.values >= t])) for t in t_grid])
    keep = measures > 0
    t, m = t_grid[keep], measures[keep]
    if len(t) < 2:
        return DecayFit(float(m[0]) if len(m) else 0.0, 0.0, t_grid, measures,
                        np.zeros(0), eps_infinite=True)
    if np.max(m) - np.min(m) <= 1e-12 * np.max(m):
        # constant function: a step profile decays faster than any power
        return DecayFit(float(np.max(m)), math.inf, t_grid, measures,
                        np.zeros(0), eps_infinite=True)
    lt, lm = np.log(t), np.log(m)
    npts = len(t)
    delta = 1e-9 * max(1.0, float(np.abs(lt).sum()))
    res = linprog(
        c=[npts, -(lt.sum() + delta)],
        A_ub=np.column_stack([-np.ones(npts), lt]),
        b_ub=-lm,
        bounds=[(None, None), (0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"decay fit LP failed: {res.message}")
    L, eps = res.x
    slack = L - eps * lt - lm
    return DecayFit(float(np.exp(L)), float(eps), t, m, slack)


# ---------------------------------------------------------------------------
# Dyadic cubes and the stopping-time decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicCube:
    """Dyadic descendant of the root cube: 2^(n level) congruent pieces."""

    level: int
    index: tuple
    root_side: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if any(not 0 <= i < 2**self.level for i in self.index):
            raise ValueError("index outside the dyadic range")

    @property
    def n(self):
        return len(self.index)

    @property
    def side(self):
        return self.root_side / 2**self.level

    @property
    def volume(self):
        return self.side**self.n

    def predecessor(self):
        if self.level == 0:
            raise ValueError("the root cube has no predecessor")
        return DyadicCube(self.level - 1, tuple(i // 2 for i in self.index), self.root_side)

    def children(self):
        out = []
        for bits in range(2**self.n):
            child = tuple(2 * self.index[k] + ((bits >> k) & 1) for k in range(self.n))
            out.append(DyadicCube(self.level + 1, child, self.root_side))
        return out

    def contains(self, other):
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all(o >> shift == s for o, s in zip(other.index, self.index))

    def cell_slices(self, cells_per_axis):
        w = cells_per_axis // 2**self.level
        if w * 2**self.level != cells_per_axis:
            raise ValueError("cube level does not align with the cell grid")
        return tuple(slice(i * w, (i + 1) * w) for i in self.index)


@dataclass
class CzdResult:
    delta: float
    root_side: float
    stopped: list
    hyp1_ok: bool
    hyp2_ok: bool
    hyp2_failures: list
    measure_A: float
    measure_B: float
    conclusion_holds: bool
    predecessor_union_measure: float

    @property
    def verdict(self):
        if not (self.hyp1_ok and self.hyp2_ok):
            return "hypotheses not met"
        return "holds" if self.conclusion_holds else "CONTRADICTION"

    def to_dict(self):
        return {
            "delta": self.delta,
            "n_stopped": len(self.stopped),
            "hyp1_ok": self.hyp1_ok,
            "hyp2_ok": self.hyp2_ok,
            "measure_A": self.measure_A,
            "measure_B": self.measure_B,
            "predecessor_union_measure": self.predecessor_union_measure,
            "verdict": self.verdict,
        }


def czd(A, B, root_side, delta):
    """Stopping-time decomposition for cell sets A inside B inside the cube.

    Splits dyadically, stopping at cubes where the A-fraction exceeds
    delta; verifies the two hypotheses (small global A-fraction; stopped
    predecessors inside B) and re-checks the conclusion |A| <= delta |B|
    by direct count.  Cell grids must be a power of two per axis.
    """
    A = np.asarray(A, dtype=bool)
    B = np.asarray(B, dtype=bool)
    if A.shape != B.shape:
        raise ValueError("A and B must share the cell grid")
    m = A.shape[0]
    if any(s != m for s in A.shape) or m & (m - 1):
        raise ValueError("cell grid must be a power of two per axis")
    if np.any(A & ~B):
        raise ValueError("A must be contained in B")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    n = A.ndim
    cell_vol = (root_side / m) ** n
    total = m**n
    measure_A = float(A.sum() * cell_vol)
    measure_B = float(B.sum() * cell_vol)
    hyp1_ok = A.sum() <= delta * total

    stopped = []

    def recurse(cube):
        sl = cube.cell_slices(m)
        block = A[sl]
        count = int(block.sum())
        if count == 0:
            return
        if count > delta * block.size:
            stopped.append(cube)
            return
        if block.shape[0] == 1:
            return
        for child in cube.children():
            recurse(child)

    root = DyadicCube(0, (0,) * n, root_side)
    if hyp1_ok:
        for child in root.children() if A.any() else []:
            recurse(child)

    hyp2_failures = []
    preds = []
    for cube in stopped:
        pred = cube.predecessor()
        preds.append(pred)
        if not bool(B[pred.cell_slices(m)].all()):
            hyp2_failures.append(pred)
    hyp2_ok = not hyp2_failures

    # maximal predecessors are disjoint, cover A, and each carries a small
    # A-fraction (it was split, not stopped): the measure chain is explicit
    maximal = []
    for cube in sorted(set(preds), key=lambda c: c.level):
        if not any(big.contains(cube) for big in maximal):
            maximal.append(cube)
    union = float(sum(c.volume for c in maximal))
    conclusion = measure_A <= delta * measure_B + 1e-12 * max(1.0, measure_B)
    return CzdResult(
        delta=delta,
        root_side=root_side,
        stopped=stopped,
        hyp1_ok=bool(hyp1_ok),
        hyp2_ok=hyp2_ok,
        hyp2_failures=hyp2_failures,
        measure_A=measure_A,
        measure_B=measure_B,
        conclusion_holds=bool(conclusion),
        predecessor_union_measure=union,
    )


def czd_random_instance(rng, n=2, cells=32, delta=0.5):
    """Hypothesis-satisfying random instance: random small A, then B grown
    to contain every stopped predecessor (stopping depends on A alone)."""
    shape = (cells,) * n
    total = cells**n
    A = np.zeros(shape, dtype=bool)
    # a few random dyadic-ish blobs plus salt, kept under the delta budget
    budget = int(delta * total * rng.uniform(0.3, 0.9))
    placed = 0
    for _ in range(rng.integers(1, 5)):
        w = int(2 ** rng.integers(0, max(1, cells.bit_length() - 2)))
        corner = [int(rng.integers(0, cells - w + 1)) for _ in range(n)]
        sl = tuple(slice(c, c + w) for c in corner)
        A[sl] = True
        placed = int(A.sum())
        if placed >= budget:
            break
    flat = np.flatnonzero(~A.ravel())
    extra = max(0, budget - placed)
    if extra and len(flat):
        picks = rng.choice(flat, size=min(extra, len(flat)), replace=False)
        A.ravel()[picks] = True
    if A.sum() > delta * total:
        # trim uniformly back under the global budget
        on = np.flatnonzero(A.ravel())
        drop = rng.choice(on, size=int(A.sum() - math.floor(delta * total)), replace=False)
        A.ravel()[drop] = False
    probe = czd(A, np.ones(shape, dtype=bool), 1.0, delta)
    B = A.copy()
    for cube in probe.stopped:
        B[cube.predecessor().cell_slices(cells)] = True
    return A, B
