"""Convex envelope of the truncated supersolution on the doubled ball.

Given u on the grid covering a ball of radius d, the envelope machinery
computes the largest convex minorant of

    V = min(u + m_partial, 0)  on the closed ball,  V = 0 outside,

over the grid covering the doubled ball, together with the contact set
where the envelope touches V, per-cell subgradient boxes (the discrete
gradient image), and witness decompositions of non-contact points as
convex combinations of contact points.

The envelope itself is computed by iterated directional relaxation: the
exact one-dimensional lower convex hull is enforced along every grid line
in a fixed stencil of directions (axes, diagonals, knight moves), all
directions updated Jacobi-style from the same iterate, until the values
stop changing exactly.  The fixed point is the largest function convex
along every stencil line, which is the discrete envelope for the
stencil's directional closure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import Ball, Grid, GridFunction, SymMatrix, fd_hessian, point_mask, save_grid_function
from .report import VerificationReport

try:
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

__all__ = [
    "CoverageReport",
    "EnvelopeResult",
    "convex_envelope",
    "gradient_image",
    "hessian_contact_check",
    "relaxation_directions",
    "witness_decomposition",
]


# ---------------------------------------------------------------------------
# Direction stencils
# ---------------------------------------------------------------------------

def relaxation_directions(n):
    """Axis, diagonal, and knight-move lattice directions (up to sign)."""
    if n == 1:
        return ((1,),)
    if n == 2:
        return ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2))
    if n == 3:
        dirs = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
        dirs += [(1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1)]
        dirs += [(1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1)]
        for a in range(3):
            for b in range(3):
                if a == b:
                    continue
                for s in (1, -1):
                    v = [0, 0, 0]
                    v[a] = 2
                    v[b] = s
                    dirs.append(tuple(v))
        return tuple(dirs)
    raise ValueError("dimension must be 1, 2 or 3")


# ---------------------------------------------------------------------------
# Exact 1D lower hulls along all lines of one direction
# ---------------------------------------------------------------------------

def _hull_rows_py(vals, lens, out):
    for r in range(vals.shape[0]):
        m = lens[r]
        y = vals[r, :m]
        stack = [0]
        for i in range(1, m):
            while len(stack) >= 2:
                a, b = stack[-2], stack[-1]
                if (y[b] - y[a]) * (i - a) >= (y[i] - y[a]) * (b - a):
                    stack.pop()
                else:
                    break
            stack.append(i)
        seg = 0
        for i in range(m):
            while seg + 1 < len(stack) and stack[seg + 1] < i:
                seg += 1
            a = stack[seg]
            if i == a:
                out[r, i] = y[a]
            else:
                b = stack[seg + 1]
                out[r, i] = y[a] + (y[b] - y[a]) * (i - a) / (b - a)


if _HAVE_NUMBA:

    @njit(cache=True)
    def _hull_rows_nb(vals, lens, out, stack):  # pragma: no cover - jitted
        for r in range(vals.shape[0]):
            m = lens[r]
            top = 0
            stack[r, 0] = 0
            for i in range(1, m):
                while top >= 1:
                    a = stack[r, top - 1]
                    b = stack[r, top]
                    if (vals[r, b] - vals[r, a]) * (i - a) >= (vals[r, i] - vals[r, a]) * (b - a):
                        top -= 1
                    else:
                        break
                top += 1
                stack[r, top] = i
            seg = 0
            for i in range(m):
                while seg + 1 <= top and stack[r, seg + 1] < i:
                    seg += 1
                a = stack[r, seg]
                if i == a:
                    out[r, i] = vals[r, a]
                else:
                    b = stack[r, seg + 1]
                    out[r, i] = vals[r, a] + (vals[r, b] - vals[r, a]) * (i - a) / (b - a)


_LINE_CACHE = {}


def _line_indices(shape, v):
    """Flat-index rows (lines) of the lattice in direction v, -1 padded."""
    key = (shape, v)
    hit = _LINE_CACHE.get(key)
    if hit is not None:
        return hit
    n = len(shape)
    grids = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
    I = np.stack([g.ravel() for g in grids], axis=-1)
    prev = I - np.asarray(v)
    is_start = np.zeros(I.shape[0], dtype=bool)
    for k in range(n):
        is_start |= (prev[:, k] < 0) | (prev[:, k] >= shape[k])
    starts = I[is_start]
    steps = np.full(starts.shape[0], np.iinfo(np.int64).max, dtype=np.int64)
    for k in range(n):
        if v[k] > 0:
            steps = np.minimum(steps, (shape[k] - 1 - starts[:, k]) // v[k])
        elif v[k] < 0:
            steps = np.minimum(steps, starts[:, k] // (-v[k]))
    lens = (steps + 1).astype(np.int64)
    maxlen = int(lens.max())
    J = np.arange(maxlen)
    coords = starts[:, None, :] + J[None, :, None] * np.asarray(v)[None, None, :]
    valid = J[None, :] < lens[:, None]
    coords = np.clip(coords, 0, np.asarray(shape) - 1)
    flat = np.ravel_multi_index(np.moveaxis(coords, -1, 0), shape)
    flat = np.where(valid, flat, -1).astype(np.int64)
    entry = (flat, lens, maxlen)
    _LINE_CACHE[key] = entry
    return entry


def _hull_along(Gflat, shape, v):
    idx, lens, maxlen = _line_indices(shape, v)
    vals = Gflat[np.maximum(idx, 0)]
    out = np.empty_like(vals)
    if _HAVE_NUMBA:
        stack = np.empty(vals.shape, dtype=np.int64)
        _hull_rows_nb(vals, lens, out, stack)
    else:
        _hull_rows_py(vals, lens, out)
    new = Gflat.copy()
    valid = idx >= 0
    new[idx[valid]] = out[valid]
    return new


def _relax(V, directions, max_sweeps=2000):
    """Largest function convex along every stencil line, below V.

    Jacobi across directions: every directional hull is taken from the
    same iterate and the pointwise minimum is kept, so the fixed point is
    independent of direction scheduling.  Iterates until the values stop
    changing exactly (monotone decreasing floats terminate).
    """
    shape = V.shape
    G = V.ravel().copy()
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        candidates = [_hull_along(G, shape, v) for v in directions]
        new = G
        for c in candidates:
            new = np.minimum(new, c)
        if np.array_equal(new, G):
            break
        G = new
    return G.reshape(shape), sweeps


# ---------------------------------------------------------------------------
# Envelope result
# ---------------------------------------------------------------------------

@dataclass
class EnvelopeResult:
    """Envelope of min(u + m_partial, 0) on the doubled ball, with queries."""

    gamma: GridFunction
    v_ext: GridFunction
    contact_mask: np.ndarray
    ball: Ball
    m_partial: float
    m_value: float
    tol_contact: float
    sweeps: int
    observed_max_witnesses: int = 0

    @property
    def grid(self):
        return self.gamma.grid

    @cached_property
    def cell_centers(self):
        g = self.grid
        axes = [ax[:-1] + 0.5 * g.h for ax in g.axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def cell_gradient_boxes(self):
        """Per-cell, per-axis [min, max] of edge slopes: (cells, n, 2)."""
        g = self.grid
        G = self.gamma.values
        n = g.n
        ncells = (g.npts - 1) ** n
        boxes = np.empty((ncells, n, 2))
        for k in range(n):
            sl_hi = [slice(None)] * n
            sl_lo = [slice(None)] * n
            sl_hi[k] = slice(1, None)
            sl_lo[k] = slice(0, -1)
            D = (G[tuple(sl_hi)] - G[tuple(sl_lo)]) / g.h
            lo = None
            hi = None
            other = [a for a in range(n) if a != k]
            for bits in range(2 ** len(other)):
                sl = [slice(None)] * n
                sl[k] = slice(None)
                for j, a in enumerate(other):
                    sl[a] = slice(1, None) if (bits >> j) & 1 else slice(0, -1)
                edge = D[tuple(sl)]
                lo = edge if lo is None else np.minimum(lo, edge)
                hi = edge if hi is None else np.maximum(hi, edge)
            boxes[:, k, 0] = lo.ravel()
            boxes[:, k, 1] = hi.ravel()
        return boxes

    @cached_property
    def cell_gradients(self):
        """Cell-averaged envelope gradients: (cells, n)."""
        return 0.5 * (self.cell_gradient_boxes[:, :, 0] + self.cell_gradient_boxes[:, :, 1])

    @cached_property
    def point_gradient_boxes(self):
        """Per-point subgradient boxes spanning both one-sided slopes.

        A kink of the piecewise-linear envelope sits at a grid point, so
        the subdifferential there spans the slopes of the adjacent cells;
        boxes at boundary points fall back to the available side.
        (points, n, 2) array.
        """
        g = self.grid
        G = self.gamma.values
        n = g.n
        boxes = np.empty((g.npts**n, n, 2))
        for k in range(n):
            sl_hi = [slice(None)] * n
            sl_lo = [slice(None)] * n
            sl_hi[k] = slice(1, None)
            sl_lo[k] = slice(0, -1)
            D = (G[tuple(sl_hi)] - G[tuple(sl_lo)]) / g.h
            pad_lo = [(0, 0)] * n
            pad_hi = [(0, 0)] * n
            pad_lo[k] = (1, 0)
            pad_hi[k] = (0, 1)
            back = np.pad(D, pad_lo, mode="edge")
            fwd = np.pad(D, pad_hi, mode="edge")
            boxes[:, k, 0] = np.minimum(back, fwd).ravel()
            boxes[:, k, 1] = np.maximum(back, fwd).ravel()
        return boxes

    @cached_property
    def _cells_in_ball(self):
        return self.ball.contains(self.cell_centers, closed=True)

    @property
    def gradient_samples(self):
        """Envelope gradients of the cells whose centers lie in the ball."""
        return self.cell_gradients[self._cells_in_ball]

    def sup_gradient_norm(self):
        g = self.gradient_samples
        return float(np.max(np.linalg.norm(g, axis=1))) if len(g) else 0.0

    def steep_cells(self, m_f):
        """Cells in the ball with cell-averaged |grad| >= threshold m_f."""
        norms = np.linalg.norm(self.cell_gradients, axis=1)
        return self._cells_in_ball & (norms >= m_f)

    def contact_points(self):
        return self.grid.points[self.contact_mask.ravel()]

    def dump(self, directory, prefix="envelope", witness_points=()):
        """Write the envelope grid, 0/1 contact mask, and a witness table."""
        import os

        os.makedirs(directory, exist_ok=True)
        save_grid_function(os.path.join(directory, f"{prefix}_gamma.grid"), self.gamma)
        mask = GridFunction(self.grid, self.contact_mask.astype(float), "contact")
        save_grid_function(os.path.join(directory, f"{prefix}_contact.grid"), mask)
        rows = ["x;q;points;weights"]
        for x in witness_points:
            ws = witness_decomposition(self, x)
            pts = "|".join(",".join(format(c, ".17g") for c in p) for p, _ in ws)
            lam = "|".join(format(w, ".17g") for _, w in ws)
            xs = ",".join(format(c, ".17g") for c in np.atleast_1d(x))
            rows.append(f"{xs};{len(ws)};{pts};{lam}")
        with open(os.path.join(directory, f"{prefix}_witnesses.csv"), "w") as fh:
            fh.write("\n".join(rows) + "\n")


def convex_envelope(u, m_partial, ball=None, tol_contact=None, max_sweeps=2000):
    """Envelope of min(u + m_partial, 0), extended by zero, on the doubled grid.

    u must live on the grid covering the ball's bounding cube.  The
    contact tolerance defaults to 10 h^2.
    """
    g = u.grid
    if ball is None:
        ball = Ball(g.center, 0.5 * g.side)
    if abs(2.0 * ball.radius - g.side) > 1e-12 * g.side or tuple(ball.center) != tuple(g.center):
        raise ValueError("grid must cover exactly the bounding cube of the ball")
    big = g.doubled()
    V = np.zeros(big.shape)
    start = (g.npts - 1) // 2
    inner = tuple(slice(start, start + g.npts) for _ in range(g.n))
    inside = point_mask(g, ball, closed=True)
    V[inner] = np.where(inside, np.minimum(u.values + m_partial, 0.0), 0.0)
    Gvals, sweeps = _relax(V, relaxation_directions(g.n), max_sweeps=max_sweeps)
    tol = 10.0 * g.h**2 if tol_contact is None else tol_contact
    contact = np.abs(V - Gvals) <= tol
    sup_neg = float(np.max(np.maximum(-u.values[inside], 0.0)))
    m_value = max(sup_neg - m_partial, 0.0)
    return EnvelopeResult(
        gamma=GridFunction(big, Gvals, "envelope"),
        v_ext=GridFunction(big, V, "truncated"),
        contact_mask=contact,
        ball=ball,
        m_partial=float(m_partial),
        m_value=m_value,
        tol_contact=tol,
        sweeps=sweeps,
    )


# ---------------------------------------------------------------------------
# Gradient image coverage
# ---------------------------------------------------------------------------

@dataclass
class CoverageReport:
    inner_radius: float
    outer_radius: float
    n_points: int
    n_covered: int
    empty: bool
    misses: list = field(default_factory=list)

    @property
    def fraction(self):
        return 1.0 if self.empty or self.n_points == 0 else self.n_covered / self.n_points

    def to_dict(self):
        return {
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "n_points": self.n_points,
            "n_covered": self.n_covered,
            "fraction": self.fraction,
            "empty": self.empty,
        }


def _annulus_sample(n, r_in, r_out, count, seed):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        q = rng.uniform(-r_out, r_out, size=(4 * count, n))
        r = np.linalg.norm(q, axis=1)
        keep = (r >= r_in) & (r <= r_out)
        pts.extend(q[keep][: count - len(pts)])
    return np.asarray(pts)


def gradient_image(env, m_f=0.0, n_samples=2000, seed=7, pad=None):
    """Coverage of the annulus {m_f <= |p| <= M/(3d)} by envelope subgradients.

    Collects the per-cell subgradient boxes over the steep set (cells in
    the ball with |grad| >= m_f) and reports the fraction of annulus
    samples contained in some box, inflated by the grid resolution.
    """
    d = env.ball.radius
    r_out = env.m_value / (3.0 * d)
    if r_out <= m_f:
        return CoverageReport(m_f, r_out, 0, 0, empty=True)
    n = env.grid.n
    pad = env.grid.h if pad is None else pad
    boxes = env.point_gradient_boxes
    in_ball = env.ball.contains(env.grid.points, closed=True)
    # a point contributes if its subgradient box reaches the steep region
    reach = np.linalg.norm(np.max(np.abs(boxes), axis=2), axis=1) >= m_f
    boxes = boxes[in_ball & reach]
    lo = boxes[:, :, 0] - pad
    hi = boxes[:, :, 1] + pad
    targets = _annulus_sample(n, m_f, r_out, n_samples, seed)
    covered = np.zeros(len(targets), dtype=bool)
    chunk = max(1, 10**7 // max(len(targets), 1))
    for s in range(0, len(lo), chunk):
        inside = np.all(
            (targets[None, :, :] >= lo[s : s + chunk, None, :])
            & (targets[None, :, :] <= hi[s : s + chunk, None, :]),
            axis=2,
        )
        covered |= inside.any(axis=0)
        if covered.all():
            break
    misses = targets[~covered][:10].tolist()
    return CoverageReport(m_f, r_out, len(targets), int(covered.sum()), False, misses)


# ---------------------------------------------------------------------------
# Hessian bound on the contact set
# ---------------------------------------------------------------------------

def hessian_contact_check(env, params, tol_hess=None):
    """Hessian bound at steep contact points; flatness off contact.

    At contact points where the envelope gradient clears the threshold,
    the largest eigenvalue of the discrete Hessian of the envelope must
    not exceed (sigma |grad| + f^+) / lambda_F.  Off contact the envelope
    is ruled, so some stencil direction must show a vanishing second
    difference; the margin recorded there is minus the smallest
    directional curvature magnitude.
    """
    g = env.grid
    h = g.h
    tol = 10.0 * h if tol_hess is None else tol_hess
    rep = VerificationReport("envelope_contact_hessian", tol)
    gamma = env.gamma
    inside = point_mask(g, env.ball, closed=True)
    idx_all = np.argwhere(inside)
    n = g.n
    dirs = relaxation_directions(n)
    n_contact = 0
    n_flat = 0
    for idx in idx_all:
        idx = tuple(int(i) for i in idx)
        if any(i < 2 or i > g.npts - 3 for i in idx):
            continue
        x = g.coords(idx)
        grad = np.array(
            [
                (gamma.values[_shift(idx, k, 1)] - gamma.values[_shift(idx, k, -1)]) / (2 * h)
                for k in range(n)
            ]
        )
        if np.linalg.norm(grad) < params.M_F:
            continue
        if env.contact_mask[idx]:
            n_contact += 1
            H = fd_hessian(gamma, x)
            lam_max = H.eigvals()[-1]
            bound = (params.sigma_at(x) * np.linalg.norm(grad) + max(params.f_at(x), 0.0)) / params.lambda_F
            rep.record(bound - lam_max, detail={"x": list(map(float, x)), "kind": "contact"})
        else:
            n_flat += 1
            curv = min(
                abs(
                    gamma.values[_shiftv(idx, v, 1)]
                    - 2 * gamma.values[idx]
                    + gamma.values[_shiftv(idx, v, -1)]
                )
                / (h * h * sum(c * c for c in v))
                for v in dirs
                if _inbounds(idx, v, g.npts)
            )
            rep.record(-curv, detail={"x": list(map(float, x)), "kind": "flat"})
    rep.constants = {"contact_points": n_contact, "off_contact_points": n_flat, "tol_hess": tol}
    return rep


def _shift(idx, k, s):
    out = list(idx)
    out[k] += s
    return tuple(out)


def _shiftv(idx, v, s):
    return tuple(i + s * c for i, c in zip(idx, v))


def _inbounds(idx, v, npts):
    return all(0 <= i + c < npts and 0 <= i - c < npts for i, c in zip(idx, v))


# ---------------------------------------------------------------------------
# Witness decomposition (supporting facet of a non-contact point)
# ---------------------------------------------------------------------------

def witness_decomposition(env, x, tol=1e-7):
    """Contact points x_i and weights lam_i with sum lam_i x_i = x and
    sum lam_i V(x_i) = envelope(x); at most n+1 witnesses.

    Solved as the generated-value linear program over the contact set;
    a basic optimal solution is a supporting facet's vertex set.  Raises
    on contact points (the witness would be x itself).
    """
    from scipy.optimize import linprog

    g = env.grid
    idx = g.index_near(np.atleast_1d(np.asarray(x, dtype=float)))
    x = g.coords(idx)  # identities are stated at the grid point
    if env.contact_mask[idx]:
        raise ValueError("witness trivial (x itself): point lies in the contact set")
    cand_mask = env.contact_mask.ravel()
    pts = g.points[cand_mask]
    vals = env.v_ext.values.ravel()[cand_mask]
    A_eq = np.vstack([np.ones(len(pts)), pts.T])
    b_eq = np.concatenate([[1.0], x])
    res = linprog(c=vals, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
    if not res.success:
        raise RuntimeError(f"witness LP failed: {res.message}")
    lam = res.x
    keep = lam > 1e-9
    witnesses = [(pts[i].copy(), float(lam[i])) for i in np.flatnonzero(keep)]
    total = sum(w for _, w in witnesses)
    witnesses = [(p, w / total) for p, w in witnesses]
    witnesses.sort(key=lambda t: -t[1])
    n = g.n
    if len(witnesses) > n + 1:
        raise RuntimeError(f"degenerate witness set of size {len(witnesses)} > n+1")
    value = sum(w * env.v_ext.interp(p) for p, w in witnesses)
    gamma_x = float(env.gamma.values[idx])
    if abs(value - gamma_x) > max(tol, 20.0 * g.h**2):
        raise RuntimeError(
            f"witness value {value:.6g} inconsistent with envelope {gamma_x:.6g}"
        )
    env.observed_max_witnesses = max(env.observed_max_witnesses, len(witnesses))
    return witnesses
