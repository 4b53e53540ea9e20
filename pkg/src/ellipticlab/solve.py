"""Monotone wide-stencil solver, rescaling calculus, Cole-Hopf transform.

The discretization replaces the Hessian by directional second differences
over axis and face-diagonal directions; extremal operators are evaluated
frame-wise (the best orthogonal frame inside the stencil), which keeps
the scheme monotone: the discrete operator is nonincreasing in every
neighbor value and nondecreasing in the center value, so converged
solutions obey the discrete comparison principle.

Two iterations drive the residual down:

  policy   freeze the active frame, the sign pattern, and the gradient
           factors, solve the resulting sparse linear system, repeat
           (Howard-style; superlinear near the fixed point; default);
  jacobi   damped pointwise relaxation u <- u - damping * F / dF_du
           (the reference iteration; scheduling-independent but needs
           O(N^2) sweeps, so use it on coarse grids only).

Both iterate on the same residual, so they share the fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    Ball,
    Cube,
    Grid,
    GridFunction,
    StructureParams,
    grid_function_from_callable,
    point_mask,
)
from .pucci import OperatorSpec, SingularGradientError

__all__ = [
    "ProblemSpec",
    "SolveResult",
    "cole_hopf",
    "cole_hopf_profile",
    "generate_radial",
    "rescale",
    "solve",
    "solver_directions",
    "solver_frames",
]


def solver_directions(n):
    """Axis plus face-diagonal stencil (4 directions for n=2, 9 for n=3)."""
    if n == 1:
        return ((1,),)
    if n == 2:
        return ((1, 0), (0, 1), (1, 1), (1, -1))
    if n == 3:
        return (
            (1, 0, 0), (0, 1, 0), (0, 0, 1),
            (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
        )
    raise ValueError("dimension must be 1, 2 or 3")


def solver_frames(n):
    """Orthogonal frames available inside the stencil, as direction indices."""
    if n == 1:
        return ((0,),)
    if n == 2:
        return ((0, 1), (2, 3))
    if n == 3:
        return ((0, 1, 2), (3, 4, 2), (5, 6, 1), (7, 8, 0))
    raise ValueError("dimension must be 1, 2 or 3")


@dataclass(frozen=True)
class ProblemSpec:
    """Dirichlet problem: operator residual F(u) + f = 0 on the domain.

    boundary_data must be a GridFunction on the solve grid; its values
    hold on the boundary band (every grid point outside the open domain).
    The forcing field rides along in operator.params.f_field except for
    the homogeneous family, which carries its own zeroth-order field.
    """

    operator: OperatorSpec
    domain: object
    boundary_data: GridFunction

    @property
    def grid(self):
        return self.boundary_data.grid


@dataclass
class SolveResult:
    u: GridFunction
    residual_sup: float
    iterations: int
    converged: bool
    method: str
    grad_epsilon: float
    residual_history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "residual_sup": self.residual_sup,
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method,
            "grad_epsilon": self.grad_epsilon,
        }


# ---------------------------------------------------------------------------
# Discrete operator on the one-deep core
# ---------------------------------------------------------------------------

class _Scheme:
    def __init__(self, problem):
        g = problem.grid
        self.grid = g
        self.spec = problem.operator
        self.params = problem.operator.params
        n = g.n
        self.n = n
        self.h = g.h
        self.dirs = solver_directions(n)
        self.frames = solver_frames(n)
        self.norm2 = np.array([sum(c * c for c in v) for v in self.dirs], dtype=float)
        core = tuple(slice(1, g.npts - 1) for _ in range(n))
        self.core = core
        inside = point_mask(g, problem.domain, closed=False)
        if isinstance(problem.domain, Cube):
            # open-cube membership keeps the outer shell in the band already
            pass
        unknown = np.zeros(g.shape, dtype=bool)
        unknown[core] = True
        unknown &= inside
        self.unknown = unknown
        if not unknown.any():
            raise ValueError("no interior unknowns: grid too coarse for the domain")
        self.eps = g.h if self.spec.is_singular or (
            self.spec.kind == "m_laplace" and self.spec.m < 2
        ) else 0.0
        # cached coefficient fields sampled on the grid
        self.fvals = (
            self.params.f_field.values if self.params.f_field is not None else None
        )
        sp_ = self.spec
        self.f0vals = (
            sp_.f0_field.values if sp_.kind == "homog_family" and sp_.f0_field is not None else None
        )
        self.bvals = (
            np.stack([bf.values for bf in sp_.b_field], axis=-1)
            if sp_.kind == "homog_family" and sp_.b_field
            else None
        )

    # -- shifted views -------------------------------------------------
    def _shift(self, U, v):
        # core index i corresponds to full index i+1
        return U[tuple(slice(1 + c, self.grid.npts - 1 + c) for c in v)]

    def _frame_of(self, di):
        for f in self.frames:
            if di in f:
                return f
        raise AssertionError("direction outside every frame")

    def second_differences(self, U):
        """d_v on the core for every stencil direction: (ndirs, *core)."""
        h2 = self.h * self.h
        center = U[self.core]
        out = []
        for v, n2 in zip(self.dirs, self.norm2):
            up = self._shift(U, v)
            dn = self._shift(U, tuple(-c for c in v))
            out.append((up + dn - 2.0 * center) / (h2 * n2))
        return np.stack(out, axis=0)

    def central_gradient(self, U):
        h = self.h
        grads = []
        for k in range(self.n):
            v = tuple(1 if i == k else 0 for i in range(self.n))
            up = self._shift(U, v)
            dn = self._shift(U, tuple(-c for c in v))
            grads.append((up - dn) / (2.0 * h))
        return np.stack(grads, axis=0)

    def _frame_values(self, d, sign):
        """Extremal frame values and the best frame index per core point."""
        lam, Lam = self.params.lambda_F, self.params.Lambda_F
        if sign > 0:
            per_dir = -lam * np.maximum(d, 0.0) + Lam * np.maximum(-d, 0.0)
        else:
            per_dir = -Lam * np.maximum(d, 0.0) + lam * np.maximum(-d, 0.0)
        frame_vals = np.stack([sum(per_dir[i] for i in f) for f in self.frames], axis=0)
        best = np.argmax(frame_vals, axis=0) if sign > 0 else np.argmin(frame_vals, axis=0)
        val = np.take_along_axis(frame_vals, best[None], axis=0)[0]
        return val, best

    def gradient_factor_field(self, U):
        """Pointwise gradient factor w(x) multiplying the second-order part."""
        if self.spec.kind in ("m_laplace", "homog_family"):
            grad = self.central_gradient(U)
            return self._gradient_factor(np.sqrt(np.sum(grad**2, axis=0)))
        if self.spec.kind == "quasilinear":
            return self._quasi_lambda(self.central_gradient(U))
        return np.ones(tuple(self.grid.npts - 2 for _ in range(self.n)))

    def _gradient_factor(self, pnorm):
        spec = self.spec
        if spec.kind == "m_laplace":
            pe = np.sqrt(pnorm**2 + self.eps**2) if self.eps else pnorm
            with np.errstate(divide="ignore"):
                w = np.where(pe > 0, pe ** (spec.m - 2.0), 0.0 if spec.m > 2 else 1.0)
            return w
        if spec.kind == "homog_family":
            pe = np.sqrt(pnorm**2 + self.eps**2) if self.eps else pnorm
            if spec.alpha == 0.0:
                return np.ones_like(pnorm)
            with np.errstate(divide="ignore"):
                return np.where(pe > 0, pe**spec.alpha, 0.0)
        return np.ones_like(pnorm)

    def residual(self, U):
        """True nonlinear residual (including forcing) on the core."""
        spec = self.spec
        d = self.second_differences(U)
        core_u = U[self.core]
        res = np.zeros_like(core_u)
        grad = None
        if spec.kind in ("pucci_plus", "pucci_minus"):
            val, _ = self._frame_values(d, +1 if spec.kind == "pucci_plus" else -1)
            res = val
        elif spec.kind == "laplace":
            res = -sum(d[k] for k in range(self.n))
        elif spec.kind == "m_laplace":
            # frame trace around the gradient-aligned direction keeps every
            # directional weight nonnegative, also for 1 < m < 2
            grad = self.central_gradient(U)
            pnorm = np.sqrt(np.sum(grad**2, axis=0))
            w = self._gradient_factor(pnorm)
            dir_idx = self._nearest_direction(grad, pnorm)
            res = np.zeros_like(core_u)
            for di in range(len(self.dirs)):
                sel = dir_idx == di
                if not sel.any():
                    continue
                frame = self._frame_of(di)
                tr_f = sum(d[k] for k in frame)
                res[sel] = -(w * (tr_f + (spec.m - 2.0) * d[di]))[sel]
        elif spec.kind == "homog_family":
            grad = self.central_gradient(U)
            pnorm = np.sqrt(np.sum(grad**2, axis=0))
            w = self._gradient_factor(pnorm)
            val, _ = self._frame_values(d, +1 if spec.core == "pucci_plus" else -1)
            res = w * val
            if self.bvals is not None:
                res = res + w * self._upwind_drift(U, w)
            if spec.c:
                res = res + spec.c * core_u * np.abs(core_u) ** spec.alpha
            if self.f0vals is not None:
                res = res + self.f0vals[self.core]
        elif spec.kind == "quasilinear":
            grad = self.central_gradient(U)
            lamp = self._quasi_lambda(grad)
            res = -lamp * sum(d[k] for k in range(self.n))
            if spec.h_term is not None:
                res = res + self._quasi_h(core_u, grad)
        if self.fvals is not None and spec.kind != "homog_family":
            res = res + self.fvals[self.core]
        return res

    def _nearest_direction(self, grad, pnorm):
        units = np.array([np.asarray(v) / math.sqrt(n2) for v, n2 in zip(self.dirs, self.norm2)])
        cos = np.tensordot(units, grad, axes=([1], [0]))
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(pnorm > 0, np.abs(cos) / np.maximum(pnorm, 1e-300), 0.0)
        return np.argmax(cos, axis=0)

    def _upwind_drift(self, U, w):
        """sum_k b_k D_k u with monotone (upwind in w*b_k) differences."""
        h = self.h
        core_u = U[self.core]
        total = np.zeros_like(core_u)
        for k in range(self.n):
            v = tuple(1 if i == k else 0 for i in range(self.n))
            up = self._shift(U, v)
            dn = self._shift(U, tuple(-c for c in v))
            b = self.bvals[self.core + (k,)]
            fwd = (up - core_u) / h
            bwd = (core_u - dn) / h
            total += np.where(b > 0, b * bwd, b * fwd)
        return total

    def _quasi_lambda(self, grad):
        pts = np.moveaxis(grad, 0, -1).reshape(-1, self.n)
        lamp = np.array([float(self.spec.lambda_profile(p)) for p in pts])
        return lamp.reshape(grad.shape[1:])

    def _quasi_h(self, core_u, grad):
        g = self.grid
        xs = g.points.reshape(g.shape + (self.n,))[self.core]
        flat_x = xs.reshape(-1, self.n)
        flat_u = core_u.ravel()
        flat_p = np.moveaxis(grad, 0, -1).reshape(-1, self.n)
        vals = np.array(
            [float(self.spec.h_term(x, u, p)) for x, u, p in zip(flat_x, flat_u, flat_p)]
        )
        return vals.reshape(core_u.shape)

    # -- frozen linearization for policy / jacobi ----------------------
    def frozen_coefficients(self, U):
        """Per-direction coefficients a_v >= 0 and affine remainder pieces.

        The frozen operator is
            F_lin(u) = sum_v a_v * (2 u - u_+v - u_-v) / (h^2 |v|^2)
                       + drift(u) + prop * u + const,
        matching the true residual at the current iterate.
        """
        spec = self.spec
        lam, Lam = self.params.lambda_F, self.params.Lambda_F
        d = self.second_differences(U)
        core_u = U[self.core]
        ndirs = len(self.dirs)
        a = np.zeros((ndirs,) + core_u.shape)
        prop = np.zeros_like(core_u)
        const = np.zeros_like(core_u)
        drift = None  # (k -> coefficient field) for upwinded first-order terms
        if spec.kind in ("pucci_plus", "pucci_minus", "homog_family"):
            sign = +1 if (spec.kind == "pucci_plus" or (spec.kind == "homog_family" and spec.core == "pucci_plus")) else -1
            _, best = self._frame_values(d, sign)
            if sign > 0:
                coef = np.where(d > 0, lam, Lam)
            else:
                coef = np.where(d > 0, Lam, lam)
            for fi, f in enumerate(self.frames):
                sel = best == fi
                for di in f:
                    a[di][sel] = coef[di][sel]
            if spec.kind == "homog_family":
                grad = self.central_gradient(U)
                pnorm = np.sqrt(np.sum(grad**2, axis=0))
                w = self._gradient_factor(pnorm)
                a *= w[None]
                if self.bvals is not None:
                    drift = [w * self.bvals[self.core + (k,)] for k in range(self.n)]
                if spec.c:
                    prop = prop + spec.c * np.abs(core_u) ** spec.alpha
                if self.f0vals is not None:
                    const = const + self.f0vals[self.core]
        elif spec.kind == "laplace":
            for k in range(self.n):
                a[k] = 1.0
        elif spec.kind == "m_laplace":
            grad = self.central_gradient(U)
            pnorm = np.sqrt(np.sum(grad**2, axis=0))
            w = self._gradient_factor(pnorm)
            dir_idx = self._nearest_direction(grad, pnorm)
            for di in range(ndirs):
                sel = dir_idx == di
                if not sel.any():
                    continue
                for k in self._frame_of(di):
                    a[k][sel] = (w * (spec.m - 1.0 if k == di else 1.0))[sel]
        elif spec.kind == "quasilinear":
            grad = self.central_gradient(U)
            lamp = self._quasi_lambda(grad)
            for k in range(self.n):
                a[k] = lamp
            if spec.h_term is not None:
                const = const + self._quasi_h(core_u, grad)
        if self.fvals is not None and spec.kind != "homog_family":
            const = const + self.fvals[self.core]
        return a, drift, prop, const


def _assemble(scheme, a, drift, prop, U, boundary):
    """Sparse system F_lin(u) = 0 over the unknowns; Dirichlet to the RHS."""
    g = scheme.grid
    n = scheme.n
    h = scheme.h
    core = scheme.core
    unknown_core = scheme.unknown[core]
    ids = -np.ones(g.shape, dtype=np.int64)
    nunk = int(unknown_core.sum())
    ids[scheme.unknown] = np.arange(nunk)
    ids_core = ids[core]
    rows, cols, vals = [], [], []
    rhs = np.zeros(nunk)
    diag = np.zeros(nunk)
    sel = unknown_core
    my_ids = ids_core[sel]

    def add_neighbor(vec, coef_core):
        """coef_core * u(x + vec): into matrix or RHS."""
        coef = coef_core[sel]
        nz = coef != 0.0
        if not nz.any():
            return
        idx_core = np.argwhere(sel)
        tgt = idx_core + np.asarray(vec)
        tgt_full = tuple((tgt + 1).T)
        tgt_ids = ids[tgt_full]
        bvals = boundary[tgt_full]
        interior = tgt_ids >= 0
        m = nz & interior
        if m.any():
            rows.append(my_ids[m])
            cols.append(tgt_ids[m])
            vals.append(coef[m])
        m = nz & ~interior
        if m.any():
            rhs[my_ids[m]] -= coef[m] * bvals[m]

    for v, n2, a_v in zip(scheme.dirs, scheme.norm2, a):
        c = a_v / (h * h * n2)
        diag[my_ids] += 2.0 * c[sel]
        add_neighbor(v, -c)
        add_neighbor(tuple(-x for x in v), -c)
    if drift is not None:
        for k in range(n):
            b = drift[k]
            v = tuple(1 if i == k else 0 for i in range(n))
            pos = np.where(b > 0, b / h, 0.0)
            neg = np.where(b < 0, -b / h, 0.0)
            diag[my_ids] += (pos + neg)[sel]
            add_neighbor(tuple(-x for x in v), -pos)
            add_neighbor(v, -neg)
    diag[my_ids] += prop[sel]
    rows.append(my_ids)
    cols.append(my_ids)
    vals.append(diag[my_ids].copy())
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nunk, nunk),
    )
    # guard fully degenerate rows (vanishing gradient factor)
    zero_rows = np.asarray(np.abs(A).sum(axis=1)).ravel() == 0.0
    if zero_rows.any():
        fix = sp.diags(zero_rows.astype(float))
        A = A + fix
        cur = U[core][sel]
        rhs[zero_rows] += cur[zero_rows]
    return A, rhs


def solve(problem, tol_solve=1e-9, max_iter=60, method="policy", damping=0.8):
    """Drive the monotone residual below tol_solve.

    Non-convergence returns converged=False with the residual history
    attached; the partial iterate is still reported, never silently.
    """
    scheme = _Scheme(problem)
    g = problem.grid
    boundary = problem.boundary_data.values.copy()
    U = boundary.copy()
    history = []
    iterations = 0
    sel = scheme.unknown[scheme.core]
    for iterations in range(1, max_iter + 1):
        res = scheme.residual(U)
        res_sup = float(np.max(np.abs(res[sel])))
        history.append(res_sup)
        if res_sup <= tol_solve:
            return SolveResult(
                GridFunction(g, U, "solution"), res_sup, iterations - 1, True,
                method, scheme.eps, history,
            )
        a, drift, prop, const = scheme.frozen_coefficients(U)
        if method == "policy":
            A, rhs = _assemble(scheme, a, drift, prop, U, boundary)
            rhs = rhs - const[sel]
            unew = spla.spsolve(A.tocsc(), rhs)
            Unew = U.copy()
            Unew[scheme.unknown] = unew
            U = Unew
        elif method == "jacobi":
            # conservative slope: the largest diagonal any frame can produce,
            # so every linear piece of the extremal residual is non-expansive
            # and the sup-residual decreases monotonically under damping <= 1
            h2 = scheme.h * scheme.h
            s_max = max(sum(1.0 / scheme.norm2[i] for i in f) for f in scheme.frames)
            w = scheme.gradient_factor_field(U)
            mfac = max(abs(scheme.spec.m - 1.0), 1.0) if scheme.spec.kind == "m_laplace" else 1.0
            slope = 2.0 * scheme.params.Lambda_F * mfac * s_max * w / h2 + prop
            if drift is not None:
                slope = slope + sum(np.abs(b) / scheme.h for b in drift)
            slope = np.maximum(slope, 1e-12 / h2)
            Unew = U.copy()
            core_new = U[scheme.core] - damping * res / slope
            Unew[scheme.core] = np.where(sel, core_new, U[scheme.core])
            U = Unew
        else:
            raise ValueError(f"unknown method {method!r}")
    res = scheme.residual(U)
    res_sup = float(np.max(np.abs(res[sel])))
    history.append(res_sup)
    return SolveResult(
        GridFunction(g, U, "solution"), res_sup, iterations, False,
        method, scheme.eps, history,
    )


# ---------------------------------------------------------------------------
# Radial test functions with analytic derivative oracles
# ---------------------------------------------------------------------------

class RadialOracle:
    """Gradient/Hessian of u(x) = profile(|x - center|) from closed forms."""

    def __init__(self, g, g1, g2, center):
        self.g, self.g1, self.g2 = g, g1, g2
        self.center = np.asarray(center, dtype=float)

    def gradient(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float)) - self.center
        rho = float(np.linalg.norm(x))
        if rho == 0.0:
            if abs(self.g1(0.0)) > 1e-14:
                raise ValueError("radial profile has a kink at the origin")
            return np.zeros(len(x))
        return self.g1(rho) * x / rho

    def hessian(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float)) - self.center
        n = len(x)
        rho = float(np.linalg.norm(x))
        if rho == 0.0:
            if abs(self.g1(0.0)) > 1e-14:
                raise ValueError("radial profile has a kink at the origin")
            return self.g2(0.0) * np.eye(n)
        xhat = x / rho
        P = np.outer(xhat, xhat)
        return self.g2(rho) * P + (self.g1(rho) / rho) * (np.eye(n) - P)

    def hessian_eigs(self, rho):
        """(radial, tangential) eigenvalues at radius rho > 0."""
        return self.g2(rho), self.g1(rho) / rho


def generate_radial(profile, d_profile, dd_profile, grid, center=None, name="radial"):
    """Sample profile(|x - center|) on the grid, with its derivative oracle."""
    center = np.asarray(grid.center, dtype=float) if center is None else np.asarray(center, dtype=float)

    def fn(X):
        rho = np.linalg.norm(X - center, axis=1)
        return np.asarray(profile(rho), dtype=float)

    u = grid_function_from_callable(grid, fn, name)
    return u, RadialOracle(profile, d_profile, dd_profile, center)


# ---------------------------------------------------------------------------
# Rescaling calculus
# ---------------------------------------------------------------------------

def rescale(u, params, x0, t0, M0, R0, npts=None):
    """Window u through T(y) = x0 + t0 y onto the reference cube of side R0.

    Returns (u_s, params_s) with u_s(y) = u(T(y)) / M0 resampled by
    multilinear interpolation, and the transformed structure data
        M_s = t0 M_F / M0,  gamma_s = t0^2 gamma_F,
        sigma_s = t0 sigma o T,  f_s = (t0^2 / M0) f o T,
        sigma2_s = M0 sigma2.
    """
    if t0 <= 0 or M0 <= 0:
        raise ValueError("t0 and M0 must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    g = u.grid
    target = Grid(tuple(0.0 for _ in range(g.n)), float(R0), npts or g.npts)
    pts = x0 + t0 * target.points
    lo = np.asarray(g.center) - 0.5 * g.side
    hi = np.asarray(g.center) + 0.5 * g.side
    if np.any(pts < lo - 1e-9 * g.side) or np.any(pts > hi + 1e-9 * g.side):
        raise ValueError("rescaling window escapes the source grid")
    pts = np.clip(pts, lo, hi)
    u_s = GridFunction(target, (u.interp(pts) / M0).reshape(target.shape), u.name + "_scaled")

    def move(fld, scale):
        if fld is None:
            return None
        vals = scale * fld.interp(pts).reshape(target.shape)
        return GridFunction(target, vals, fld.name + "_scaled")

    params_s = StructureParams(
        lambda_F=params.lambda_F,
        Lambda_F=params.Lambda_F,
        M_F=t0 * params.M_F / M0,
        gamma_F=t0**2 * params.gamma_F,
        sigma2=M0 * params.sigma2,
        sigma_field=move(params.sigma_field, t0),
        f_field=move(params.f_field, t0**2 / M0),
    )
    return u_s, params_s


# ---------------------------------------------------------------------------
# Cole-Hopf transform
# ---------------------------------------------------------------------------

def cole_hopf_profile(t, lambda_F, sigma2):
    """(h, h', h'') of the gradient-absorbing change of unknown.

    h(t) = (lambda/sigma2) log(1 / (1 - sigma2 t / lambda)) solves
    lambda h'' = sigma2 (h')^2 with h(0) = 0, h'(0) = 1.
    """
    t = np.asarray(t, dtype=float)
    if sigma2 == 0.0:
        one = np.ones_like(t)
        return t.copy(), one, np.zeros_like(t)
    z = 1.0 - sigma2 * t / lambda_F
    if np.any(z <= 0):
        raise ValueError("argument outside the transform domain t < lambda/sigma2")
    h = -(lambda_F / sigma2) * np.log(z)
    h1 = 1.0 / z
    h2 = (sigma2 / lambda_F) / z**2
    return h, h1, h2


def cole_hopf(u, lambda_F, sigma2):
    """v = h^{-1}(u) = (lambda/sigma2)(1 - exp(-sigma2 u / lambda)), pointwise.

    Removes a quadratic gradient term from supersolutions; sigma2 = 0 is
    the declared degenerate case and returns u unchanged.
    """
    if np.min(u.values) < -1e-12 * max(1.0, np.max(np.abs(u.values))):
        raise ValueError("cole_hopf requires a nonnegative input")
    if sigma2 == 0.0:
        return u.with_values(u.values, name=u.name + "_colehopf")
    vals = (lambda_F / sigma2) * (1.0 - np.exp(-sigma2 * np.maximum(u.values, 0.0) / lambda_F))
    return u.with_values(vals, name=u.name + "_colehopf")
