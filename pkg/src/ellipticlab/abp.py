"""Maximum-principle verifier: interior dip of a supersolution vs. data.

The estimate under test bounds the interior negative part of a
supersolution on a ball by its boundary negative part plus a multiple of
the gradient threshold and the L^n mass of the forcing over the contact
set of the convex envelope:

    sup u^- <= sup_boundary u^- + C d (M_F + (int_contact (f^+)^n)^(1/n)),

with the fully explicit constant C = 3 exp(C0 (1 + ||sigma||_n^n)) and
C0 = n 2^(n-2) / (omega_n lambda_F^n).  Reports carry the margin signed,
never clipped: a negative margin is a finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Ball, SymMatrix, eigvals_sym, fd_gradient, fd_hessian, point_mask
from .envelope import convex_envelope
from .report import VerificationReport

__all__ = [
    "AbpReport",
    "abp_check",
    "abp_constant",
    "abp_singular_bound",
    "boundary_ring_mask",
    "pointwise_condition_check",
    "subjet_surrogates",
]


def unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def abp_constant(n, lambda_F, sigma_ln_norm=0.0):
    """C = 3 exp(C0 (1 + s^n)) with C0 = n 2^(n-2) / (omega_n lambda_F^n)."""
    if lambda_F <= 0:
        raise ValueError("lambda_F must be positive")
    c0 = n * 2.0 ** (n - 2) / (unit_ball_volume(n) * lambda_F**n)
    return 3.0 * math.exp(c0 * (1.0 + sigma_ln_norm**n))


@dataclass
class AbpReport:
    lhs: float
    m_partial: float
    contact_integral: float
    C_used: float
    rhs: float
    constants: dict = field(default_factory=dict)
    contact_integral_tol_half: float = float("nan")
    contact_integral_tol_double: float = float("nan")

    @property
    def margin(self):
        return self.rhs - self.lhs

    def to_dict(self):
        return {
            "lhs_sup_u_minus": self.lhs,
            "m_partial": self.m_partial,
            "contact_integral": self.contact_integral,
            "C_used": self.C_used,
            "rhs": self.rhs,
            "margin": self.margin,
            "constants": dict(self.constants),
            "contact_integral_tol_half": self.contact_integral_tol_half,
            "contact_integral_tol_double": self.contact_integral_tol_double,
        }

    def csv_row(self):
        keys = ("lhs", "m_partial", "contact_integral", "C_used", "rhs")
        vals = [getattr(self, k) for k in keys] + [self.margin]
        return ",".join(format(v, ".17g") for v in vals)


def boundary_ring_mask(grid, ball):
    """Grid points whose quadrature cell touches the sphere; conservative
    over-estimate of the boundary trace."""
    pts = grid.points
    c = np.asarray(ball.center)
    half = 0.5 * grid.h
    nearest = np.clip(c - pts, -half, half) + pts
    farthest = pts + np.sign(pts - c) * half
    dmin = np.linalg.norm(nearest - c, axis=1)
    dmax = np.linalg.norm(farthest - c, axis=1)
    return ((dmin <= ball.radius) & (dmax >= ball.radius)).reshape(grid.shape)


def _contact_integral(env, f_vals, grid, ball, tol):
    """(int over contact /\ ball of (f^+)^n)^(1/n) by cell counting."""
    n = grid.n
    start = (grid.npts - 1) // 2
    inner = tuple(slice(start, start + grid.npts) for _ in range(n))
    contact = np.abs(env.v_ext.values - env.gamma.values) <= tol
    mask = contact[inner] & point_mask(grid, ball, closed=True)
    fplus = np.maximum(f_vals, 0.0)
    return float(np.sum((fplus[mask]) ** n * grid.h**n) ** (1.0 / n))


def abp_check(u, ball, params, g_term=None, tol_contact=None, env=None):
    """Assemble the maximum-principle inequality for a supersolution u.

    u lives on the grid covering the ball's bounding cube; the forcing in
    the contact integral is g_term(x, -m_partial) when supplied, else the
    stored forcing field.  Returns the full report; a negative margin is
    reported, not raised.
    """
    grid = u.grid
    ring = boundary_ring_mask(grid, ball)
    u_minus = np.maximum(-u.values, 0.0)
    m_partial = float(np.max(u_minus[ring])) if ring.any() else 0.0
    inside = point_mask(grid, ball, closed=True)
    lhs = float(np.max(u_minus[inside]))
    if env is None:
        env = convex_envelope(u, m_partial, ball=ball, tol_contact=tol_contact)
    if g_term is not None:
        f_vals = np.array([g_term(x, -m_partial) for x in grid.points]).reshape(grid.shape)
    elif params.f_field is not None:
        f_vals = params.f_field.values
    else:
        f_vals = np.zeros(grid.shape)
    sigma_ln = 0.0
    if params.sigma_field is not None:
        from .core import lp_norm

        sigma_ln = lp_norm(params.sigma_field, grid.n, ball)
    K = _contact_integral(env, f_vals, grid, ball, env.tol_contact)
    K_half = _contact_integral(env, f_vals, grid, ball, 0.5 * env.tol_contact)
    K_double = _contact_integral(env, f_vals, grid, ball, 2.0 * env.tol_contact)
    C = abp_constant(grid.n, params.lambda_F, sigma_ln)
    rhs = m_partial + C * ball.radius * (params.M_F + K)
    return AbpReport(
        lhs=lhs,
        m_partial=m_partial,
        contact_integral=K,
        C_used=C,
        rhs=rhs,
        constants={
            "C_ABP": grid.n * 2.0 ** (grid.n - 2) / (unit_ball_volume(grid.n) * params.lambda_F**grid.n),
            "sigma_Ln": sigma_ln,
            "M_F": params.M_F,
            "d": ball.radius,
            "tol_contact": env.tol_contact,
            "envelope_sweeps": env.sweeps,
        },
        contact_integral_tol_half=K_half,
        contact_integral_tol_double=K_double,
    )


def abp_singular_bound(K, alpha, d, C):
    """min over M_F > 0 of C d (M_F + K / M_F^alpha), closed form.

    For alpha > 0 and K > 0 the minimizer is (alpha K)^(1/(1+alpha)) and
    the value scales exactly like K^(1/(1+alpha)); alpha = 0 degenerates
    to the threshold-free form C d K.
    """
    if K < 0:
        raise ValueError("contact integral must be >= 0")
    if alpha < 0:
        raise ValueError("the singular branch uses a modified gradient weight; alpha >= 0 only")
    if K == 0.0:
        return 0.0
    if alpha == 0.0:
        return C * d * K
    mstar = (alpha * K) ** (1.0 / (1.0 + alpha))
    return C * d * (mstar + K / mstar**alpha)


# ---------------------------------------------------------------------------
# Pointwise trace condition on sub-tangency data
# ---------------------------------------------------------------------------

def subjet_surrogates(u, psd_tol=None, max_points=None, domain=None, clearance_cells=2):
    """Discrete stand-ins for touching-from-below data: interior points
    where the central Hessian is PSD (a paraboloid with that Hessian
    touches locally from below).  Yields (x, p, A) triples.

    When a domain is given, only points at least clearance_cells inside it
    contribute, so stencils never straddle glued boundary data.
    """
    g = u.grid
    tol = 10.0 * g.h if psd_tol is None else psd_tol
    out = []
    clearance = clearance_cells * g.h
    it = np.ndindex(*(g.npts - 2 for _ in range(g.n)))
    for off in it:
        idx = tuple(i + 1 for i in off)
        x = g.coords(idx)
        if domain is not None:
            if isinstance(domain, Ball):
                if np.linalg.norm(x - np.asarray(domain.center)) > domain.radius - clearance:
                    continue
            else:
                if np.max(np.abs(x - np.asarray(domain.center))) > 0.5 * domain.side - clearance:
                    continue
        H = fd_hessian(u, x)
        if eigvals_sym(H.mat)[0] >= -tol:
            out.append((x, fd_gradient(u, x), H))
            if max_points is not None and len(out) >= max_points:
                break
    return out


def pointwise_condition_check(u, params, samples=None, tol=None, domain=None):
    """Trace inequality lambda_F Tr A <= sigma |p| + f at qualifying points.

    Checked where u <= 0, A is PSD and |p| clears the gradient threshold;
    other samples are skipped and counted.  samples defaults to the
    discrete sub-tangency surrogates of u (restricted to domain if given,
    which is where u actually is a supersolution).
    """
    g = u.grid
    tol = 10.0 * g.h if tol is None else tol
    if samples is None:
        samples = subjet_surrogates(u, domain=domain)
    rep = VerificationReport("pointwise_trace_condition", tol)
    for x, p, A in samples:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        uval = float(u.interp(x))
        pnorm = float(np.linalg.norm(np.atleast_1d(p)))
        Amat = A.mat if isinstance(A, SymMatrix) else np.asarray(A, dtype=float)
        if uval > 0 or pnorm < params.M_F or eigvals_sym(Amat)[0] < -tol:
            rep.skip()
            continue
        margin = params.sigma_at(x) * pnorm + params.f_at(x) - params.lambda_F * float(np.trace(Amat))
        rep.record(margin, detail={"x": list(map(float, x)), "margin": float(margin)})
    return rep
