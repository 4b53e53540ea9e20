"""Explicit radial barrier with fully closed-form constants and derivatives.

The barrier is M1 - M2 |x|^(-alpha) outside a core ball, glued at radius
r/4 to a radial quintic that flattens to zero slope at the origin.  Five
properties are certified, all by dense sampling against closed forms:

  nonneg_far        phi >= 0 outside B_R
  inner_upper       phi <= -2 on the cube of side 3r
  global_lower      phi >= -M_B everywhere
  gradient_bound    |D phi| <= eps0 everywhere
  pucci_drift       P-(D^2 phi) + C_B xi >= 0 everywhere,

with xi a smoothstep bump equal to 1 on the cube of side r/2 and
supported in the closed cube of side r.

Constant recipe.  With beta = (Lambda/lambda)(n-1):

  alpha = max(0, beta - 1) + 1          (one above the sign threshold)
  q     = 3^(1/alpha)                   (so the far/near constraint gap is 1)
  r     = c(alpha) * alpha * ((3/2) sqrt(n))^alpha / eps0
  R     = q (3r/2) sqrt(n),   M1 = 2,   M2 = (M1 + 2) ((3r/2) sqrt(n))^alpha

where c(alpha) = 2 eta(alpha) 4^(alpha+2) and eta(alpha) is the exact
overshoot of the quintic's slope.  The power-law formula then extends
down to r/4 (inside the bump's plateau), its slope peaks at eps0/(2 eta)
there, and the quintic's slope peaks at eps0/2: the gradient bound holds
with a factor-2 margin while the extremal-operator sign condition holds
wherever the bump is below 1.  The products eps0*r and hence M_B are
independent of eps0, so M_B is universal in the required sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .report import VerificationReport

__all__ = ["BarrierSpec", "build_barrier", "verify_barrier"]

BARRIER_PROPERTIES = (
    "nonneg_far",
    "inner_upper",
    "global_lower",
    "gradient_bound",
    "pucci_drift",
)


def _overshoot(alpha):
    # max over [0,1] of (alpha+5) s^3 - (alpha+4) s^4, the quintic slope shape
    return 27.0 * (alpha + 5.0) ** 4 / (256.0 * (alpha + 4.0) ** 3)


@dataclass(frozen=True)
class BarrierSpec:
    """Closed-form barrier: constants plus value/gradient/Hessian evaluators."""

    n: int
    lambda_F: float
    Lambda_F: float
    eps0: float
    alpha: float
    q_factor: float
    r: float
    R: float
    M1: float
    M2: float
    M_B: float
    C_B: float
    # glue data: junction radius and quintic coefficients P = a0 + a4 t^4 + a5 t^5
    h0: float
    a0: float
    a4: float
    a5: float

    def profile(self, rho):
        """(P, P', P'/rho, P'') of the radial profile, vectorized in rho."""
        rho = np.asarray(rho, dtype=float)
        outer = rho >= self.h0
        safe = np.where(outer, rho, self.h0)
        powa = safe ** (-self.alpha)
        val_o = self.M1 - self.M2 * powa
        d1_o = self.alpha * self.M2 * powa / safe
        d2_o = -self.alpha * (self.alpha + 1.0) * self.M2 * powa / safe**2
        lt_o = d1_o / safe
        val_i = self.a0 + rho**4 * (self.a4 + self.a5 * rho)
        d1_i = rho**3 * (4.0 * self.a4 + 5.0 * self.a5 * rho)
        lt_i = rho**2 * (4.0 * self.a4 + 5.0 * self.a5 * rho)
        d2_i = rho**2 * (12.0 * self.a4 + 20.0 * self.a5 * rho)
        P = np.where(outer, val_o, val_i)
        P1 = np.where(outer, d1_o, d1_i)
        Lt = np.where(outer, lt_o, lt_i)
        P2 = np.where(outer, d2_o, d2_i)
        return P, P1, Lt, P2

    def depth_above_bottom(self, rho):
        """phi(rho) - phi(0), computed without catastrophic cancellation."""
        rho = np.asarray(rho, dtype=float)
        outer = rho >= self.h0
        safe = np.where(outer, rho, self.h0)
        val_o = (self.M1 - self.a0) - self.M2 * safe ** (-self.alpha)
        val_i = rho**4 * (self.a4 + self.a5 * rho)
        return np.where(outer, val_o, val_i)

    def phi(self, x):
        """(value, gradient, Hessian) at a single point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        rho = float(np.linalg.norm(x))
        P, P1, Lt, P2 = (float(v) for v in self.profile(rho))
        if rho == 0.0:
            return P, np.zeros(self.n), np.zeros((self.n, self.n))
        xhat = x / rho
        grad = P1 * xhat
        H = P2 * np.outer(xhat, xhat) + Lt * (np.eye(self.n) - np.outer(xhat, xhat))
        return P, grad, H

    def xi(self, x):
        """Smoothstep bump: 1 on the cube of side r/2, 0 outside side r."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sup = np.max(np.abs(x), axis=-1)
        t = np.clip((0.5 * self.r - sup) / (0.25 * self.r), 0.0, 1.0)
        out = t * t * (3.0 - 2.0 * t)
        return float(out[0]) if out.size == 1 else out

    def pucci_minus_radial(self, P2, Lt):
        """P- of the radial Hessian with eigenvalues (P2, Lt x (n-1))."""
        lam, Lam = self.lambda_F, self.Lambda_F
        pos = np.maximum(P2, 0.0) + (self.n - 1) * np.maximum(Lt, 0.0)
        neg = np.maximum(-P2, 0.0) + (self.n - 1) * np.maximum(-Lt, 0.0)
        return -Lam * pos + lam * neg

    def constants_block(self):
        keys = ("n", "lambda_F", "Lambda_F", "eps0", "alpha", "q_factor", "r", "R", "M1", "M2", "M_B", "C_B")
        return "\n".join(f"{k} = {format(getattr(self, k), '.17g')}" for k in keys)


def build_barrier(n, lambda_F, Lambda_F, eps0):
    """Barrier constants from the deterministic recipe; total for valid input."""
    if not 0 < lambda_F <= Lambda_F:
        raise ValueError("need 0 < lambda_F <= Lambda_F")
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    if n not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    beta = (Lambda_F / lambda_F) * (n - 1)
    alpha = max(0.0, beta - 1.0) + 1.0
    q = 3.0 ** (1.0 / alpha)
    eta = _overshoot(alpha)
    half_diag = 1.5 * math.sqrt(n)
    c_r = 2.0 * eta * 4.0 ** (alpha + 2.0)
    r = c_r * alpha * half_diag**alpha / eps0
    R = q * (r * half_diag)
    K = (r * half_diag) ** alpha
    M1 = 2.0
    M2 = (M1 + 2.0) * K

    h0 = r / 4.0
    g0 = alpha * M2 * h0 ** (-alpha - 1.0)  # slope at the junction, = eps0/(2 eta)
    a4 = (alpha + 5.0) * g0 / (4.0 * h0**3)
    a5 = -(alpha + 4.0) * g0 / (5.0 * h0**4)
    v0 = M1 - M2 * h0 ** (-alpha)
    a0 = v0 - h0 * g0 * (alpha + 9.0) / 20.0
    M_B = -a0

    spec = BarrierSpec(
        n=n, lambda_F=lambda_F, Lambda_F=Lambda_F, eps0=eps0,
        alpha=alpha, q_factor=q, r=r, R=R, M1=M1, M2=M2,
        M_B=M_B, C_B=0.0, h0=h0, a0=a0, a4=a4, a5=a5,
    )
    # Worst extremal value over the glue region fixes the drift constant;
    # outside the glue the sign condition holds with a strict margin.
    rho = np.linspace(0.0, h0, 20001)
    _, _, Lt, P2 = spec.profile(rho)
    worst = float(np.min(spec.pucci_minus_radial(P2, Lt)))
    C_B = max(0.0, -worst) * (1.0 + 1e-9) + 1e-12 * max(1.0, abs(worst))
    return BarrierSpec(
        n=n, lambda_F=lambda_F, Lambda_F=Lambda_F, eps0=eps0,
        alpha=alpha, q_factor=q, r=r, R=R, M1=M1, M2=M2,
        M_B=M_B, C_B=C_B, h0=h0, a0=a0, a4=a4, a5=a5,
    )


def _sample_points(spec, n_samples, seed):
    rng = np.random.default_rng(seed)
    n = spec.n
    special = np.array([
        0.0, 1e-6 * spec.h0, 0.25 * spec.h0, 0.5 * spec.h0, 0.999 * spec.h0,
        spec.h0, 1.001 * spec.h0, 0.5 * spec.r, spec.r, 1.5 * spec.r * math.sqrt(n),
        spec.R, 1.0001 * spec.R, 1.5 * spec.R, 2.0 * spec.R,
    ])
    m = n_samples - special.size
    radii = np.concatenate([
        special,
        np.linspace(0.0, spec.h0, m // 4),
        np.geomspace(spec.h0, 2.0 * spec.R, m - m // 4 - m // 4),
        np.linspace(0.25 * spec.r, 3.0 * spec.r, m // 4),
    ])
    if n == 1:
        dirs = rng.choice([-1.0, 1.0], size=radii.size)[:, None]
    else:
        dirs = rng.standard_normal((radii.size, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = radii[:, None] * dirs
    # exact cube corners of the inner upper-bound region and the bump edge
    corner = np.full(n, 1.5 * spec.r)
    pts = np.vstack([pts, corner, -corner, np.full(n, 0.5 * spec.r), np.full(n, 0.25 * spec.r)])
    return pts


def verify_barrier(spec, n_samples=10**4, seed=11, fd_check=True):
    """Dense-sample verification of the five barrier properties.

    Values, gradients and Hessians come from closed forms; near the glue
    radius the Hessian is additionally cross-checked by central finite
    differences.  Returns a dict of VerificationReports keyed by property
    name (plus 'stitch_fd' for the cross-check).
    """
    pts = _sample_points(spec, n_samples, seed)
    rho = np.linalg.norm(pts, axis=1)
    P, P1, Lt, P2 = spec.profile(rho)
    mminus = spec.pucci_minus_radial(P2, Lt)
    xi = spec.xi(pts)
    sup = np.max(np.abs(pts), axis=1)

    reports = {}
    tol8 = 1e-8 * max(1.0, spec.M1)
    rep = VerificationReport("nonneg_far", tol8)
    for v in P[rho >= spec.R]:
        rep.record(float(v))
    reports["nonneg_far"] = rep

    rep = VerificationReport("inner_upper", 1e-8 * max(1.0, abs(spec.M1) + 4.0))
    for v in P[sup <= 1.5 * spec.r]:
        rep.record(float(-2.0 - v))
    reports["inner_upper"] = rep

    rep = VerificationReport("global_lower", 1e-8 * max(1.0, spec.M_B))
    for v in spec.depth_above_bottom(rho):
        rep.record(float(v))
    reports["global_lower"] = rep

    rep = VerificationReport("gradient_bound", 1e-8 * max(1.0, spec.eps0))
    for v in np.abs(P1):
        rep.record(float(spec.eps0 - v))
    reports["gradient_bound"] = rep

    scale12 = max(1.0, spec.C_B)
    rep = VerificationReport("pucci_drift", 1e-8 * scale12)
    for v in mminus + spec.C_B * xi:
        rep.record(float(v))
    reports["pucci_drift"] = rep

    if fd_check:
        rep = VerificationReport("stitch_fd", 0.05)
        rng = np.random.default_rng(seed + 1)
        radii = spec.h0 * (1.0 + np.linspace(-2e-3, 2e-3, 41))
        delta = 1e-4 * spec.h0
        scale = spec.Lambda_F * spec.n * (spec.eps0 / spec.h0) + np.max(np.abs(mminus))
        for rr in radii:
            if spec.n == 1:
                x = np.array([rr])
            else:
                d = rng.standard_normal(spec.n)
                x = rr * d / np.linalg.norm(d)
            H_fd = _fd_hessian_closed(spec, x, delta)
            e = np.linalg.eigvalsh(H_fd)
            m_fd = -spec.Lambda_F * np.sum(np.maximum(e, 0)) + spec.lambda_F * np.sum(np.maximum(-e, 0))
            _, _, lt, p2 = (float(v) for v in spec.profile(np.linalg.norm(x)))
            m_cf = float(spec.pucci_minus_radial(np.array(p2), np.array(lt)))
            rep.record(0.05 - abs(m_fd - m_cf) / scale)
        reports["stitch_fd"] = rep
    return reports


def _fd_hessian_closed(spec, x, delta):
    n = spec.n
    H = np.empty((n, n))
    def val(y):
        return float(spec.profile(np.linalg.norm(y))[0])
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = delta
        H[i, i] = (val(x + ei) - 2 * val(x) + val(x - ei)) / delta**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = delta
            H[i, j] = H[j, i] = (
                val(x + ei + ej) + val(x - ei - ej) - val(x + ei - ej) - val(x - ei + ej)
            ) / (4 * delta**2)
    return H
