"""Extremal (Pucci) operators, model nonlinearities, structure-condition checks.

The maximal operator is the support function of the negated ellipticity
interval,

    P+(M) = sup { -Tr(A M) : lambda I <= A <= Lambda I },

evaluated in closed form through the eigenvalues of M:
P+(M) = -lambda * sum(e_i^+) + Lambda * sum(e_i^-), and
P-(M) = -P+(-M).  The model families below (m-Laplace, positively
homogeneous cores with drift, isotropic quasilinear operators) are the
equations the growth conditions are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import GridFunction, StructureParams, as_matrix, eigvals_sym
from .report import VerificationReport

__all__ = [
    "OperatorSpec",
    "SingularGradientError",
    "check_h2",
    "check_structure",
    "eval_operator",
    "operator_from_config",
    "operator_to_config",
    "pucci_minus",
    "pucci_plus",
]

STRUCTURE_CONDITIONS = ("strict_ell", "super", "sub", "super_quad", "sub_quad")


class SingularGradientError(ValueError):
    """Raised when a singular operator is evaluated at gradient zero."""


def pucci_plus(M, lambda_F, Lambda_F):
    """Maximal extremal value, closed form over the eigenvalues of M."""
    if not 0 < lambda_F <= Lambda_F:
        raise ValueError("need 0 < lambda_F <= Lambda_F")
    e = eigvals_sym(as_matrix(M))
    return float(-lambda_F * np.sum(np.maximum(e, 0.0)) + Lambda_F * np.sum(np.maximum(-e, 0.0)))


def pucci_minus(M, lambda_F, Lambda_F):
    """Minimal extremal value via the duality P-(M) = -P+(-M)."""
    return -pucci_plus(-as_matrix(M), lambda_F, Lambda_F)


def _pucci_plus_eigs(e, lam, Lam):
    # batched closed form; e has eigenvalues on the last axis
    return -lam * np.sum(np.maximum(e, 0.0), axis=-1) + Lam * np.sum(np.maximum(-e, 0.0), axis=-1)


# ---------------------------------------------------------------------------
# Operator specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorSpec:
    """One of the model nonlinearities F(x, u, p, X).

    kind:
      pucci_plus / pucci_minus  extremal operator of X alone
      laplace                   -Tr(X)
      m_laplace                 -|p|^(m-2) (Tr X + (m-2) X phat.phat)
      homog_family              |p|^alpha core(X) + b(x).p |p|^alpha
                                + c u |u|^alpha + f0(x)
      quasilinear               -lam_profile(p) Tr(X) + h_term(x, u, p)
    """

    kind: str
    params: StructureParams
    m: float = 2.0
    alpha: float = 0.0
    core: str = "pucci_plus"
    b_field: tuple = ()
    c: float = 0.0
    f0_field: GridFunction | None = None
    lambda_profile: object = None
    h_term: object = None

    def __post_init__(self):
        kinds = ("pucci_plus", "pucci_minus", "laplace", "m_laplace", "homog_family", "quasilinear")
        if self.kind not in kinds:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "m_laplace" and self.m <= 1:
            raise ValueError("m_laplace requires m > 1")
        if self.kind == "homog_family":
            if self.alpha <= -1:
                raise ValueError("homogeneity exponent must be > -1")
            if self.core not in ("pucci_plus", "pucci_minus"):
                raise ValueError("core must be pucci_plus or pucci_minus")
            if self.c < 0:
                raise ValueError("zeroth-order coefficient c must be >= 0")
        object.__setattr__(self, "b_field", tuple(self.b_field))

    @property
    def is_singular(self):
        return self.kind == "homog_family" and self.alpha < 0


def _core_value(core, X, lam, Lam):
    return pucci_plus(X, lam, Lam) if core == "pucci_plus" else pucci_minus(X, lam, Lam)


def eval_operator(spec, x, u, p, X):
    """Evaluate F(x, u, p, X) for the given operator specification.

    Singular members (homogeneity exponent < 0) refuse p = 0 with an
    explicit SingularGradientError instead of returning NaN.
    """
    params = spec.params
    lam, Lam = params.lambda_F, params.Lambda_F
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    X = as_matrix(X)
    pnorm = float(np.linalg.norm(p))

    if spec.kind == "pucci_plus":
        return pucci_plus(X, lam, Lam)
    if spec.kind == "pucci_minus":
        return pucci_minus(X, lam, Lam)
    if spec.kind == "laplace":
        return float(-np.trace(X))
    if spec.kind == "m_laplace":
        m = spec.m
        if pnorm == 0.0:
            if m == 2.0:
                return float(-np.trace(X))
            if m > 2.0:
                return 0.0
            raise SingularGradientError("m-Laplace with m < 2 is singular at p = 0")
        phat = p / pnorm
        return float(-(pnorm ** (m - 2.0)) * (np.trace(X) + (m - 2.0) * phat @ X @ phat))
    if spec.kind == "homog_family":
        if pnorm == 0.0 and spec.alpha < 0:
            raise SingularGradientError("singular point: homogeneous operator with alpha < 0 at p = 0")
        w = pnorm ** spec.alpha if pnorm > 0 else (1.0 if spec.alpha == 0.0 else 0.0)
        val = w * _core_value(spec.core, X, lam, Lam)
        if spec.b_field:
            b = np.array([bf.interp(x) for bf in spec.b_field])
            val += float(b @ p) * w
        if spec.c:
            val += spec.c * u * abs(u) ** spec.alpha
        if spec.f0_field is not None:
            val += float(spec.f0_field.interp(x))
        return float(val)
    # quasilinear
    lam_p = float(spec.lambda_profile(p)) if spec.lambda_profile is not None else 1.0
    if lam_p < 0:
        raise ValueError("quasilinear ellipticity profile must be >= 0")
    val = -lam_p * float(np.trace(X))
    if spec.h_term is not None:
        val += float(spec.h_term(x, u, p))
    return val


# ---------------------------------------------------------------------------
# Structure conditions
# ---------------------------------------------------------------------------

def _condition_margin(condition, params, x, u, p, X, f_value):
    """Signed slack of the conclusion side; >= 0 means the sample conforms."""
    lam, Lam = params.lambda_F, params.Lambda_F
    pnorm = float(np.linalg.norm(p))
    sig = params.sigma_at(x)
    if condition == "strict_ell":
        return -lam * float(np.trace(as_matrix(X))) + sig * pnorm + params.gamma_F * u + f_value
    if condition in ("super", "super_quad"):
        val = pucci_plus(X, lam, Lam) + sig * pnorm + params.gamma_F * u + f_value
        if condition == "super_quad":
            val += params.sigma2 * pnorm**2
        return val
    if condition in ("sub", "sub_quad"):
        val = -(pucci_minus(X, lam, Lam) - sig * pnorm + params.gamma_F * u - f_value)
        if condition == "sub_quad":
            val += params.sigma2 * pnorm**2
        return val
    raise ValueError(f"unknown structure condition {condition!r}")


def check_structure(spec, condition, samples, tol=1e-10, f_override=None):
    """Check one growth condition on sampled (x, u, p, X) quadruples.

    For each sample the hypothesis side (gradient above threshold, the
    required sign of F, positive semidefiniteness for strict ellipticity)
    is tested first; samples failing it are counted as skipped, never as
    errors, so randomized sweeps stay informative.  f_override(x, u)
    replaces the stored forcing field when the conclusion needs a
    different f (e.g. threshold-normalized forcing).
    """
    if condition not in STRUCTURE_CONDITIONS:
        raise ValueError(f"unknown structure condition {condition!r}")
    params = spec.params
    rep = VerificationReport(f"structure:{condition}", tol)
    rep.constants = {
        "lambda_F": params.lambda_F,
        "Lambda_F": params.Lambda_F,
        "M_F": params.M_F,
        "gamma_F": params.gamma_F,
        "sigma2": params.sigma2,
    }
    needs_sign = +1 if condition in ("strict_ell", "super", "super_quad") else -1
    for i, (x, u, p, X) in enumerate(samples):
        pnorm = float(np.linalg.norm(np.atleast_1d(p)))
        if pnorm < params.M_F:
            rep.skip()
            continue
        if condition == "strict_ell" and eigvals_sym(as_matrix(X))[0] < -tol:
            rep.skip()
            continue
        try:
            F = eval_operator(spec, x, u, p, X)
        except SingularGradientError:
            rep.skip()
            continue
        if needs_sign * F < 0:
            rep.skip()
            continue
        f_value = f_override(x, u) if f_override is not None else params.f_at(x)
        margin = _condition_margin(condition, params, x, u, p, X, f_value)
        rep.record(margin, detail={"sample": i, "margin": float(margin)})
    return rep


def check_h2(spec, samples, tol=1e-10):
    """Two-sided extremal sandwich for the homogeneous core.

    For F0(p, X) = |p|^alpha core(X), each (p, M, N) sample must satisfy
        |p|^alpha P-(N) <= F0(p, M+N) - F0(p, M) <= |p|^alpha P+(N).
    """
    if spec.kind != "homog_family":
        raise ValueError("check_h2 applies to homog_family operators")
    lam, Lam = spec.params.lambda_F, spec.params.Lambda_F
    rep = VerificationReport("homogeneous_sandwich", tol)
    for i, (p, M, N) in enumerate(samples):
        pnorm = float(np.linalg.norm(np.atleast_1d(p)))
        if pnorm == 0.0 and spec.alpha < 0:
            rep.skip()
            continue
        w = pnorm**spec.alpha if pnorm > 0 else (1.0 if spec.alpha == 0.0 else 0.0)
        M = as_matrix(M)
        N = as_matrix(N)
        diff = w * (_core_value(spec.core, M + N, lam, Lam) - _core_value(spec.core, M, lam, Lam))
        lower = w * pucci_minus(N, lam, Lam)
        upper = w * pucci_plus(N, lam, Lam)
        scale = max(1.0, abs(lower), abs(upper))
        margin = min(diff - lower, upper - diff) / scale
        rep.record(margin, detail={"sample": i, "margin": float(margin)})
    return rep


# ---------------------------------------------------------------------------
# Config-format serialization (coefficient fields referenced by file path)
# ---------------------------------------------------------------------------

def operator_to_config(spec, field_paths=None):
    """Flat key=value mapping; grid-valued coefficients become file paths."""
    field_paths = field_paths or {}
    out = {
        "operator": spec.kind,
        "lambda_F": spec.params.lambda_F,
        "Lambda_F": spec.params.Lambda_F,
        "M_F": spec.params.M_F,
        "gamma_F": spec.params.gamma_F,
        "sigma2": spec.params.sigma2,
    }
    if spec.kind == "m_laplace":
        out["m"] = spec.m
    if spec.kind == "homog_family":
        out["alpha"] = spec.alpha
        out["core"] = spec.core
        out["c"] = spec.c
    for key in ("sigma_field", "f_field", "f0_field"):
        if key in field_paths:
            out[key] = field_paths[key]
    return out


def operator_from_config(cfg, load_field):
    """Build an OperatorSpec from a flat config mapping.

    load_field(path) resolves coefficient-field references; scalar keys
    missing from cfg fall back to their defaults.
    """
    kind = cfg["operator"]
    def fget(key):
        return load_field(cfg[key]) if key in cfg and cfg[key] else None
    params = StructureParams(
        lambda_F=float(cfg.get("lambda_F", 1.0)),
        Lambda_F=float(cfg.get("Lambda_F", cfg.get("lambda_F", 1.0))),
        M_F=float(cfg.get("M_F", 0.0)),
        gamma_F=float(cfg.get("gamma_F", 0.0)),
        sigma2=float(cfg.get("sigma2", 0.0)),
        sigma_field=fget("sigma_field"),
        f_field=fget("f_field"),
    )
    kwargs = {}
    if kind == "m_laplace":
        kwargs["m"] = float(cfg.get("m", 3.0))
    if kind == "homog_family":
        kwargs["alpha"] = float(cfg.get("alpha", 0.0))
        kwargs["core"] = cfg.get("core", "pucci_plus")
        kwargs["c"] = float(cfg.get("c", 0.0))
        f0 = fget("f0_field")
        if f0 is not None:
            kwargs["f0_field"] = f0
    return OperatorSpec(kind, params, **kwargs)
