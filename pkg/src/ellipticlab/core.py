"""Grids, domains, quadrature, stencils, and small symmetric-matrix algebra.

Foundation shared by every verifier in the lab: uniform corner-aligned
Cartesian grids over cubes and balls (dimension n in {1,2,3}), grid
functions with guaranteed-finite values, Lp quadrature (exact cell
clipping on cubes, cell-center membership on balls), central
finite-difference stencils, closed-form eigensolvers for n <= 3, and the
parallel sum of positive semidefinite matrices.

All objects are immutable after construction and all operations are pure,
so everything here is safe to call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "Ball",
    "Cube",
    "Grid",
    "GridFunction",
    "StructureParams",
    "SymMatrix",
    "cell_weights",
    "eig_sym",
    "eigvals_sym",
    "fd_gradient",
    "fd_hessian",
    "grid_function_from_callable",
    "load_grid_function",
    "lp_norm",
    "parallel_sum",
    "point_mask",
    "save_grid_function",
    "sup_inf_osc",
]


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cube:
    """Open axis-aligned cube: product of (c_i - side/2, c_i + side/2)."""

    center: tuple
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.side <= 0:
            raise ValueError("cube side must be positive")
        if not 1 <= len(self.center) <= 3:
            raise ValueError("dimension must be 1, 2 or 3")

    @property
    def n(self):
        return len(self.center)

    def bounding_cube(self):
        return self

    def contains(self, x, closed=True):
        """Membership test for points, vectorized over the leading axis."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = np.max(np.abs(x - np.asarray(self.center)), axis=-1)
        half = 0.5 * self.side
        return d <= half + 1e-12 * self.side if closed else d < half


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball of radius d."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        if not 1 <= len(self.center) <= 3:
            raise ValueError("dimension must be 1, 2 or 3")

    @property
    def n(self):
        return len(self.center)

    def bounding_cube(self):
        return Cube(self.center, 2.0 * self.radius)

    def contains(self, x, closed=True):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        return d <= self.radius * (1 + 1e-12) if closed else d < self.radius


# ---------------------------------------------------------------------------
# Grid and grid functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform corner-aligned grid on a bounding cube.

    npts is odd so the cube center is itself a grid point; spacing is
    h = side / (npts - 1) and points lie exactly on the closed cube.
    """

    center: tuple
    side: float
    npts: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.side <= 0:
            raise ValueError("grid side must be positive")
        if self.npts < 3 or self.npts % 2 == 0:
            raise ValueError("points per axis must be odd and >= 3")
        if not 1 <= len(self.center) <= 3:
            raise ValueError("dimension must be 1, 2 or 3")

    @property
    def n(self):
        return len(self.center)

    @property
    def h(self):
        return self.side / (self.npts - 1)

    @property
    def shape(self):
        return (self.npts,) * self.n

    @cached_property
    def axes(self):
        return tuple(
            c - 0.5 * self.side + self.h * np.arange(self.npts) for c in self.center
        )

    @cached_property
    def points(self):
        """All grid points as an (npts**n, n) array, C-ordered."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def coords(self, idx):
        return np.array([ax[i] for ax, i in zip(self.axes, idx)])

    def index_near(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.rint((x - np.asarray(self.center) + 0.5 * self.side) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx > self.npts - 1):
            raise ValueError(f"point {x} outside grid")
        return tuple(int(i) for i in idx)

    @property
    def center_index(self):
        return ((self.npts - 1) // 2,) * self.n

    def doubled(self):
        """Grid with the same spacing covering the cube of twice the side."""
        return Grid(self.center, 2.0 * self.side, 2 * self.npts - 1)

    def bounding_cube(self):
        return Cube(self.center, self.side)


class GridFunction:
    """Scalar field sampled on a Grid; values are finite and immutable."""

    def __init__(self, grid, values, name=""):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        self.grid = grid
        self.values = values.copy()
        self.values.setflags(write=False)
        self.name = name

    @cached_property
    def _interp(self):
        return RegularGridInterpolator(
            self.grid.axes, self.values, method="linear", bounds_error=True
        )

    def interp(self, x):
        """Multilinear interpolation at points x with shape (m, n) or (n,)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = self._interp(np.atleast_2d(x))
        return float(vals[0]) if single else vals

    def with_values(self, values, name=None):
        return GridFunction(self.grid, values, self.name if name is None else name)

    def __repr__(self):
        return f"GridFunction({self.name or 'unnamed'}, shape={self.values.shape})"


def grid_function_from_callable(grid, fn, name=""):
    """Sample fn (vectorized over an (m, n) point array) onto the grid."""
    vals = np.asarray(fn(grid.points), dtype=float).reshape(grid.shape)
    return GridFunction(grid, vals, name)


# ---------------------------------------------------------------------------
# Structure parameters (ellipticity and growth data)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureParams:
    """Ellipticity and growth data for the structure conditions.

    lambda_F <= Lambda_F are the extremal-operator ellipticity constants,
    M_F the gradient threshold below which the operator may degenerate,
    gamma_F the zeroth-order constant, sigma2 the quadratic-growth
    constant, and sigma_field / f_field the first-order and forcing
    coefficient fields (None means identically zero).
    """

    lambda_F: float
    Lambda_F: float
    M_F: float = 0.0
    gamma_F: float = 0.0
    sigma2: float = 0.0
    sigma_field: GridFunction | None = None
    f_field: GridFunction | None = None

    def __post_init__(self):
        if self.lambda_F <= 0:
            raise ValueError("lambda_F must be positive")
        if self.Lambda_F < self.lambda_F:
            raise ValueError("Lambda_F must be >= lambda_F")
        for name in ("M_F", "gamma_F", "sigma2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.sigma_field is not None and np.any(self.sigma_field.values < 0):
            raise ValueError("sigma field must be nonnegative")

    def sigma_at(self, x):
        return 0.0 if self.sigma_field is None else float(self.sigma_field.interp(x))

    def f_at(self, x):
        return 0.0 if self.f_field is None else float(self.f_field.interp(x))


# ---------------------------------------------------------------------------
# Symmetric matrices: closed-form eigenvalues for n <= 3
# ---------------------------------------------------------------------------

def _eigvals_2x2(a, b, c):
    # eigenvalues of [[a, b], [b, c]], ascending; vectorized
    m = 0.5 * (a + c)
    disc = np.sqrt((0.5 * (a - c)) ** 2 + b * b)
    return m - disc, m + disc


def eigvals_sym(mats):
    """Ascending eigenvalues of symmetric matrices with n in {1,2,3}.

    Accepts a single (n, n) matrix or a batch (..., n, n); closed forms
    only (quadratic formula for n=2, trigonometric Cardano form for n=3).
    """
    A = np.asarray(mats, dtype=float)
    n = A.shape[-1]
    if A.shape[-2] != n or n not in (1, 2, 3):
        raise ValueError("expected symmetric matrices with n in {1,2,3}")
    if n == 1:
        return A[..., 0, :].copy()
    if n == 2:
        lo, hi = _eigvals_2x2(A[..., 0, 0], A[..., 0, 1], A[..., 1, 1])
        return np.stack([lo, hi], axis=-1)

    # n == 3: trigonometric closed form, robust clamp on the acos argument
    q = np.trace(A, axis1=-2, axis2=-1) / 3.0
    off2 = A[..., 0, 1] ** 2 + A[..., 0, 2] ** 2 + A[..., 1, 2] ** 2
    dq = A[..., [0, 1, 2], [0, 1, 2]] - q[..., None]
    p2 = np.sum(dq * dq, axis=-1) + 2.0 * off2
    p = np.sqrt(p2 / 6.0)
    scale = np.where(p > 0, p, 1.0)
    B = (A - q[..., None, None] * np.eye(3)) / scale[..., None, None]
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e_hi = q + 2.0 * p * np.cos(phi)
    e_lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e_mid = 3.0 * q - e_hi - e_lo
    return np.stack([e_lo, e_mid, e_hi], axis=-1)


def _eigvec_for(A, w):
    """Unit eigenvector of 3x3 symmetric A for the eigenvalue w."""
    M = A - w * np.eye(3)
    # the nonzero cross product of two rows spans the kernel direction
    crosses = [np.cross(M[i], M[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    norms = [np.linalg.norm(c) for c in crosses]
    k = int(np.argmax(norms))
    if norms[k] < 1e-14 * max(1.0, np.linalg.norm(A)):
        # near multiple of the identity in this eigenspace
        v = np.zeros(3)
        v[int(np.argmin(np.abs(np.diag(M))))] = 1.0
        return v
    return crosses[k] / norms[k]


def _jacobi_polish(A, Q, sweeps=8):
    """Cyclic Jacobi rotations applied in the current basis until the
    off-diagonal mass of Q^T A Q is at rounding level."""
    B = Q.T @ A @ Q
    n = B.shape[0]
    tol = 1e-15 * max(1.0, np.linalg.norm(A))
    for _ in range(sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off = max(off, abs(B[i, j]))
                if abs(B[i, j]) <= tol:
                    continue
                theta = 0.5 * math.atan2(2.0 * B[i, j], B[i, i] - B[j, j])
                c, s = math.cos(theta), math.sin(theta)
                R = np.eye(n)
                R[i, i] = R[j, j] = c
                R[i, j] = s
                R[j, i] = -s
                B = R.T @ B @ R
                Q = Q @ R
        if off <= tol:
            break
    return B, Q


def eig_sym(M):
    """Eigen-decomposition (w ascending, Q orthonormal columns) for n <= 3.

    n=1 trivial, n=2 via the quadratic closed form, n=3 via the
    trigonometric closed form with a symmetric-deflation fallback when
    eigenvalues cluster; reconstruction Q diag(w) Q^T matches the input
    to 1e-12 relative.
    """
    A = np.asarray(M, dtype=float)
    if isinstance(M, SymMatrix):
        A = M.mat
    n = A.shape[0]
    if n == 1:
        return np.array([A[0, 0]]), np.array([[1.0]])
    if n == 2:
        w = eigvals_sym(A)
        b = A[0, 1]
        if abs(b) < 1e-300:
            order = np.argsort(np.diag(A), kind="stable")
            return np.diag(A)[order], np.eye(2)[:, order]
        theta = 0.5 * math.atan2(2.0 * b, A[0, 0] - A[1, 1])
        c, s = math.cos(theta), math.sin(theta)
        # columns ordered so Rayleigh quotients come out ascending
        V = np.array([[c, -s], [s, c]])
        w_cols = np.array([V[:, k] @ A @ V[:, k] for k in (0, 1)])
        order = np.argsort(w_cols, kind="stable")
        return w_cols[order], V[:, order]

    # n == 3: deflate with the most isolated eigenvalue first
    w = eigvals_sym(A)
    scale = max(1.0, float(np.max(np.abs(w))))
    gaps = np.array([
        min(abs(w[0] - w[1]), abs(w[0] - w[2])),
        min(abs(w[1] - w[0]), abs(w[1] - w[2])),
        min(abs(w[2] - w[0]), abs(w[2] - w[1])),
    ])
    if np.max(w) - np.min(w) <= 1e-10 * scale:
        Q = np.eye(3)
    else:
        k = int(np.argmax(gaps))
        v = _eigvec_for(A, w[k])
        # complete v to an orthonormal basis, then solve the deflated 2x2
        basis = np.eye(3)
        j = int(np.argmax(np.abs(v)))
        cols = [v] + [basis[:, i] for i in range(3) if i != j]
        Qb, _ = np.linalg.qr(np.stack(cols, axis=-1))
        if np.dot(Qb[:, 0], v) < 0:
            Qb[:, 0] = -Qb[:, 0]
        C = Qb[:, 1:].T @ A @ Qb[:, 1:]
        _, V2 = eig_sym(C)
        Q = np.column_stack([Qb[:, 0], Qb[:, 1:] @ V2])
    B = Q.T @ A @ Q
    offmass = np.max(np.abs(B - np.diag(np.diag(B))))
    if offmass > 1e-13 * scale:
        B, Q = _jacobi_polish(A, Q)
    w_out = np.diag(B)
    order = np.argsort(w_out, kind="stable")
    return w_out[order].copy(), Q[:, order]


@dataclass(frozen=True)
class SymMatrix:
    """Small real symmetric matrix stored as its packed upper triangle.

    Packing is row-major over the upper triangle: n=2 -> (a11, a12, a22),
    n=3 -> (a11, a12, a13, a22, a23, a33).
    """

    n: int
    packed: tuple

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError("n must be 1, 2 or 3")
        expect = self.n * (self.n + 1) // 2
        packed = tuple(float(v) for v in self.packed)
        if len(packed) != expect:
            raise ValueError(f"expected {expect} packed entries, got {len(packed)}")
        object.__setattr__(self, "packed", packed)

    @staticmethod
    def from_matrix(A):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("matrix must be square")
        if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("matrix is not symmetric")
        S = 0.5 * (A + A.T)
        iu = np.triu_indices(n)
        return SymMatrix(n, tuple(S[iu]))

    @staticmethod
    def diag(*entries):
        return SymMatrix.from_matrix(np.diag(np.asarray(entries, dtype=float)))

    @cached_property
    def mat(self):
        A = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        A[iu] = self.packed
        A = A + A.T - np.diag(np.diag(A))
        A.setflags(write=False)
        return A

    def eigvals(self):
        return eigvals_sym(self.mat)

    def eig(self):
        return eig_sym(self.mat)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.mat, dtype=dtype)


def as_matrix(M):
    """Accept SymMatrix or array-like, return a plain (n, n) float array."""
    if isinstance(M, SymMatrix):
        return M.mat
    return np.asarray(M, dtype=float)


# ---------------------------------------------------------------------------
# Parallel sum of PSD matrices
# ---------------------------------------------------------------------------

def parallel_sum(A, B, psd_tol=1e-10):
    """Parallel sum of two positive semidefinite matrices.

    Defined variationally by
        (A # B) xi . xi = inf_zeta { A(xi-zeta).(xi-zeta) + B zeta.zeta }.
    Computed on the eigenbasis of A+B where the minimizing zeta solves the
    reduced normal equations; null directions of A+B carry no energy.
    Rejects inputs that are not PSD (within psd_tol relative).
    """
    A = as_matrix(A)
    B = as_matrix(B)
    scale = max(1.0, np.abs(A).max(), np.abs(B).max())
    if eigvals_sym(A)[0] < -psd_tol * scale or eigvals_sym(B)[0] < -psd_tol * scale:
        raise ValueError("parallel_sum requires positive semidefinite inputs")
    S = A + B
    w, Q = eig_sym(S)
    wmax = max(w[-1], 0.0)
    inv = np.where(w > 1e-13 * max(1.0, wmax), 1.0 / np.where(w > 0, w, 1.0), 0.0)
    At = Q.T @ A @ Q
    Ct = At - At @ (inv[:, None] * At)
    C = Q @ Ct @ Q.T
    return 0.5 * (C + C.T)


# ---------------------------------------------------------------------------
# Quadrature and norms
# ---------------------------------------------------------------------------

def point_mask(grid, domain, closed=True):
    """Boolean mask (grid.shape) of grid points inside the domain."""
    return domain.contains(grid.points, closed=closed).reshape(grid.shape)


def cell_weights(grid, domain):
    """Quadrature weights per grid point for integrals over the domain.

    Each point owns the cell [x - h/2, x + h/2]^n.  On cubes the cell is
    clipped exactly against the box (constant fields integrate exactly);
    on balls a cell counts fully iff its center (the grid point) lies in
    the closed ball.
    """
    h = grid.h
    if isinstance(domain, Cube):
        w = np.ones(grid.shape)
        for k in range(grid.n):
            ax = grid.axes[k]
            lo = np.asarray(domain.center)[k] - 0.5 * domain.side
            hi = np.asarray(domain.center)[k] + 0.5 * domain.side
            overlap = np.minimum(ax + 0.5 * h, hi) - np.maximum(ax - 0.5 * h, lo)
            overlap = np.clip(overlap, 0.0, h)
            shape = [1] * grid.n
            shape[k] = grid.npts
            w = w * overlap.reshape(shape)
        return w
    if isinstance(domain, Ball):
        inside = point_mask(grid, domain, closed=True)
        return np.where(inside, h**grid.n, 0.0)
    raise TypeError(f"unsupported domain {type(domain)}")


def lp_norm(u, p, domain):
    """Midpoint-rule Lp norm of |u| over the domain (p in (0, inf]).

    p = inf returns the sup of |u| over contributing points.  Raises if
    the domain does not intersect the grid.
    """
    w = cell_weights(u.grid, domain)
    if not np.any(w > 0):
        raise ValueError("domain does not intersect the grid")
    if p == np.inf or p == math.inf:
        return float(np.max(np.abs(u.values)[w > 0]))
    if p <= 0:
        raise ValueError("p must be positive")
    return float(np.sum(w * np.abs(u.values) ** p) ** (1.0 / p))


def sup_inf_osc(u, domain):
    """(sup, inf, osc) of u over grid points in the closed domain."""
    mask = point_mask(u.grid, domain, closed=True)
    if not np.any(mask):
        raise ValueError("domain does not intersect the grid")
    vals = u.values[mask]
    sup, inf = float(np.max(vals)), float(np.min(vals))
    return sup, inf, sup - inf


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def _interior_index(u, x, depth=1):
    idx = u.grid.index_near(x)
    if any(i < depth or i > u.grid.npts - 1 - depth for i in idx):
        raise ValueError(f"point {x} too close to the grid boundary")
    return idx


def fd_gradient(u, x):
    """Second-order central gradient at the grid point nearest x."""
    idx = _interior_index(u, x)
    h = u.grid.h
    g = np.empty(u.grid.n)
    for k in range(u.grid.n):
        up = list(idx)
        dn = list(idx)
        up[k] += 1
        dn[k] -= 1
        g[k] = (u.values[tuple(up)] - u.values[tuple(dn)]) / (2 * h)
    return g


def fd_hessian(u, x):
    """Second-order central Hessian (SymMatrix) at the grid point nearest x."""
    idx = _interior_index(u, x)
    h = u.grid.h
    n = u.grid.n
    H = np.empty((n, n))
    for k in range(n):
        up = list(idx)
        dn = list(idx)
        up[k] += 1
        dn[k] -= 1
        H[k, k] = (
            u.values[tuple(up)] - 2 * u.values[idx] + u.values[tuple(dn)]
        ) / h**2
    for k in range(n):
        for l in range(k + 1, n):
            pp = list(idx)
            mm = list(idx)
            pm = list(idx)
            mp = list(idx)
            pp[k] += 1
            pp[l] += 1
            mm[k] -= 1
            mm[l] -= 1
            pm[k] += 1
            pm[l] -= 1
            mp[k] -= 1
            mp[l] += 1
            H[k, l] = H[l, k] = (
                u.values[tuple(pp)]
                + u.values[tuple(mm)]
                - u.values[tuple(pm)]
                - u.values[tuple(mp)]
            ) / (4 * h**2)
    return SymMatrix.from_matrix(H)


# ---------------------------------------------------------------------------
# Flat text serialization
# ---------------------------------------------------------------------------

def save_grid_function(path, u):
    """Write 'n npts c_1 ... c_n side' header then row-major values."""
    with open(path, "w") as fh:
        head = [str(u.grid.n), str(u.grid.npts)]
        head += [format(c, ".17g") for c in u.grid.center]
        head.append(format(u.grid.side, ".17g"))
        fh.write(" ".join(head) + "\n")
        for v in u.values.ravel(order="C"):
            fh.write(format(v, ".17g") + "\n")


def load_grid_function(path, name=""):
    with open(path) as fh:
        head = fh.readline().split()
        n, npts = int(head[0]), int(head[1])
        center = tuple(float(c) for c in head[2 : 2 + n])
        side = float(head[2 + n])
        vals = np.array([float(line) for line in fh if line.strip()])
    grid = Grid(center, side, npts)
    return GridFunction(grid, vals.reshape(grid.shape), name)
