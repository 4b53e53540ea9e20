"""Independent oracles for the test suite.

Each oracle computes the same quantity as a production routine by a
different route (brute force, enumeration, pairwise chords, qhull lower
facets, grid minimization) and is kept free of the code under test.
"""

import numpy as np


def envelope_oracle_1d(xs, vals):
    """Convex envelope by pairwise chords: at each grid point the minimum
    over all bracketing pairs of the chord value (O(N^2) pairs)."""
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray(vals, dtype=float)
    N = len(xs)
    out = vals.copy()
    for i in range(N):
        for j in range(i + 1, N):
            t = (xs[i:j + 1] - xs[i]) / (xs[j] - xs[i])
            chord = vals[i] + t * (vals[j] - vals[i])
            seg = out[i:j + 1]
            np.minimum(seg, chord, out=seg)
    return out


def envelope_oracle_hull(points, vals):
    """Facet-enumeration oracle: the discrete envelope is the max over the
    lower-hull facet planes of the lifted cloud."""
    from scipy.spatial import ConvexHull

    points = np.asarray(points, dtype=float)
    vals = np.asarray(vals, dtype=float)
    lifted = np.column_stack([points, vals])
    cap = np.column_stack([points, np.full(len(points), vals.max() + 1.0)])
    hull = ConvexHull(np.vstack([lifted, cap[:: max(1, len(points) // 64)]]))
    eq = hull.equations
    lower = eq[eq[:, -2] < -1e-9]
    a_x, a_z, b = lower[:, :-2], lower[:, -2], lower[:, -1]
    Z = (-(points @ a_x.T) - b) / a_z
    return Z.max(axis=1)


def pucci_bruteforce_diag(eigs, lam, Lam, npts=200):
    """sup and inf of -sum(a_i e_i) over a discretized diagonal coefficient
    box [lam, Lam]^n (for diagonal argument matrices)."""
    eigs = np.asarray(eigs, dtype=float)
    grid = np.linspace(lam, Lam, npts)
    axes = np.meshgrid(*[grid] * len(eigs), indexing="ij")
    total = sum(-a * e for a, e in zip(axes, eigs))
    return float(total.max()), float(total.min())


def parallel_sum_bruteforce(A, B, xi, reach=8.0, npts=161, levels=4):
    """Direct minimization of A(xi-z).(xi-z) + B z.z by a zooming grid
    search (each level refines a 10x smaller window around the argmin)."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    xi = np.asarray(xi, float)
    n = len(xi)
    center = np.zeros(n)
    best = np.inf
    for _ in range(levels):
        axes = [np.linspace(c - reach, c + reach, npts) for c in center]
        mesh = np.meshgrid(*axes, indexing="ij")
        Z = np.stack([m.ravel() for m in mesh], axis=1)
        D = xi[None, :] - Z
        vals = np.einsum("ij,zj,zi->z", A, D, D) + np.einsum("ij,zj,zi->z", B, Z, Z)
        k = int(np.argmin(vals))
        best = float(vals[k])
        center = Z[k]
        reach /= 10.0
    return best


def radial_power_solution(lam, Lam, n):
    """(sign, beta, operator_kind) for the exact radial power solution of an
    extremal equation: u = sign * |x|^beta with beta in (0, 1).

    Root-solving the closed-form extremal value of the radial Hessian
    (eigenvalues beta(beta-1) rho^(beta-2) radially, beta rho^(beta-2)
    tangentially, times sign) over both sign orderings.
    """
    def mplus(e_r, e_t):
        return -lam * (max(e_r, 0) + (n - 1) * max(e_t, 0)) + Lam * (
            max(-e_r, 0) + (n - 1) * max(-e_t, 0)
        )

    def mminus(e_r, e_t):
        return -Lam * (max(e_r, 0) + (n - 1) * max(e_t, 0)) + lam * (
            max(-e_r, 0) + (n - 1) * max(-e_t, 0)
        )

    for sign in (+1.0, -1.0):
        for kind, op in (("pucci_plus", mplus), ("pucci_minus", mminus)):
            # scan beta in (0,1); rho factors out at fixed rho=1
            betas = np.linspace(1e-3, 1 - 1e-3, 200001)
            vals = np.array([op(sign * b * (b - 1), sign * b) for b in betas])
            s = np.sign(vals)
            flips = np.nonzero(np.diff(s))[0]
            for k in flips:
                b0, b1 = betas[k], betas[k + 1]
                beta = b0 - vals[k] * (b1 - b0) / (vals[k + 1] - vals[k])
                if 1e-3 < beta < 1 - 1e-3:
                    return sign, float(beta), kind
    raise AssertionError("no radial power solution in (0,1)")
