import math

import numpy as np
import pytest

from ellipticlab.core import (
    Ball,
    Cube,
    Grid,
    GridFunction,
    StructureParams,
    SymMatrix,
    cell_weights,
    eig_sym,
    eigvals_sym,
    fd_gradient,
    fd_hessian,
    grid_function_from_callable,
    load_grid_function,
    lp_norm,
    parallel_sum,
    save_grid_function,
    sup_inf_osc,
)
from oracles import parallel_sum_bruteforce


# ---------------------------------------------------------------------------
# eigen decomposition
# ---------------------------------------------------------------------------

def test_eig_examples():
    assert np.allclose(SymMatrix.diag(0, 0).eigvals(), [0, 0])
    assert np.allclose(SymMatrix.diag(1, -1).eigvals(), [-1, 1])
    # char poly of [[2,1],[1,2]]: (2-w)^2 = 1 -> w = 1, 3
    assert np.allclose(SymMatrix.from_matrix([[2, 1], [1, 2]]).eigvals(), [1, 3])


def test_eig_trace_det_invariants():
    rng = np.random.default_rng(42)
    for _ in range(2000):
        n = int(rng.integers(1, 4))
        A = rng.standard_normal((n, n))
        A = A + A.T
        w = eigvals_sym(A)
        scale = max(1.0, np.abs(A).max())
        assert abs(w.sum() - np.trace(A)) <= 1e-12 * scale * 10
        assert abs(np.prod(w) - np.linalg.det(A)) <= 1e-12 * scale**n * 10
        assert np.all(np.diff(w) >= -1e-13 * scale)


def test_eig_reconstruction():
    rng = np.random.default_rng(7)
    for _ in range(500):
        n = int(rng.integers(1, 4))
        A = rng.standard_normal((n, n))
        A = A + A.T
        w, Q = eig_sym(A)
        err = np.abs(Q @ np.diag(w) @ Q.T - A).max()
        assert err <= 1e-12 * max(1.0, np.abs(A).max())
        assert np.abs(Q.T @ Q - np.eye(n)).max() < 1e-12


def test_eig_clustered():
    # near-multiples of the identity trigger the deflation fallback
    for eps in (0.0, 1e-14, 1e-11):
        A = 2.0 * np.eye(3)
        A[0, 1] = A[1, 0] = eps
        w, Q = eig_sym(A)
        assert np.abs(Q @ np.diag(w) @ Q.T - A).max() <= 1e-12 * 2.0
    # two clustered, one isolated
    A = np.diag([1.0, 1.0 + 1e-12, 5.0])
    R = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0]
    B = R @ A @ R.T
    B = 0.5 * (B + B.T)
    w, Q = eig_sym(B)
    assert np.abs(Q @ np.diag(w) @ Q.T - B).max() <= 1e-12 * 5.0


def test_batch_eigvals_match_lapack():
    rng = np.random.default_rng(3)
    for n in (2, 3):
        A = rng.standard_normal((400, n, n))
        A = A + np.swapaxes(A, 1, 2)
        assert np.abs(eigvals_sym(A) - np.linalg.eigvalsh(A)).max() < 1e-10


# ---------------------------------------------------------------------------
# parallel sum
# ---------------------------------------------------------------------------

def test_parallel_sum_identity():
    # variational formula with A = B = I gives |xi|^2 / 2
    assert np.allclose(parallel_sum(np.eye(2), np.eye(2)), 0.5 * np.eye(2))


def test_parallel_sum_zero():
    B = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(parallel_sum(np.zeros((2, 2)), B), 0.0)


def test_parallel_sum_bruteforce_oracle():
    rng = np.random.default_rng(5)
    for _ in range(4):
        A = rng.standard_normal((2, 2))
        A = A @ A.T
        B = rng.standard_normal((2, 2))
        B = B @ B.T
        C = parallel_sum(A, B)
        for _ in range(3):
            xi = rng.standard_normal(2)
            direct = parallel_sum_bruteforce(A, B, xi)
            assert abs(direct - xi @ C @ xi) < 1e-5 * max(1.0, abs(direct)) + 1e-6


def test_parallel_sum_psd_order():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(1, 4))
        A = rng.standard_normal((n, n))
        A = A @ A.T
        B = rng.standard_normal((n, n))
        B = B @ B.T
        C = parallel_sum(A, B)
        assert eigvals_sym(A - C)[0] >= -1e-10 * max(1.0, np.abs(A).max())
        assert eigvals_sym(B - C)[0] >= -1e-10 * max(1.0, np.abs(B).max())
        # pseudo-inverse identity as a second oracle
        S = A + B
        ref = A @ np.linalg.pinv(S) @ B
        assert np.abs(C - 0.5 * (ref + ref.T)).max() < 1e-8 * max(1.0, np.abs(S).max())


def test_parallel_sum_rejects_non_psd():
    with pytest.raises(ValueError):
        parallel_sum(np.diag([1.0, -1.0]), np.eye(2))


# ---------------------------------------------------------------------------
# quadrature and norms
# ---------------------------------------------------------------------------

def test_lp_norm_constant_exact():
    for n, s, p in ((1, 1.0, 1.0), (2, 1.0, 2.0), (2, 0.5, 3.0), (3, 1.0, 2.0)):
        g = Grid((0.0,) * n, s, 17)
        u = GridFunction(g, np.full(g.shape, 3.0))
        assert lp_norm(u, p, Cube((0.0,) * n, s)) == pytest.approx(3.0 * s ** (n / p), abs=1e-14)


def test_lp_norm_zero():
    g = Grid((0.0, 0.0), 1.0, 9)
    assert lp_norm(GridFunction(g, np.zeros(g.shape)), 2, Cube((0.0, 0.0), 1.0)) == 0.0


def test_lp_norm_linear_convergence():
    # int_0^1 x^2 dx = 1/3; midpoint rule converges at second order
    errs = []
    for N in (33, 65, 129):
        g = Grid((0.5,), 1.0, N)
        u = grid_function_from_callable(g, lambda X: X[:, 0])
        errs.append(abs(lp_norm(u, 2, Cube((0.5,), 1.0)) - 1 / math.sqrt(3)))
    rate = np.polyfit(np.log([32, 64, 128]), np.log(errs), 1)[0]
    assert rate < -1.9


def test_lp_norm_sup():
    g = Grid((0.0,), 2.0, 65)
    u = grid_function_from_callable(g, lambda X: X[:, 0])
    assert lp_norm(u, np.inf, Cube((0.0,), 1.0)) == pytest.approx(0.5 + g.h / 2, abs=g.h)


def test_lp_norm_empty_domain():
    g = Grid((0.0,), 1.0, 9)
    u = GridFunction(g, np.ones(g.shape))
    with pytest.raises(ValueError):
        lp_norm(u, 2, Cube((10.0,), 0.1))


def test_quadrature_scaling_identity():
    # ||u o T||_{L^p(Q_R0)} = t0^(-n/p) ||u||_{L^p(Q_{t0 R0}(x0))}
    t0, R0, p = 0.5, 1.0, 2.0
    # exact for constants
    g_ref = Grid((0.0, 0.0), R0, 33)
    uc = GridFunction(g_ref, np.full(g_ref.shape, 2.0))
    lhs = lp_norm(uc, p, Cube((0.0, 0.0), R0))
    rhs = t0 ** (-2 / p) * 2.0 * (t0 * R0) ** (2 / p)
    assert lhs == pytest.approx(rhs, rel=1e-14)
    # second order for smooth fields
    errs = []
    for N in (33, 65, 129):
        g_src = Grid((0.0, 0.0), 2.0, 2 * N - 1)
        u = grid_function_from_callable(g_src, lambda X: np.cos(X[:, 0]) * np.exp(X[:, 1]))
        g_tgt = Grid((0.0, 0.0), R0, N)
        comp = grid_function_from_callable(
            g_tgt, lambda Y: np.cos(t0 * Y[:, 0]) * np.exp(t0 * Y[:, 1])
        )
        lhs = lp_norm(comp, p, Cube((0.0, 0.0), R0))
        rhs = t0 ** (-2 / p) * lp_norm(u, p, Cube((0.0, 0.0), t0 * R0))
        errs.append(abs(lhs - rhs))
    rate = np.polyfit(np.log([1 / 32, 1 / 64, 1 / 128]), np.log(errs), 1)[0]
    assert rate > 1.9


def test_sup_inf_osc_examples():
    g = Grid((0.0,), 2.0, 65)
    u5 = GridFunction(g, np.full(g.shape, 5.0))
    assert sup_inf_osc(u5, Cube((0.0,), 2.0)) == (5.0, 5.0, 0.0)
    ux = grid_function_from_callable(g, lambda X: X[:, 0])
    assert sup_inf_osc(ux, Cube((0.0,), 2.0)) == (1.0, -1.0, 2.0)
    # |x| on the unit cube in 2d: extremes by direct enumeration
    g2 = Grid((0.0, 0.0), 1.0, 33)
    ur = grid_function_from_callable(g2, lambda X: np.linalg.norm(X, axis=1))
    pts = g2.points
    inside = Cube((0.0, 0.0), 1.0).contains(pts, closed=True)
    expected_sup = float(np.linalg.norm(pts[inside], axis=1).max())
    sup, inf, osc = sup_inf_osc(ur, Cube((0.0, 0.0), 1.0))
    assert sup == pytest.approx(expected_sup, abs=1e-14)
    assert inf == 0.0
    assert osc == pytest.approx(expected_sup, abs=1e-14)


def test_sup_inf_empty():
    g = Grid((0.0,), 1.0, 9)
    with pytest.raises(ValueError):
        sup_inf_osc(GridFunction(g, np.ones(g.shape)), Cube((9.0,), 0.05))


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def test_fd_affine_exact():
    g = Grid((0.0, 0.0), 2.0, 17)
    a = np.array([1.3, -0.7])
    u = grid_function_from_callable(g, lambda X: X @ a)
    assert np.allclose(fd_gradient(u, (0.25, -0.5)), a, atol=1e-13)


def test_fd_quadratic_exact():
    for n in (1, 2, 3):
        g = Grid((0.0,) * n, 2.0, 9)
        rng = np.random.default_rng(n)
        Q = rng.standard_normal((n, n))
        Q = Q + Q.T
        u = grid_function_from_callable(g, lambda X: 0.5 * np.einsum("ij,zi,zj->z", Q, X, X))
        for idx in np.ndindex(*(3,) * n):
            x = g.coords(tuple(i + 1 for i in idx))
            assert np.abs(fd_hessian(u, x).mat - Q).max() < 1e-10


def test_fd_sin_second_order():
    errs = []
    for N in (17, 33, 65):
        g = Grid((0.0, 0.0), 2.0, N)
        u = grid_function_from_callable(g, lambda X: np.sin(X[:, 0]))
        errs.append(abs(fd_gradient(u, (0.0, 0.0))[0] - 1.0))
    rate = np.polyfit(np.log([16, 32, 64]), np.log(errs), 1)[0]
    assert rate < -1.9


def test_fd_boundary_error():
    g = Grid((0.0,), 2.0, 9)
    u = GridFunction(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        fd_gradient(u, (-1.0,))


# ---------------------------------------------------------------------------
# types and serialization
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((0.0,), 1.0, 8)  # even
    with pytest.raises(ValueError):
        Grid((0.0,), -1.0, 9)
    g = Grid((0.0, 0.0), 1.0, 9)
    assert g.coords(g.center_index) == pytest.approx((0.0, 0.0))


def test_grid_function_finite():
    g = Grid((0.0,), 1.0, 9)
    bad = np.zeros(g.shape)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        GridFunction(g, bad)


def test_grid_function_immutable():
    g = Grid((0.0,), 1.0, 9)
    u = GridFunction(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_structure_params_validation():
    g = Grid((0.0,), 1.0, 9)
    with pytest.raises(ValueError):
        StructureParams(lambda_F=1.0, Lambda_F=0.5)
    with pytest.raises(ValueError):
        StructureParams(lambda_F=1.0, Lambda_F=1.0, M_F=-1.0)
    neg = GridFunction(g, -np.ones(g.shape))
    with pytest.raises(ValueError):
        StructureParams(lambda_F=1.0, Lambda_F=1.0, sigma_field=neg)


def test_grid_file_roundtrip(tmp_path):
    g = Grid((0.25, -0.5), 1.5, 9)
    rng = np.random.default_rng(0)
    u = GridFunction(g, rng.standard_normal(g.shape), "probe")
    path = tmp_path / "probe.grid"
    save_grid_function(path, u)
    v = load_grid_function(path)
    assert v.grid == g
    assert np.array_equal(v.values, u.values)


def test_ball_cell_weights_center_membership():
    g = Grid((0.0, 0.0), 2.0, 33)
    w = cell_weights(g, Ball((0.0, 0.0), 1.0))
    inside = np.linalg.norm(g.points, axis=1) <= 1.0 + 1e-12
    assert np.all((w.ravel() > 0) == inside)
    # measure converges to the ball volume at first order
    assert w.sum() == pytest.approx(math.pi, abs=10 * g.h)
