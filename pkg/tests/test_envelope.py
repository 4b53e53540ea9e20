import numpy as np
import pytest

from ellipticlab.core import (
    Ball,
    Grid,
    GridFunction,
    StructureParams,
    grid_function_from_callable,
    point_mask,
)
from ellipticlab.envelope import (
    convex_envelope,
    gradient_image,
    hessian_contact_check,
    relaxation_directions,
    witness_decomposition,
)
from oracles import envelope_oracle_1d, envelope_oracle_hull


def tent_1d(npts=257):
    g = Grid((0.0,), 2.0, npts)
    u = grid_function_from_callable(g, lambda X: -1.0 + np.abs(X[:, 0]))
    return convex_envelope(u, 0.0)


# ---------------------------------------------------------------------------
# the hand-computed 1d example
# ---------------------------------------------------------------------------

def test_tent_1d_exact():
    env = tent_1d(257)
    big = env.grid
    exact = -1.0 + np.abs(big.axes[0]) / 2.0
    assert np.array_equal(env.gamma.values, exact)  # supporting lines land on grid values
    # contact inside the unit ball is the apex alone
    cp = env.contact_points()
    in_ball = cp[np.abs(cp[:, 0]) <= 1.0]
    assert in_ball.shape == (1, 1) and in_ball[0, 0] == 0.0
    assert env.m_partial == 0.0 and env.m_value == pytest.approx(1.0)


def test_tent_1d_gradient_image():
    env = tent_1d(257)
    cov = gradient_image(env, m_f=0.0, n_samples=1000)
    assert cov.outer_radius == pytest.approx(1.0 / 3.0)
    assert cov.fraction == 1.0
    # the subgradient range over the ball is [-1/2, 1/2]
    boxes = env.point_gradient_boxes
    inside = np.abs(env.grid.points[:, 0]) <= 1.0
    assert boxes[inside, 0, 0].min() == pytest.approx(-0.5)
    assert boxes[inside, 0, 1].max() == pytest.approx(0.5)


def test_tent_1d_witnesses():
    env = tent_1d(257)
    ws = witness_decomposition(env, (0.5,))
    ws = {float(p[0]): w for p, w in ws}
    # x = 3/4 * 0 + 1/4 * 2 and the values combine to the envelope -0.75
    assert ws == pytest.approx({0.0: 0.75, 2.0: 0.25})
    val = 0.75 * (-1.0) + 0.25 * 0.0
    assert val == pytest.approx(env.gamma.interp((0.5,)))


def test_witness_trivial_on_contact():
    env = tent_1d(129)
    with pytest.raises(ValueError, match="witness trivial"):
        witness_decomposition(env, (0.0,))


# ---------------------------------------------------------------------------
# oracle equivalence
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("npts", [65, 129, 257])
def test_oracle_1d(npts):
    rng = np.random.default_rng(npts)
    g = Grid((0.0,), 2.0, npts)
    for sample in range(3):
        u = grid_function_from_callable(
            g, lambda X: -rng.uniform(0.5, 1.5) + np.abs(X[:, 0]) ** rng.uniform(0.7, 2.0)
            + 0.2 * np.sin(rng.uniform(2, 7) * X[:, 0])
        )
        env = convex_envelope(u, 0.0)
        oracle = envelope_oracle_1d(env.grid.axes[0], env.v_ext.values)
        assert np.abs(env.gamma.values - oracle).max() <= 1e-10


def test_oracle_2d_representable():
    # envelopes generated by stencil-direction chords match the facet oracle
    cases = [
        ("cone", lambda X: np.linalg.norm(X, axis=1) - 1.0),
        ("sup_tent", lambda X: np.max(np.abs(X), axis=1) - 1.0),
        ("nonneg", lambda X: 0.5 + 0.1 * X[:, 0]),
    ]
    for name, fn in cases:
        g = Grid((0.0, 0.0), 2.0, 65)
        u = grid_function_from_callable(g, fn)
        env = convex_envelope(u, 0.0)
        oracle = envelope_oracle_hull(env.grid.points, env.v_ext.values.ravel())
        assert np.abs(env.gamma.values.ravel() - oracle).max() <= 1e-8, name


def test_oracle_2d_one_sided_on_generic():
    # on generic ruled envelopes the relaxation sits between the true hull
    # and the input: hull <= relaxed <= V (directional-closure gap above 0)
    g = Grid((0.0, 0.0), 2.0, 49)
    u = grid_function_from_callable(g, lambda X: -(1.0 - (X**2).sum(1)) + 0.3 * X[:, 0])
    env = convex_envelope(u, 0.0)
    oracle = envelope_oracle_hull(env.grid.points, env.v_ext.values.ravel())
    gap = env.gamma.values.ravel() - oracle
    assert gap.min() >= -1e-9
    assert np.all(env.gamma.values <= env.v_ext.values + 1e-12)


def test_cone_2d_closed_form():
    # apex-to-boundary chords give the sup-norm cone -d + |x|_inf / 2 exactly
    g = Grid((0.0, 0.0), 2.0, 65)
    u = grid_function_from_callable(g, lambda X: np.linalg.norm(X, axis=1) - 1.0)
    env = convex_envelope(u, 0.0)
    P = env.grid.points
    exact = -1.0 + 0.5 * np.max(np.abs(P), axis=1)
    assert np.abs(env.gamma.values.ravel() - exact).max() < 1e-12
    cov = gradient_image(env, m_f=0.0)
    assert cov.fraction == 1.0  # covers the ball of radius M/(3d) = 1/3


# ---------------------------------------------------------------------------
# structural invariants
# ---------------------------------------------------------------------------

def test_idempotence_bit_equal():
    # the envelope is a fixed point of the relaxation operator: applying it
    # to the computed envelope returns bit-identical values
    from ellipticlab.envelope import _relax

    cases = [
        (Grid((0.0,), 2.0, 257), lambda X: -1.0 + np.abs(X[:, 0])),
        (Grid((0.0, 0.0), 2.0, 33), lambda X: np.linalg.norm(X, axis=1) - 1.0),
        (Grid((0.0, 0.0), 2.0, 33), lambda X: -(1.0 - (X**2).sum(1))),
    ]
    for g, fn in cases:
        env = convex_envelope(grid_function_from_callable(g, fn), 0.0)
        again, sweeps = _relax(env.gamma.values, relaxation_directions(g.n))
        assert sweeps == 1  # first sweep already changes nothing
        assert np.array_equal(again, env.gamma.values)


def test_pipeline_rerun_on_tent():
    # the tent's envelope restricted to the ball reproduces itself through
    # the full pipeline (its support chords pass through the same points)
    g = Grid((0.0,), 2.0, 257)
    env = convex_envelope(grid_function_from_callable(g, lambda X: -1.0 + np.abs(X[:, 0])), 0.0)
    start = (g.npts - 1) // 2
    inner = env.gamma.values[start : start + g.npts]
    env2 = convex_envelope(GridFunction(g, inner), 0.0)
    assert np.array_equal(env2.gamma.values, env.gamma.values)


def test_monotonicity():
    g = Grid((0.0, 0.0), 2.0, 33)
    rng = np.random.default_rng(0)
    u1 = grid_function_from_callable(g, lambda X: np.linalg.norm(X, axis=1) - 1.2)
    bump = 0.3 * np.abs(rng.standard_normal(g.shape))
    u2 = GridFunction(g, u1.values + bump)
    e1 = convex_envelope(u1, 0.0)
    e2 = convex_envelope(u2, 0.0)
    assert np.all(e1.gamma.values <= e2.gamma.values + 1e-12)


def test_directional_midpoint_convexity():
    g = Grid((0.0, 0.0), 2.0, 49)
    u = grid_function_from_callable(g, lambda X: -(1.0 - (X**2).sum(1)) + 0.2 * np.sin(3 * X[:, 0]))
    env = convex_envelope(u, 0.0)
    G = env.gamma.values
    M = env.grid.npts
    for v in relaxation_directions(2):
        a0, a1 = abs(v[0]), abs(v[1])
        sl_c = (slice(a0, M - a0), slice(a1, M - a1))
        up = (slice(a0 + v[0], M - a0 + v[0]), slice(a1 + v[1], M - a1 + v[1]))
        dn = (slice(a0 - v[0], M - a0 - v[0]), slice(a1 - v[1], M - a1 - v[1]))
        viol = G[sl_c] - 0.5 * (G[up] + G[dn])
        assert viol.max() <= 1e-9


def test_envelope_below_and_nonpositive():
    g = Grid((0.0, 0.0), 2.0, 33)
    u = grid_function_from_callable(g, lambda X: (X**2).sum(1) - 0.7)
    env = convex_envelope(u, 0.25)
    assert np.all(env.gamma.values <= env.v_ext.values + 1e-14)
    assert np.all(env.gamma.values <= 1e-14)


def test_nonnegative_input_trivial():
    g = Grid((0.0, 0.0), 2.0, 33)
    env = convex_envelope(grid_function_from_callable(g, lambda X: 1.0 + X[:, 0] ** 2), 0.0)
    assert env.m_value == 0.0
    assert np.all(env.gamma.values == 0.0)
    cov = gradient_image(env, m_f=0.0)
    assert cov.empty and cov.fraction == 1.0


def test_quadratic_well_contact_ball():
    # supporting planes must clear the zero extension: tangency survives
    # only on an inner ball (analytically between radius 0.18 and 0.27,
    # plus the tolerance collar)
    g = Grid((0.0, 0.0), 2.0, 65)
    u = grid_function_from_callable(g, lambda X: -(1.0 - (X**2).sum(1)))
    env = convex_envelope(u, 0.0)
    cp = env.contact_points()
    r = np.linalg.norm(cp, axis=1)
    in_ball = r <= 1.0
    assert r[in_ball].max() < 0.45
    # every point of the inner ball of radius 0.15 is contact
    P = env.grid.points
    inner = np.linalg.norm(P, axis=1) <= 0.15
    assert env.contact_mask.ravel()[inner].all()


def test_sup_bound_through_gradient():
    # sup u^- <= m_partial + 3 d sup |grad envelope| over the ball
    for fn in (lambda X: np.linalg.norm(X, axis=1) - 1.0,
               lambda X: -(1.0 - (X**2).sum(1))):
        g = Grid((0.0, 0.0), 2.0, 49)
        u = grid_function_from_callable(g, fn)
        env = convex_envelope(u, 0.0)
        inside = point_mask(g, Ball((0.0, 0.0), 1.0), closed=True)
        sup_minus = float(np.maximum(-u.values[inside], 0.0).max())
        assert sup_minus <= env.m_partial + 3.0 * 1.0 * env.sup_gradient_norm() + 1e-9


def test_witnesses_cone_generic():
    g = Grid((0.0, 0.0), 2.0, 65)
    u = grid_function_from_callable(g, lambda X: np.linalg.norm(X, axis=1) - 1.0)
    env = convex_envelope(u, 0.0)
    rng = np.random.default_rng(1)
    max_q = 0
    for _ in range(6):
        x = rng.uniform(-0.9, 0.9, 2)
        if env.contact_mask[env.grid.index_near(x)]:
            continue
        ws = witness_decomposition(env, x)
        q = len(ws)
        max_q = max(max_q, q)
        assert q <= 3  # n + 1
        tot = sum(w for _, w in ws)
        comb = sum(w * p for p, w in ws)
        val = sum(w * env.v_ext.interp(p) for p, w in ws)
        xg = env.grid.coords(env.grid.index_near(x))
        assert tot == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(comb, xg, atol=1e-9)
        assert val == pytest.approx(float(env.gamma.values[env.grid.index_near(x)]), abs=1e-9)
    assert env.observed_max_witnesses == max_q >= 2


# ---------------------------------------------------------------------------
# contact-set Hessian bound
# ---------------------------------------------------------------------------

def test_hessian_contact_quadratic():
    # D2 envelope = 2A I on contact, bounded by f/lambda = 2nA I
    A_, lam, n = 1.0, 1.0, 2
    g = Grid((0.0, 0.0), 2.0, 65)
    u = grid_function_from_callable(g, lambda X: -A_ * (1.0 - (X**2).sum(1)))
    f = grid_function_from_callable(g, lambda X: np.full(len(X), 2 * n * lam * A_))
    fbig = grid_function_from_callable(g.doubled(), lambda X: np.full(len(X), 2 * n * lam * A_))
    params = StructureParams(lam, lam, f_field=fbig)
    env = convex_envelope(u, 0.0)
    rep = hessian_contact_check(env, params)
    assert rep.passed, rep.summary()
    assert rep.constants["contact_points"] > 10
    assert rep.constants["off_contact_points"] > 10
    # margin at contact is the slack 2nA - 2A = 2A(n-1) up to O(h)
    assert rep.worst_margin >= -rep.tolerance


def test_hessian_contact_1d_affine_flat():
    env = tent_1d(129)
    params = StructureParams(1.0, 1.0)
    rep = hessian_contact_check(env, params)
    # off contact the envelope is affine: directional curvature vanishes
    flat_margins = [d for d in rep.details if d.get("kind") == "flat"]
    assert rep.constants["off_contact_points"] > 0
    assert not flat_margins  # no flat-point violations recorded
