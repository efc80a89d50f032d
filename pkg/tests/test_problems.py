import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import unit_rows
from structsgd import problems as P

# exhaustive minimum of <f'(x), x>/f(x) on the grid [-6, 6] step 0.01 for
# f(x) = x^2 + 3 sin^2 x, computed from the closed-form derivative
SIN_ZETA_GRID = 0.49611528237156344


def all_problems():
    rng = np.random.default_rng(3)
    return [
        P.random_least_squares(7, 3, seed=1, interpolated=False),
        P.random_least_squares(7, 3, seed=2),
        P.make_sin_squared([1.0, 1.5], [0.75, 2 / 3]),
        P.make_nonlinear_lsq(rng.standard_normal((2, 4)), rng.standard_normal(4)),
        P.make_composition("logcosh", rng.standard_normal((5, 3)),
                           x_star=rng.standard_normal(3),
                           certify_points=rng.standard_normal((300, 3))),
    ]


# sin-squared

def test_sin_squared_two_dim_surface():
    p = P.make_sin_squared([1.0, 1.5], [0.75, 2 / 3])
    for x, y in [(0.3, -1.2), (2.0, 0.5), (-4.0, 3.3)]:
        expected = 0.5 * (x ** 2 + 3 * np.sin(x) ** 2 + 1.5 * y ** 2 + 4 * np.sin(y) ** 2)
        assert p.value(np.array([x, y])) == pytest.approx(expected, rel=1e-14)


def test_sin_squared_minimiser_at_origin():
    p = P.make_sin_squared([2.0, 0.5, 1.0], [0.1, 0.5, 0.9])
    assert p.value(np.zeros(3)) == 0.0
    assert np.all(p.grad(np.zeros(3)) == 0.0)
    assert p.cert.interpolated and P.certify_interpolation(p).passed


def test_sin_squared_curvature_bound():
    p = P.make_sin_squared([1.0], [0.5])
    assert p.cert.L_i[0] == 6.0
    x = np.linspace(-10, 10, 200001)
    second = 1.0 * (2.0 + 8.0 * 0.5 * np.cos(2 * x))
    assert np.max(np.abs(second)) <= 6.0 + 1e-12
    assert np.max(np.abs(second)) == pytest.approx(6.0, abs=1e-9)


@pytest.mark.parametrize("a,b", [([0.0], [0.5]), ([-1.0], [0.5]), ([1.0], [0.0]),
                                 ([1.0], [1.0]), ([1.0, 2.0], [0.5])])
def test_sin_squared_rejects_invalid(a, b):
    with pytest.raises(ValueError):
        P.make_sin_squared(a, b)


def test_sin_squared_pl_reproduced():
    p = P.make_sin_squared([1.0], [0.75])
    res = P.certify_pl(p, np.linspace(-10, 10, 2001)[:, None])
    assert res.ok and 0 < res.value <= p.cert.L
    assert p.cert.mu is not None and p.cert.provenance["mu"] == P.ESTIMATED


def test_sin_squared_quasar_grid_fixture():
    p = P.make_sin_squared([1.0], [0.75])
    grid = (np.arange(-600, 601) / 100.0)[:, None]
    res = P.certify_quasar(p, grid)
    assert res.value == pytest.approx(SIN_ZETA_GRID, abs=1e-12)
    assert res.used.size == grid.shape[0] - 1  # x = 0 skipped


# least squares

def test_least_squares_identity():
    p = P.make_least_squares(np.eye(4), np.zeros(4))
    assert np.allclose(p.x_star, 0.0)
    assert np.all(p.cert.L_i == 1.0)
    assert np.sum(p.component_grads(p.x_star) ** 2) == 0.0


def test_least_squares_interpolated_passes():
    p = P.random_least_squares(9, 4, seed=5)
    res = P.certify_interpolation(p)
    assert res.passed and res.worst_gap <= 1e-20
    assert np.allclose(p.component_values(p.x_star), 0.0, atol=1e-25)


def test_least_squares_L_max_matches_power_iteration():
    A = np.random.default_rng(6).standard_normal((6, 3))
    p = P.make_least_squares(A, interpolated=True)
    for i in range(6):
        H = np.outer(A[i], A[i])
        v = np.ones(3)
        for _ in range(200):
            v = H @ v
            v /= np.linalg.norm(v)
        assert p.cert.L_i[i] == pytest.approx(v @ H @ v, rel=1e-12)
    assert p.cert.L_max == pytest.approx(np.max(np.sum(A ** 2, axis=1)), rel=1e-15)


def test_non_interpolated_fails_interpolation():
    p = P.random_least_squares(8, 3, seed=2, interpolated=False)
    res = P.certify_interpolation(p)
    assert not res.passed and res.worst_gap > 0


def test_least_squares_shape_mismatch():
    with pytest.raises(ValueError):
        P.make_least_squares(np.ones((3, 2)), np.ones(4))


def test_smoothness_average_bound():
    p = P.random_least_squares(12, 4, seed=8)
    assert p.cert.L <= p.cert.L_bar + 1e-12


# nonlinear least squares

def test_nonlinear_lsq_zero_at_optimum():
    rng = np.random.default_rng(1)
    p = P.make_nonlinear_lsq(rng.standard_normal((2, 3)), rng.standard_normal(3))
    assert p.value(p.x_star) == 0.0
    assert np.linalg.norm(p.grad(p.x_star)) == 0.0


def test_nonlinear_lsq_one_dimensional_gradient():
    p = P.make_nonlinear_lsq(np.array([[1.0]]), np.array([0.0]))
    for x in (-2.0, -0.3, 0.7, 1.9):
        assert p.value(np.array([x])) == pytest.approx(0.5 * np.tanh(x) ** 2, rel=1e-14)
        analytic = np.tanh(x) / np.cosh(x) ** 2
        assert p.grad(np.array([x]))[0] == pytest.approx(analytic, rel=1e-14)
        h = 1e-6 * (1 + abs(x))
        fd = (p.value(np.array([x + h])) - p.value(np.array([x - h]))) / (2 * h)
        assert fd == pytest.approx(analytic, rel=1e-6, abs=1e-9)


def test_nonlinear_lsq_pl_estimate_from_svd():
    A = np.random.default_rng(2).standard_normal((2, 3))
    x_star = np.random.default_rng(3).standard_normal(3)
    p = P.make_nonlinear_lsq(A, x_star)
    J = (1.0 - np.tanh(A @ x_star) ** 2)[:, None] * A
    s_min = np.linalg.svd(J, compute_uv=False)[-1]
    assert s_min > 0
    assert p.cert.mu == pytest.approx(s_min ** 2 / 2, rel=1e-12)


def test_nonlinear_lsq_rejects_tall():
    with pytest.raises(ValueError):
        P.make_nonlinear_lsq(np.ones((3, 2)), np.zeros(2))


# compositions

def test_composition_square_is_least_squares():
    rng = np.random.default_rng(4)
    A, xs = rng.standard_normal((6, 3)), rng.standard_normal(3)
    p = P.make_composition("square", A, x_star=xs, certify_points=rng.standard_normal((200, 3)))
    q = P.make_least_squares(A, interpolated=True, x_star=xs)
    x = rng.standard_normal(3)
    assert np.allclose(p.component_values(x), 2 * q.component_values(x), rtol=1e-13)
    assert p.cert.zeta == 1.0


def test_composition_quartic_star_convex():
    rng = np.random.default_rng(5)
    A, xs = rng.standard_normal((5, 3)), rng.standard_normal(3)
    p = P.make_composition("quartic", A, x_star=xs)
    pts = P.default_points(p, count=10_000, seed=1, grid=0)
    assert pts.shape == (10_000, 3)
    assert P.certify_quasar(p, pts).value >= 1 - 1e-6
    assert p.value(xs) == 0.0


def test_composition_rejects_inconsistent_b():
    A = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        P.make_composition("square", A, b=np.array([1.0, 2.0, 0.0]))


def test_composition_consistent_b_accepted():
    A = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    p = P.make_composition("logcosh", A, b=np.array([1.0, 1.0, -2.0]),
                           certify_points=np.random.default_rng(0).standard_normal((100, 2)))
    assert np.allclose(p.x_star, [1.0, -2.0])


# certifiers

def test_certify_quasar_convex_quadratic_is_one():
    p = P.random_least_squares(8, 3, seed=9)
    pts = p.x_star + np.random.default_rng(0).standard_normal((500, 3))
    assert P.certify_quasar(p, pts).value == 1.0


def test_certify_pl_quadratic_matches_eigenvalue():
    p = P.random_least_squares(8, 2, seed=10)
    H = p.A.T @ p.A / p.n
    w, V = np.linalg.eigh(H)
    # the ratio is minimised along the bottom eigenvector
    pts = p.x_star + np.vstack([V[:, 0] * 0.5, np.random.default_rng(0).standard_normal((200, 2))])
    res = P.certify_pl(p, pts)
    assert res.value == pytest.approx(w[0], rel=1e-10)
    assert res.value <= p.cert.L


def test_certifiers_skip_degenerate_points():
    p = P.random_least_squares(8, 3, seed=11)
    pts = p.x_star + np.random.default_rng(0).standard_normal((50, 3))
    with_opt = np.vstack([pts, p.x_star, p.x_star])
    assert P.certify_quasar(p, with_opt).value == P.certify_quasar(p, pts).value
    assert P.certify_pl(p, with_opt).value == P.certify_pl(p, pts).value
    assert P.certify_pl(p, with_opt).used.size == 50


def test_certifiers_all_degenerate_raises():
    p = P.random_least_squares(8, 3, seed=11)
    with pytest.raises(P.DegenerateSampleError):
        P.certify_quasar(p, np.vstack([p.x_star, p.x_star]))
    with pytest.raises(P.DegenerateSampleError):
        P.certify_pl(p, p.x_star[None, :])


def test_certify_quasar_reports_violations():
    # spurious local minima make the quasar ratio negative somewhere
    class Wiggle(P.FiniteSumProblem):
        def component_values(self, x, idx=None):
            return np.atleast_1d(np.sin(3 * x[0]) ** 2 + 0.01 * x[0] ** 2)

        def component_grads(self, x, idx=None):
            return np.atleast_2d(3 * np.sin(6 * x[0]) + 0.02 * x[0])

    p = Wiggle(1, 1, x_star=np.zeros(1), f_star=0.0, f_i_star=np.zeros(1))
    res = P.certify_quasar(p, np.linspace(-3, 3, 601)[:, None])
    assert not res.ok and res.violations.size > 0


def test_interpolation_needs_component_minima():
    p = P.random_least_squares(4, 2, seed=0)
    p.f_i_star = None
    with pytest.raises(ValueError):
        P.certify_interpolation(p)


# properties over every problem

@pytest.mark.parametrize("p", all_problems(), ids=lambda p: type(p).__name__)
def test_mean_of_components(p):
    rng = np.random.default_rng(0)
    for x in p.x_star + rng.standard_normal((10, p.d)):
        assert p.value(x) == pytest.approx(np.mean(p.component_values(x)), rel=1e-12)
        np.testing.assert_allclose(p.grad(x), p.component_grads(x).mean(axis=0),
                                   rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("p", all_problems(), ids=lambda p: type(p).__name__)
def test_stationary_at_x_star(p):
    x0 = p.x_star + 1.0
    assert np.linalg.norm(p.grad(p.x_star)) <= 1e-8 * (1 + np.linalg.norm(p.grad(x0)))
    if p.cert.interpolated:
        assert np.max(np.abs(p.component_grads(p.x_star))) <= 1e-8


@pytest.mark.parametrize("p", all_problems(), ids=lambda p: type(p).__name__)
def test_smooth_along_x_star_direction(p):
    pts = P.default_points(p, count=2000, seed=3)
    assert P.smoothness_gap(p, pts) <= 1e-9


@pytest.mark.parametrize("p", all_problems(), ids=lambda p: type(p).__name__)
def test_pl_estimate_never_exceeds_L(p):
    pts = P.default_points(p, count=500, seed=4)
    assert P.certify_pl(p, pts).value <= p.cert.L * (1 + 1e-9)


def test_finite_diff_examples():
    p = P.random_least_squares(6, 3, seed=1)
    assert P.finite_diff_check(p, np.array([0.3, -2.0, 5.0])) <= 1e-7
    s = P.make_sin_squared([1.0, 1.5], [0.75, 2 / 3])
    assert P.finite_diff_check(s, np.array([1.0, 2.0])) <= 1e-5
    rng = np.random.default_rng(7)
    t = P.make_nonlinear_lsq(rng.standard_normal((2, 3)), rng.standard_normal(3))
    assert P.finite_diff_check(t, rng.standard_normal(3)) <= 1e-5
    with pytest.raises(ValueError):
        P.finite_diff_check(p, np.zeros(3), h=0.0)


def test_structure_cert_validation():
    with pytest.raises(ValueError):
        P.StructureCert(L_i=[1.0], L=1.0, zeta=1.5)
    with pytest.raises(ValueError):
        P.StructureCert(L_i=[1.0], L=1.0, mu=2.0)
    with pytest.raises(ValueError):
        P.StructureCert(L_i=[-1.0], L=1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=4),
       st.floats(0.01, 0.99), st.integers(0, 10_000))
def test_sin_squared_curvature_bound_property(a, b, seed):
    a = np.array(a)
    bb = np.full(a.size, b)
    p = P.make_sin_squared(a, bb, certify_points=np.random.default_rng(seed).standard_normal((50, a.size)))
    x = np.random.default_rng(seed).uniform(-10, 10, (200, a.size))
    second = a * (2 + 8 * bb * np.cos(2 * x))
    assert np.all(np.abs(second) <= p.cert.L_i + 1e-12)


def test_unit_rows_helper():
    A = unit_rows(5, 3, 0)
    assert np.allclose(np.sum(A ** 2, axis=1), 1.0)
