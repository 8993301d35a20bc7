import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from levyou.charfn import ou_charfn
from levyou.density import (
    GridSpec,
    PushforwardConfig,
    complete_basis,
    derivative_grid,
    forward_transform,
    invert_density,
    pushforward_density,
    strong_feller_probe,
    transition_apply,
)
from levyou.errors import (
    ConditioningError,
    DimensionError,
    NonDecayingError,
    ParameterError,
    RankConditionError,
    UnsupportedError,
)
from levyou.levy import LevyTriplet, gaussian_triplet, stable_triplet, uniform_box_measure
from levyou.linalg import OUSystem, kolmogorov_system
from levyou.quadrature import composite_rule

FLAT2 = OUSystem(np.zeros((2, 2)), np.eye(2))
FLAT1 = OUSystem([[0.0]], [[1.0]])
OU1 = OUSystem([[-1.0]], [[1.0]])
ST15 = stable_triplet(1.5, 1.0, 1)
G1 = gaussian_triplet(1)


@pytest.fixture(scope="module")
def stable_grid():
    return invert_density(OU1, ST15, 1.0, GridSpec(1, 4096))


@pytest.fixture(scope="module")
def gauss1_grid():
    return invert_density(FLAT1, G1, 1.0, GridSpec(1, 512, 12.0))


def trapezoid_stable_density(y, t=1.0, alpha=1.5, points=10**6, hmax=60.0):
    # independent route: closed-form exponent, real cosine form, plain trapezoid
    g = (1 - np.exp(-alpha * t)) / alpha
    h = np.linspace(0.0, hmax, points + 1)
    w = np.full(h.size, h[1] - h[0])
    w[0] = w[-1] = 0.5 * (h[1] - h[0])
    damp = np.exp(-g * h**alpha) * w
    return np.array([np.cos(h * yy) @ damp for yy in y]) / np.pi


class TestInvert:
    def test_gaussian_2d(self):
        grid = invert_density(FLAT2, gaussian_triplet(2), 1.0, GridSpec(2, 128, 8.0))
        P = grid.points()
        exact = np.exp(-0.5 * np.sum(P**2, axis=1)) / (2 * np.pi)
        assert np.max(np.abs(grid.values.ravel() - exact)) <= 1e-6
        assert grid.spacing == pytest.approx([np.pi / 8, np.pi / 8])

    def test_stable_against_trapezoid(self, stable_grid):
        y = stable_grid.axes()[0]
        sel = np.abs(y) < 25
        ref = trapezoid_stable_density(y[sel])
        assert np.max(np.abs(ref - stable_grid.values[sel])) <= 1e-5

    def test_symmetric_law_is_even(self, stable_grid):
        v = stable_grid.values[1:]
        assert np.max(np.abs(v - v[::-1])) <= 1e-9

    def test_center_shifts_grid(self):
        a = invert_density(FLAT1, G1, 1.0, GridSpec(1, 256, 10.0))
        b = invert_density(FLAT1, G1, 1.0, GridSpec(1, 256, 10.0, center=[0.7]))
        np.testing.assert_allclose(b.values, norm.pdf(b.axes()[0]), atol=1e-12)
        assert b.axes()[0][128] == pytest.approx(0.7)
        assert a.mass() == pytest.approx(1.0, abs=1e-12)

    def test_auto_radius_and_bound(self, stable_grid):
        rep = stable_grid.decay
        assert rep.bound(stable_grid.freq_radius[0]) == pytest.approx(1e-7, rel=1e-6)
        assert 0 < stable_grid.truncation_error_bound < 1e-6

    def test_refusals(self):
        with pytest.raises(RankConditionError):
            invert_density(OUSystem(np.zeros((2, 2)), [[1.0], [0.0]]), ST15, 1.0, GridSpec(2, 64))
        cp = LevyTriplet([[0.0]], [0.0], uniform_box_measure(-1.0, 1.0, 2.0))
        with pytest.raises(NonDecayingError):
            invert_density(OU1, cp, 1.0, GridSpec(1, 64))
        sys4 = OUSystem(np.zeros((4, 4)), np.eye(4))
        with pytest.raises(UnsupportedError):
            invert_density(sys4, gaussian_triplet(4), 1.0, GridSpec(4, 16, 4.0))
        with pytest.raises(DimensionError):
            invert_density(OU1, ST15, 1.0, GridSpec(2, 64))
        with pytest.raises(ParameterError):
            GridSpec(1, 100)
        with pytest.raises(ParameterError):
            GridSpec(1, 8)

    def test_round_trip(self, stable_grid):
        H = stable_grid.freq_radius[0]
        h = np.linspace(-H / 2, H / 2, 9)[:, None]
        got = forward_transform(stable_grid, h)
        ref = np.array([ou_charfn(OU1, ST15, 1.0, [0.0], hh) for hh in h])
        assert np.max(np.abs(got - ref)) <= 1e-6

    def test_kolmogorov_grid(self):
        grid = invert_density(kolmogorov_system(), ST15, 1.0, GridSpec(2, 256))
        assert grid.mass() == pytest.approx(1.0, abs=5e-3)
        assert grid.values.min() >= -1e-5 * grid.values.max()


class TestDerivative:
    def test_zero_order_is_identical(self, stable_grid):
        again = derivative_grid(OU1, ST15, 1.0, GridSpec(1, 4096), (0,), decay=stable_grid.decay)
        np.testing.assert_array_equal(again.values, stable_grid.values)

    def test_gaussian_first_derivative(self):
        grid = derivative_grid(FLAT1, G1, 1.0, GridSpec(1, 512, 12.0), (1,))
        y = grid.axes()[0]
        np.testing.assert_allclose(grid.values, -y * norm.pdf(y), atol=1e-6)
        assert grid.sup_norm() == pytest.approx(norm.pdf(1.0), abs=1e-3)

    def test_stable_derivative_integrates_to_zero(self):
        grid = derivative_grid(OU1, ST15, 1.0, GridSpec(1, 4096), (1,))
        assert abs(np.sum(grid.values) * grid.cell_volume) <= 1e-4
        assert grid.abs_integral() > 0

    def test_order_limit(self):
        with pytest.raises(ParameterError):
            derivative_grid(FLAT1, G1, 1.0, GridSpec(1, 64, 8.0), (5,))
        with pytest.raises(ParameterError):
            derivative_grid(FLAT1, G1, 1.0, GridSpec(1, 64, 8.0), (1, 0))


class TestTransition:
    def test_constant(self, stable_grid):
        assert transition_apply(OU1, ST15, 1.0, [0.3], lambda z: np.ones(len(z)), grid=stable_grid) == pytest.approx(
            1.0, abs=5e-3
        )

    def test_normal_cdf(self):
        grid = invert_density(FLAT1, G1, 1.0, GridSpec(1, 16384, 1024.0))
        x, c = 0.3, 0.8
        val = transition_apply(FLAT1, G1, 1.0, [x], lambda z: (z[:, 0] <= c).astype(float), grid=grid)
        assert val == pytest.approx(norm.cdf(c - x), abs=1e-3)

    def test_fourier_duality(self, stable_grid):
        x, h0 = np.array([0.7]), 1.3
        re = transition_apply(OU1, ST15, 1.0, x, lambda z: np.cos(h0 * z[:, 0]), grid=stable_grid)
        im = transition_apply(OU1, ST15, 1.0, x, lambda z: np.sin(h0 * z[:, 0]), grid=stable_grid)
        assert abs(re + 1j * im - ou_charfn(OU1, ST15, 1.0, x, [h0])) <= 1e-4

    def test_vectorised_x(self, gauss1_grid):
        xs = np.array([[0.0], [1.0], [-2.0]])
        f = lambda z: np.tanh(z[:, 0])
        batch = transition_apply(FLAT1, G1, 1.0, xs, f, grid=gauss1_grid)
        for xv, b in zip(xs, batch):
            assert transition_apply(FLAT1, G1, 1.0, xv, f, grid=gauss1_grid) == pytest.approx(b, abs=1e-15)

    def test_low_coverage_warns(self):
        grid = invert_density(FLAT1, G1, 1.0, GridSpec(1, 16, 16.0))
        with pytest.warns(RuntimeWarning):
            transition_apply(FLAT1, G1, 1.0, [0.0], lambda z: np.ones(len(z)), grid=grid)

    @pytest.mark.parametrize(
        "sys,trip,spec",
        [
            (FLAT1, G1, GridSpec(1, 512, 12.0)),
            (OUSystem([[-0.5]], [[1.0]]), G1, GridSpec(1, 512, 12.0)),
            (OU1, ST15, GridSpec(1, 2048, 12.0)),
        ],
        ids=["brownian", "gauss-ou", "stable-ou"],
    )
    def test_chapman_kolmogorov(self, sys, trip, spec):
        t, s, x = 0.6, 0.4, np.array([0.5])
        f = lambda z: np.cos(z[:, 0]) / (1 + 0.1 * z[:, 0] ** 2)
        g_t = invert_density(sys, trip, t, spec)
        g_s = invert_density(sys, trip, s, spec)
        g_ts = invert_density(sys, trip, t + s, spec)
        inner = lambda z: transition_apply(sys, trip, s, z, f, grid=g_s)
        direct = transition_apply(sys, trip, t + s, x, f, grid=g_ts)
        nested = transition_apply(sys, trip, t, x, inner, grid=g_t)
        assert nested == pytest.approx(direct, abs=1e-3)


class TestStrongFeller:
    def test_gaussian_halfspace(self, gauss1_grid):
        xs = np.linspace(-1.0, 1.0, 41)[:, None]
        f = lambda z: (z[:, 0] <= 0.25).astype(float)
        table = strong_feller_probe(FLAT1, G1, 1.0, f, xs, grid=gauss1_grid)
        assert table.omega[0] == 0.0 and table.deltas[0] == 0.0
        assert table.bounded and table.monotone
        assert table.omega[1] <= 0.1 * table.omega[-1]
        # continuous shift bound for the Gaussian: sup density * |e^{tA}| * delta
        # + 2 * tail; the slack covers the Riemann sum with an indicator
        fine = invert_density(FLAT1, G1, 1.0, GridSpec(1, 2048, 48.0))
        table = strong_feller_probe(FLAT1, G1, 1.0, f, xs, grid=fine)
        assert np.all(table.omega <= norm.pdf(0) * table.deltas + 2e-6 + 1e-4)

    def test_stable_sign(self, stable_grid):
        xs = np.linspace(-2.0, 2.0, 33)[:, None]
        table = strong_feller_probe(OU1, ST15, 1.0, lambda z: np.sign(z[:, 0]), xs, grid=stable_grid)
        assert table.monotone and table.bounded
        assert table.omega[1] <= 0.1 * table.omega[-1]

    def test_requires_bounded_f(self, gauss1_grid):
        with pytest.raises(ParameterError):
            strong_feller_probe(FLAT1, G1, 1.0, lambda z: 3 * np.ones(len(z)), [[0.0], [1.0]], grid=gauss1_grid)


def unit_square(x):
    return np.all((x >= 0) & (x <= 1), axis=1).astype(float)


def gauss_pdf(x):
    return np.exp(-0.5 * np.sum(x**2, axis=1)) / (2 * np.pi) ** (x.shape[1] / 2)


class TestPushforward:
    def test_triangular(self):
        assert pushforward_density([[1.0, 1.0]], unit_square, [[1.0]])[0] == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_marginal(self):
        y = np.linspace(-3, 3, 13)[:, None]
        got = pushforward_density([[1.0, 0.0]], gauss_pdf, y)
        np.testing.assert_allclose(got, norm.pdf(y[:, 0]), atol=1e-8)

    def test_square_case(self):
        L = np.array([[2.0, 1.0], [0.5, -1.0]])
        y = np.array([[0.3, -0.2], [1.0, 1.0]])
        expected = gauss_pdf(np.linalg.solve(L, y.T).T) / abs(np.linalg.det(L))
        np.testing.assert_allclose(pushforward_density(L, gauss_pdf, y), expected, rtol=1e-13)

    def test_mass(self):
        # image of a 3-d Gaussian under an onto 2 x 3 map, integrated over a box
        L = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, -1.0]])
        nodes, w = composite_rule(-12.0, 12.0, 24, 16)
        Y = np.stack(np.meshgrid(nodes, nodes, indexing="ij"), -1).reshape(-1, 2)
        dens = pushforward_density(L, gauss_pdf, Y, PushforwardConfig(panels=32))
        assert np.sum(dens * np.outer(w, w).ravel()) == pytest.approx(1.0, abs=1e-4)

    def test_completion_is_greedy(self):
        S = complete_basis([[1.0, 1.0, 0.0]])
        np.testing.assert_array_equal(S[0], [1.0, 1.0, 0.0])
        # e_3 is orthogonal to the first row, so it is chosen first
        np.testing.assert_array_equal(S[1], [0.0, 0.0, 1.0])
        assert abs(np.linalg.det(S)) > 0.5

    def test_errors(self):
        with pytest.raises(ParameterError):
            pushforward_density([[1.0, 1.0], [2.0, 2.0]], gauss_pdf, [[0.0, 0.0]])
        with pytest.raises(ConditioningError):
            pushforward_density([[1e-13, 0.0]], gauss_pdf, [[0.0]])
        with pytest.raises(DimensionError):
            pushforward_density(np.ones((3, 2)), gauss_pdf, [[0.0, 0.0, 0.0]])


@settings(max_examples=12, deadline=None)
@given(
    lam=st.floats(-1.5, 0.5),
    alpha=st.sampled_from([0.8, 1.2, 1.5, 1.9]),
    q=st.sampled_from([0.0, 0.5]),
    t=st.floats(0.3, 2.0),
)
def test_normalisation_and_sign(lam, alpha, q, t):
    sys = OUSystem([[lam]], [[1.0]])
    trip = LevyTriplet([[q]], [0.0], stable_triplet(alpha, 1.0, 1).nu)
    grid = invert_density(sys, trip, t, GridSpec(1, 2048))
    assert grid.mass() == pytest.approx(1.0, abs=5e-3)
    assert grid.values.min() >= -1e-5 * grid.values.max()
