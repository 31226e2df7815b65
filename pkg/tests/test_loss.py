import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conicsvm.core import InputError
from conicsvm.loss import (
    ConicLossParams,
    conic_loss,
    conic_loss_argmin_z,
    gamma_max_single,
    hinge_loss,
    hull_inequality_rhs,
    is_psd,
    scalar_hull_rhs,
    strengthening_h,
    zero_one_loss,
)

Z_GRID = np.linspace(0.0, 1.0, 1_000_001)


def brute_conic(u, gamma, lam):
    """Oracle: minimize gamma * h(u, z) + lam * z over a fine z-grid."""
    vals = gamma * strengthening_h(u, Z_GRID) + lam * Z_GRID
    k = int(np.argmin(vals))
    return vals[k], Z_GRID[k]


finite = dict(allow_nan=False, allow_infinity=False)


class TestScalarLosses:
    def test_hinge(self):
        assert hinge_loss(2.0) == 0.0
        assert hinge_loss(1.0) == 0.0
        assert hinge_loss(-1.0) == 2.0

    def test_zero_one(self):
        assert zero_one_loss(1.0) == 0.0
        assert zero_one_loss(0.999) == 1.0
        assert zero_one_loss(-5.0) == 1.0

    def test_conic_known_values(self):
        assert conic_loss(1.5, ConicLossParams(3.0, 2.0)) == 0.0
        assert conic_loss(0.0, ConicLossParams(1.0, 1.0)) == pytest.approx(1.0, abs=1e-15)
        assert conic_loss(0.5, ConicLossParams(0.25, 1.0)) == pytest.approx(0.4375, abs=1e-15)

    @pytest.mark.parametrize("u,gamma,lam", [(0.5, 0.25, 1.0), (0.9, 4.0, 0.3), (-2.0, 1.0, 1.0), (0.0, 2.0, 0.5)])
    def test_conic_matches_grid_oracle(self, u, gamma, lam):
        val, z = brute_conic(u, gamma, lam)
        assert conic_loss(u, ConicLossParams(gamma, lam)) == pytest.approx(val, abs=1e-6)
        assert conic_loss_argmin_z(u, ConicLossParams(gamma, lam)) == pytest.approx(z, abs=1e-3)

    def test_argmin_z(self):
        assert conic_loss_argmin_z(2.0, ConicLossParams(1.0, 1.0)) == 0.0
        assert conic_loss_argmin_z(-9.0, ConicLossParams(1.0, 1.0)) == 1.0
        assert conic_loss_argmin_z(0.5, ConicLossParams(0.25, 1.0)) == pytest.approx(0.25)

    def test_params_validated(self):
        with pytest.raises(InputError):
            ConicLossParams(0.0, 1.0)
        with pytest.raises(InputError):
            ConicLossParams(1.0, -1.0)

    def test_broadcasts(self):
        u = np.linspace(-2, 2, 7)
        assert conic_loss(u, ConicLossParams(1.0, 1.0)).shape == (7,)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-50, 50, **finite), st.floats(1e-3, 1e3, **finite), st.floats(1e-3, 1e3, **finite))
    def test_conic_sandwiched(self, u, gamma, lam):
        # 0 <= conic <= lam * 0-1 loss, and <= lam
        v = conic_loss(u, ConicLossParams(gamma, lam))
        assert 0.0 <= v <= lam * zero_one_loss(u) + 1e-9 * lam

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-50, 50, **finite), st.floats(1e-3, 1e3, **finite), st.floats(1e-3, 1e3, **finite))
    def test_argmin_attains_loss(self, u, gamma, lam):
        prm = ConicLossParams(gamma, lam)
        z = conic_loss_argmin_z(u, prm)
        assert 0.0 <= z <= 1.0
        attained = gamma * strengthening_h(u, z) + lam * z
        assert attained == pytest.approx(conic_loss(u, prm), rel=1e-9, abs=1e-9 * (1 + lam))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-2, 1e2, **finite), st.floats(1e-2, 1e2, **finite))
    def test_continuous_at_breakpoint(self, gamma, lam):
        prm = ConicLossParams(gamma, lam)
        u0 = 1.0 - prm.breakpoint
        eps = 1e-7 * max(1.0, prm.breakpoint)
        lo, hi = conic_loss(np.array([u0 - eps, u0 + eps]), prm)
        assert lo == pytest.approx(lam)
        assert hi == pytest.approx(lam, rel=1e-5)


class TestStrengthening:
    def test_examples(self):
        assert strengthening_h(1.5, 0.0) == pytest.approx(0.0)
        assert strengthening_h(0.0, 0.5) == pytest.approx(1.0)
        assert strengthening_h(0.0, 0.0) == np.inf

    def test_out_of_range_z(self):
        with pytest.raises(InputError):
            strengthening_h(0.0, 1.5)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-20, 20, **finite), st.floats(0, 1, **finite))
    def test_nonnegative(self, u, z):
        assert strengthening_h(u, z) >= -1e-9 * (1 + (1 - u) ** 2)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-20, 20, **finite))
    def test_zero_at_consistent_integer_z(self, u):
        z = 1.0 if u < 1 else 0.0
        assert strengthening_h(u, z) == pytest.approx(0.0, abs=1e-9 * (1 + u * u))


class TestGammaMax:
    def test_examples(self):
        assert gamma_max_single(np.eye(2), [1.0, 0.0]) == pytest.approx(1.0)
        assert gamma_max_single(np.eye(2), [3.0, 4.0]) == pytest.approx(0.04)
        assert gamma_max_single(np.diag([2.0, 1.0]), [1.0, 1.0]) == pytest.approx(2.0 / 3.0)

    def test_psd_boundary(self, rng):
        for _ in range(20):
            A = rng.normal(size=(4, 4))
            Q = A @ A.T + 0.5 * np.eye(4)
            x = rng.normal(size=4)
            g = gamma_max_single(Q, x)
            assert np.linalg.eigvalsh(Q - g * np.outer(x, x)).min() >= -1e-9
            assert np.linalg.eigvalsh(Q - 1.01 * g * np.outer(x, x)).min() < 0

    def test_errors(self):
        with pytest.raises(InputError):
            gamma_max_single(np.eye(2), [0.0, 0.0])
        with pytest.raises(InputError):
            gamma_max_single(np.diag([1.0, -1.0]), [1.0, 0.0])
        with pytest.raises(InputError):
            gamma_max_single(np.eye(3), [1.0, 0.0])


class TestHull:
    def test_tight_at_integer_z(self, rng):
        Q = np.diag([2.0, 1.0])
        x, y = np.array([1.0, -0.5]), 1.0
        g = gamma_max_single(Q, x)
        for _ in range(50):
            w = rng.normal(size=2) * 3
            z = 0.0 if y * x @ w >= 1 else 1.0
            assert hull_inequality_rhs(w, z, x, y, Q, g) == pytest.approx(w @ Q @ w, abs=1e-10)

    def test_below_decomposition_oracle(self, rng):
        # RHS at (w, z) must not exceed the cheapest split into feasible endpoints.
        Q, x, y = np.eye(1), np.array([1.0]), 1.0
        g = gamma_max_single(Q, x)
        for _ in range(20):
            z = rng.uniform(0.05, 0.95)
            w = rng.uniform(-2, 3)
            # w = (1-z) w0 + z w1 with w0 >= 1, w1 <= 1
            w0 = np.linspace(1.0, 20.0, 20001)
            w1 = (w - (1 - z) * w0) / z
            ok = w1 <= 1.0
            best = np.min((1 - z) * w0[ok] ** 2 + z * w1[ok] ** 2)
            assert hull_inequality_rhs(np.array([w]), z, x, y, Q, g) <= best + 1e-6

    def test_scalar_hull_tight(self):
        assert scalar_hull_rhs(3.0, 0.0, 1.0) == pytest.approx(9.0)
        assert scalar_hull_rhs(-2.0, 1.0, 1.0) == pytest.approx(4.0)
        assert scalar_hull_rhs(3.0, 1.0, 1.0) == np.inf

    def test_is_psd(self):
        assert is_psd(np.eye(2))
        assert not is_psd(np.diag([1.0, -1e-3]))
