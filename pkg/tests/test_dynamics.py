import math

import numpy as np
import pytest
from scipy.integrate import simpson
from hypothesis import given
from hypothesis import strategies as st

from thermomodal.dynamics import (
    CosineMode,
    InitialData,
    PiecewiseConstant,
    Scheme,
    SineMode,
    Trajectory,
    Zero,
    cayley_matrix,
    dissipation_identity_error,
    dominant_mode,
    fit_exponential_rate,
    fit_polynomial_rate,
    grid_energy,
    integrate,
    modal_energy,
    project_initial,
    simulate,
    sine_velocity,
    smoothness_sweep,
    discontinuity_sweep,
    step_velocity,
)
from thermomodal.errors import IncompatibleData, NonPositiveEnergy
from thermomodal.model import CouplingModel, build_basis, build_generator

WEAK = CouplingModel("weak", 0.05)
STRONG = CouplingModel("strong", 0.05)


def _project(data, model, bc, n):
    return project_initial(data, build_basis(model, bc, n), model, bc)


class TestInitialData:
    def test_breakpoints_must_increase(self):
        with pytest.raises(ValueError):
            PiecewiseConstant((2.0, 1.0), (1.0, 2.0, 3.0))

    def test_breakpoints_inside_interval(self):
        with pytest.raises(ValueError):
            PiecewiseConstant((4.0,), (1.0, 2.0))

    def test_step_values(self):
        f = step_velocity().v0
        np.testing.assert_allclose(f(np.array([0.5, 2.0])), [2.0, -1.0])

    def test_traces(self):
        assert SineMode(3).trace() == pytest.approx((0.0, 0.0), abs=1e-15)
        assert CosineMode(1).trace() == pytest.approx((1.0, -1.0))


class TestProjection:
    def test_sine_velocity_weak_dd(self):
        y = _project(InitialData(v0=SineMode(2)), WEAK, "DD", 5)
        ref = np.zeros(15)
        ref[5 + 1] = math.sqrt(math.pi / 2)
        np.testing.assert_allclose(y, ref, atol=1e-14)
        assert y[6] == pytest.approx(1.2533141373155)

    def test_zero_blocks(self):
        y = _project(sine_velocity(1), STRONG, "DD", 6)
        assert not y[:6].any() and not y[12:].any()

    @pytest.mark.parametrize("k", [1, 2, 3, 7, 20])
    def test_step_coefficients_against_quadrature(self, k):
        n = 20
        y = _project(step_velocity(), WEAK, "DD", n)
        # the weak/DD velocity basis is orthonormal, so coordinates are L2 coefficients
        # composite Simpson, 10^4 points, split at the jump
        g = lambda x: math.sqrt(2 / math.pi) * np.sin(k * x)  # noqa: E731
        half = np.linspace(0, math.pi / 2, 5001)
        ref = 2 * simpson(g(half), x=half) - simpson(g(half + math.pi / 2), x=half + math.pi / 2)
        assert y[n + k - 1] == pytest.approx(ref, abs=1e-8)

    def test_cosine_displacement_rejected_under_dd(self):
        with pytest.raises(IncompatibleData):
            _project(InitialData(u0=CosineMode(1)), WEAK, "DD", 4)

    def test_cosine_temperature_rejected_under_nd(self):
        with pytest.raises(IncompatibleData):
            _project(InitialData(theta0=CosineMode(2)), STRONG, "ND", 4)

    def test_piecewise_displacement_needs_derivative(self):
        with pytest.raises(IncompatibleData):
            _project(InitialData(u0=PiecewiseConstant((1.0,), (0.0, 1.0))), WEAK, "NN", 4)

    def test_energy_of_projection(self):
        # v0 = sin x: (1/2) int sin^2 = pi/4
        y = _project(sine_velocity(1), STRONG, "DD", 8)
        assert modal_energy(y) == pytest.approx(math.pi / 4, rel=1e-12)


class TestIntegrate:
    @pytest.mark.parametrize("dt", [0.01, 0.3, 1.0])
    def test_skew_preserves_norm(self, dt):
        tr = integrate(np.array([[0.0, 1.0], [-1.0, 0.0]]), [1.0, 0.0], T=10 * dt, dt=dt)
        np.testing.assert_allclose(np.linalg.norm(tr.states, axis=1), 1.0, rtol=1e-13)

    def test_scalar_decay_step(self):
        tr = integrate(-np.eye(2), [1.0, 0.0], T=0.1, dt=0.1)
        np.testing.assert_allclose(tr.states[1], [0.95 / 1.05, 0.0], rtol=1e-15)
        assert tr.states[1][0] == pytest.approx(0.904762, abs=1e-6)

    def test_cayley_orthogonal_for_skew(self):
        S = np.array([[0.0, 2.0, 0.0], [-2.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
        C = cayley_matrix(S, 0.7)
        np.testing.assert_allclose(C.T @ C, np.eye(3), atol=1e-14)

    @pytest.mark.parametrize("dt", [0.01, 0.1, 1.0])
    @pytest.mark.parametrize("kind,bc", [("strong", "DD"), ("weak", "DN"), ("strong", "NN"), ("weak", "ND")])
    def test_energy_monotone(self, dt, kind, bc):
        m = CouplingModel(kind, 0.3)
        A = build_generator(m, bc, 12)
        y0 = np.random.default_rng(1).standard_normal(36)
        tr = integrate(A, y0, T=20.0, dt=dt)
        assert np.all(np.diff(tr.energy_modal) <= 1e-12)
        assert np.all(tr.energy_modal >= 0)

    @pytest.mark.parametrize("bad", [dict(T=1.0, dt=0.3), dict(T=1.0, dt=2.0), dict(T=-1.0, dt=0.1), dict(T=1.0, dt=0.0)])
    def test_rejects_bad_grid(self, bad):
        with pytest.raises(ValueError):
            integrate(-np.eye(1), [1.0], **bad)

    def test_eigen_matches_exact(self):
        A = np.array([[-0.1, 1.0], [-1.0, -0.1]])
        tr = integrate(A, [1.0, 0.0], T=5.0, dt=0.5, scheme="eigen")
        t = tr.times[-1]
        ref = math.exp(-0.1 * t) * np.array([math.cos(t), -math.sin(t)])
        np.testing.assert_allclose(tr.states[-1], ref, atol=1e-13)
        assert tr.metadata["scheme"] == "eigen" and not tr.metadata["fallback"]

    def test_defective_matrix_falls_back(self):
        J = np.array([[-1.0, 1.0], [0.0, -1.0]])
        tr = integrate(J, [0.0, 1.0], T=1.0, dt=0.1, scheme=Scheme.EIGEN)
        assert tr.metadata["fallback"]
        assert tr.metadata["scheme"] == "trapezoidal"
        assert "cond" in tr.metadata["fallback_reason"]

    def test_second_order_consistency(self):
        A = build_generator(WEAK, "DD", 30)
        y0 = _project(sine_velocity(1), WEAK, "DD", 30)
        ref = integrate(A, y0, T=10.0, dt=0.1, scheme="eigen").states[-1]
        errs = [np.linalg.norm(integrate(A, y0, T=10.0, dt=dt).states[-1] - ref) for dt in (0.1, 0.05, 0.025)]
        for coarse, fine in zip(errs, errs[1:]):
            assert 3.5 <= coarse / fine <= 4.5

    def test_metadata_and_lookup(self):
        A = build_generator(STRONG, "DD", 4)
        tr = integrate(A, np.ones(12), T=1.0, dt=0.25)
        assert tr.metadata["model"] == "strong" and tr.metadata["n"] == 4
        np.testing.assert_array_equal(tr.at(0.5), tr.states[2])

    def test_uncoupled_weak_wave_block_conserved(self):
        m = CouplingModel("weak", 0.0)
        for j in (1, 2, 3):
            tr = simulate(m, "DD", 10, sine_velocity(j), T=20.0, dt=0.1)
            wave = modal_energy(tr.states[:, :20])
            np.testing.assert_allclose(wave, wave[0], rtol=1e-12)


class TestGridEnergy:
    def test_sine_velocity(self):
        tr = simulate(STRONG, "DD", 4, T=0.1, dt=0.1)
        E = grid_energy(tr.states[:1], build_basis(STRONG, "DD", 4), 1000, STRONG, "DD")[0]
        assert E == pytest.approx(math.pi / 4, rel=1e-3)

    def test_single_displacement_mode(self):
        basis = build_basis(STRONG, "DD", 3)
        y = np.zeros(9)
        y[0] = 1.0
        E = grid_energy(y, basis, 2000, STRONG, "DD")[0]
        assert E == pytest.approx(0.5, rel=1e-3)

    def test_zero_state(self):
        basis = build_basis(WEAK, "NN", 3)
        assert grid_energy(np.zeros(9), basis, 50, WEAK, "NN")[0] == 0.0

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            grid_energy(np.zeros(3), build_basis(WEAK, "DD", 1), 1, WEAK, "DD")

    @pytest.mark.parametrize("kind,bc", [("strong", "DD"), ("weak", "DN"), ("weak", "NN"), ("strong", "ND")])
    def test_modal_and_grid_agree(self, kind, bc):
        m = CouplingModel(kind, 0.05)
        tr = simulate(m, bc, 20, T=5.0, dt=0.1, n_grid=2000)
        np.testing.assert_allclose(tr.energy_grid, tr.energy_modal, rtol=1e-2)

    @given(st.integers(1, 6))
    def test_sine_velocity_any_mode(self, j):
        y = _project(sine_velocity(j), WEAK, "DD", 8)
        E = grid_energy(y, build_basis(WEAK, "DD", 8), 1000, WEAK, "DD")[0]
        assert E == pytest.approx(math.pi / 4, rel=1e-3)


class TestFits:
    def test_exponential(self):
        t = np.linspace(0, 50, 501)
        rate, r2 = fit_exponential_rate(t, np.exp(-0.3 * t), (10, 50))
        assert rate == pytest.approx(0.3) and r2 == pytest.approx(1.0)
        rate, _ = fit_exponential_rate(t, 5 * np.exp(-0.02 * t), (0, 50))
        assert rate == pytest.approx(0.02)

    @pytest.mark.parametrize("c,p", [(5.0, -1.0), (2.0, -2.0)])
    def test_polynomial(self, c, p):
        t = np.linspace(1, 100, 991)
        expo, r2 = fit_polynomial_rate(t, c * t**p, (1, 100))
        assert expo == pytest.approx(p) and r2 == pytest.approx(1.0)

    def test_nonpositive_energy(self):
        t = np.linspace(0, 10, 11)
        E = np.ones(11)
        E[5] = 0.0
        with pytest.raises(NonPositiveEnergy):
            fit_exponential_rate(t, E, (1, 9))

    @pytest.mark.parametrize("window", [(-1, 5), (2, 20), (5, 5)])
    def test_window_validation(self, window):
        t = np.linspace(0, 10, 11)
        with pytest.raises(ValueError):
            fit_exponential_rate(t, np.ones(11), window)

    def test_polynomial_window_starts_at_one(self):
        t = np.linspace(0, 10, 11)
        with pytest.raises(ValueError):
            fit_polynomial_rate(t, np.ones(11), (0.5, 10))

    def test_dominant_mode_synthetic(self):
        A = np.diag([-0.1, -1.0, -0.01])
        assert dominant_mode(A, [1.0, 1.0, 1e-5]) == pytest.approx(-0.1)
        assert dominant_mode(A, [1.0, 1.0, 1.0]) == pytest.approx(-0.01)


class TestDissipation:
    def test_identity_holds(self):
        tr = simulate(STRONG, "DD", 16, T=20.0, dt=0.01)
        assert dissipation_identity_error(tr, (1.0, 20.0)) <= 0.05

    def test_zero_for_uncoupled_wave(self):
        tr = simulate(CouplingModel("strong", 0.0), "DD", 4, T=2.0, dt=0.1)
        assert isinstance(tr, Trajectory)
        np.testing.assert_allclose(tr.energy_modal, tr.energy_modal[0], rtol=1e-13)


class TestSweeps:
    def test_weak_ordering(self):
        res = smoothness_sweep(WEAK, "DD", 32, [1, 2, 3], T=100.0, dt=0.1, jobs=3)
        assert [r.tag for r in res] == ["j=1", "j=2", "j=3"]
        E = [r.terminal_energy for r in res]
        assert E[2] >= E[1] >= E[0]

    def test_strong_runs_decay(self):
        res = smoothness_sweep(STRONG, "DD", 32, [1, 2, 3], T=100.0, dt=0.1)
        for r in res:
            E = r.trajectory.energy_modal
            assert E[-1] < E[0]
            rate, r2 = fit_exponential_rate(r.trajectory.times, E, (50, 100))
            assert rate > 0 and r2 > 0.9

    def test_empty_js(self):
        with pytest.raises(ValueError):
            smoothness_sweep(WEAK, "DD", 4, [])

    def test_discontinuity_tags(self):
        res = discontinuity_sweep(WEAK, "DD", 16, T=1.0, dt=0.1)
        assert [r.tag for r in res] == ["smooth", "step"]
        assert all(r.trajectory.energy_modal[0] > 0 for r in res)

    def test_zero_data_stays_zero(self):
        tr = simulate(WEAK, "DD", 4, InitialData(Zero(), Zero(), Zero()), T=1.0, dt=0.5)
        assert not tr.states.any()
