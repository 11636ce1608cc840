import numpy as np
import pytest

from rydberg_reservoir.dynamics import (
    DriveSchedule,
    TrajectoryConfig,
    constant_schedule,
    integrate_ode,
    integrate_sde,
    relax_to_steady,
    square_wave_schedule,
)
from rydberg_reservoir.exceptions import ConvergenceError, ParameterError
from rydberg_reservoir.model import ModelParams, drift, stationary_states

BASE = ModelParams(omega=1.1, delta=11.0, gamma=1.0, gamma_d=10.0, v=100.0, d=1e-4)


def final_ode(p, hold, dt, n0=0.0):
    sched = constant_schedule(p.omega, 1, hold, p.delta)
    return integrate_ode(sched, p, TrajectoryConfig(dt=dt, n0=n0, samples_per_symbol=1)).n_samples[-1]


class TestConfig:
    @pytest.mark.parametrize("dt", [0.0, -0.1, 3.0])
    def test_step_bounds(self, dt):
        with pytest.raises(ParameterError):
            TrajectoryConfig(dt=dt).steps_per_symbol(20.0)

    def test_hold_not_multiple(self):
        with pytest.raises(ParameterError):
            TrajectoryConfig(dt=0.3, samples_per_symbol=1).steps_per_symbol(20.0)

    def test_samples_must_divide(self):
        with pytest.raises(ParameterError):
            TrajectoryConfig(dt=0.1, samples_per_symbol=3).steps_per_symbol(20.0)

    def test_bad_schedule(self):
        with pytest.raises(ParameterError):
            DriveSchedule(np.array([]))
        with pytest.raises(ParameterError):
            DriveSchedule(np.array([1.0, -1.0]))
        with pytest.raises(ParameterError):
            DriveSchedule(np.array([1.0]), hold_time=0.0)


class TestODE:
    def test_fixed_point_is_stationary(self):
        p = BASE.with_(d=0.0)
        n_ss = stationary_states(p).states[0].n_ss
        sched = constant_schedule(p.omega, 5, 20.0, p.delta)
        out = integrate_ode(sched, p, TrajectoryConfig(dt=0.1, n0=n_ss))
        assert np.max(np.abs(out.n_samples - n_ss)) < 1e-10

    def test_converges_after_twenty_relaxation_times(self):
        p = BASE.with_(d=0.0)
        state = stationary_states(p).states[0]
        hold = 20 * state.tau_relax
        dt = hold / 2000
        assert abs(final_ode(p, hold, dt, n0=0.0) - state.n_ss) < 1e-6
        sched = constant_schedule(p.omega, 1, hold, p.delta)
        path = integrate_ode(sched, p, TrajectoryConfig(dt=dt, samples_per_symbol=100)).n_samples
        assert np.all(np.diff(path) >= 0.0)

    def test_monotone_and_never_crosses_a_fixed_point(self):
        p = BASE.with_(omega=1.21, delta=11.45, d=0.0)
        roots = [s.n_ss for s in stationary_states(p).states]
        sched = constant_schedule(p.omega, 10, 20.0, p.delta)
        for n0 in (0.0, 0.5 * (roots[0] + roots[1]) - 1e-3, 0.5 * (roots[1] + roots[2]), 0.5):
            n = integrate_ode(sched, p, TrajectoryConfig(dt=0.1, n0=n0)).n_samples
            path = np.concatenate([[n0], n])
            steps = np.diff(path)
            f = np.array([drift(v, p) for v in path[:-1]])
            moving = np.abs(steps) > 1e-14
            assert np.all(np.sign(steps[moving]) == np.sign(f[moving]))
            # the sampled path stays on one side of every stationary point
            for r in roots:
                assert np.all(path >= r - 1e-12) or np.all(path <= r + 1e-12)

    def test_sample_times_and_shape(self):
        sched = constant_schedule(1.1, 3, 20.0, 11.0)
        out = integrate_ode(sched, BASE, TrajectoryConfig(dt=0.1, samples_per_symbol=4))
        assert out.n_samples.shape == (12,)
        np.testing.assert_allclose(out.times, [5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60])

    def test_fourth_order(self):
        p = BASE.with_(d=0.0)
        ref = final_ode(p, 10.0, 0.1 / 64)
        errors = [abs(final_ode(p, 10.0, dt) - ref) for dt in (0.1, 0.05, 0.025)]
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 3.5), orders

    def test_drive_switching_follows_schedule(self):
        p = BASE.with_(d=0.0, v=0.0, delta=0.0)
        sched = square_wave_schedule(1.0, 0.5, 2, 40.0, 0.0)
        out = integrate_ode(sched, p, TrajectoryConfig(dt=0.05, samples_per_symbol=1)).n_samples
        high = stationary_states(p.with_(omega=1.0)).states[0].n_ss
        low = stationary_states(p.with_(omega=0.5)).states[0].n_ss
        np.testing.assert_allclose(out, [high, low, high, low], atol=1e-9)


class TestSDE:
    def test_zero_noise_matches_ode_with_step_halving(self):
        p = BASE.with_(d=0.0)
        sched = square_wave_schedule(1.1, 0.15, 2, 4.0, 11.0)
        ode = integrate_ode(sched, p, TrajectoryConfig(dt=1e-3, samples_per_symbol=1)).n_samples
        err = []
        for dt in (1e-3, 5e-4):
            em = integrate_sde(sched, p, TrajectoryConfig(dt=dt, samples_per_symbol=1)).n_samples
            err.append(np.max(np.abs(em - ode)))
        assert err[0] < 1e-4
        assert 1.6 < err[0] / err[1] < 2.4

    def test_reproducible_per_seed_and_stream(self):
        sched = constant_schedule(1.1, 50, 20.0, 11.0)
        a = integrate_sde(sched, BASE, TrajectoryConfig(seed=5, stream=2)).n_samples
        b = integrate_sde(sched, BASE, TrajectoryConfig(seed=5, stream=2)).n_samples
        c = integrate_sde(sched, BASE, TrajectoryConfig(seed=5, stream=3)).n_samples
        d = integrate_sde(sched, BASE, TrajectoryConfig(seed=6, stream=2)).n_samples
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c) and not np.array_equal(a, d)

    def test_block_boundary_is_seamless(self):
        # the schedule crosses the internal noise block of 2000 symbols
        sched = constant_schedule(1.1, 2100, 2.0, 11.0)
        cfg = TrajectoryConfig(dt=0.1, seed=1, samples_per_symbol=1)
        out = integrate_sde(sched, BASE, cfg).n_samples
        assert out.shape == (2100,)
        assert np.isfinite(out).all()

    def test_stays_in_unit_interval_under_strong_noise(self):
        p = BASE.with_(d=5.0)
        sched = constant_schedule(1.1, 200, 20.0, 11.0)
        out = integrate_sde(sched, p, TrajectoryConfig(seed=3)).n_samples
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert out.std() > 0.0

    def test_ensemble_mean_tracks_deterministic_flow(self):
        # with V = 0 the drift is affine, so the Ito mean obeys the ODE
        p = ModelParams(omega=1.1, delta=2.0, gamma=1.0, gamma_d=10.0, v=0.0, d=1e-3)
        sched = constant_schedule(1.1, 1, 2.0, 2.0)
        ends = np.array([
            integrate_sde(sched, p, TrajectoryConfig(dt=0.01, seed=11, stream=k, samples_per_symbol=1)).n_samples[-1]
            for k in range(1000)
        ])
        # Euler drift on an affine field is the exact linear recursion
        a, b = drift(0.0, p), drift(0.0, p) - drift(1.0, p)
        expected = a / b * (1 - (1 - b * 0.01) ** 200)
        se = ends.std(ddof=1) / np.sqrt(ends.size)
        assert abs(ends.mean() - expected) < 3 * se

    def test_ensemble_mean_at_stable_point(self):
        p = ModelParams(omega=1.1, delta=2.0, gamma=1.0, gamma_d=10.0, v=0.0, d=1e-4)
        n_ss = stationary_states(p).states[0].n_ss
        sched = constant_schedule(1.1, 1, 20.0, 2.0)
        ends = np.array([
            integrate_sde(sched, p, TrajectoryConfig(dt=0.1, seed=5, stream=k, n0=n_ss, samples_per_symbol=1)).n_samples[-1]
            for k in range(1000)
        ])
        se = ends.std(ddof=1) / np.sqrt(ends.size)
        assert abs(ends.mean() - n_ss) < 3 * se

    def test_stationary_variance_linear_in_noise(self):
        p = BASE.with_(delta=5.0)
        n_ss = stationary_states(p).states[0].n_ss
        sched = constant_schedule(1.1, 500, 20.0, 5.0)
        ds = np.logspace(-5, -4, 4)
        variances = [
            integrate_sde(sched, p.with_(d=d), TrajectoryConfig(dt=0.1, seed=8, n0=n_ss)).n_samples.var()
            for d in ds
        ]
        slope = np.polyfit(np.log(ds), np.log(variances), 1)[0]
        assert abs(slope - 1.0) < 0.2

    def test_short_time_variance_is_diffusive(self):
        p = ModelParams(omega=1.1, delta=2.0, gamma=1.0, gamma_d=10.0, v=0.0, d=1e-3)
        n_ss = stationary_states(p).states[0].n_ss
        sched = constant_schedule(1.1, 1, 0.16, 2.0)
        runs = np.array([
            integrate_sde(sched, p, TrajectoryConfig(dt=1e-3, seed=2, stream=k, n0=n_ss, samples_per_symbol=16)).n_samples
            for k in range(2000)
        ])
        t = np.arange(1, 17) * 0.01
        slope = np.polyfit(np.log(t), np.log(runs.var(axis=0)), 1)[0]
        assert abs(slope - 1.0) < 0.2


class TestRelaxToSteady:
    def test_reaches_tolerance(self):
        n = relax_to_steady(BASE, 0.0)
        assert abs(drift(n, BASE)) < 1e-12

    def test_selects_basin_in_bistable_window(self):
        p = BASE.with_(omega=1.21, delta=11.45)
        lo, _, hi = (s.n_ss for s in stationary_states(p).states)
        assert relax_to_steady(p, 0.0) == pytest.approx(lo, abs=1e-10)
        assert relax_to_steady(p, 0.5) == pytest.approx(hi, abs=1e-10)

    def test_starting_at_fixed_point_returns_it(self):
        n_ss = stationary_states(BASE).states[0].n_ss
        assert relax_to_steady(BASE, n_ss) == n_ss

    def test_timeout(self):
        with pytest.raises(ConvergenceError):
            relax_to_steady(BASE, 0.0, tol=1e-300, max_time=1.0)
