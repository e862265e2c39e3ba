import numpy as np
import pytest

from shearlab.energetics import energy_series
from shearlab.fields import PeriodicGrid, l2_norm_sq, random_band_limited, single_mode
from shearlab.modulation import builtin
from shearlab.shear import kolmogorov
from shearlab.solver import SolverConfig, default_dt, exact_inviscid, simulate, step


@pytest.fixture(scope="module")
def profile():
    return kolmogorov()


class TestStep:
    def test_pure_diffusion_single_mode(self, profile):
        # xi = 0: one step is exact heat decay of the mode
        grid = PeriodicGrid(64)
        theta = single_mode(grid, 1, 1)
        mod = builtin("constant", value=0.0, horizon=1.0)
        cfg = SolverConfig(nu=1e-2, k=1, dt=0.25, n_points=64)
        out = step(theta, 0.0, 0.25, cfg, profile, mod)
        expected = np.exp(-1e-2 * 0.25) * theta.values
        assert np.max(np.abs(out.values - expected)) < 1e-14

    def test_pure_transport_matches_exact(self, profile):
        grid = PeriodicGrid(64)
        theta = single_mode(grid, 1, 1)
        mod = builtin("oscillatory", horizon=1.0)
        cfg = SolverConfig(nu=0.0, k=1, dt=0.5, n_points=64)
        out = step(theta, 0.0, 0.5, cfg, profile, mod)
        exact = exact_inviscid(theta, 0.5, profile, mod)
        assert np.max(np.abs(out.values - exact.values)) < 1e-14

    def test_l2_never_increases(self, profile):
        grid = PeriodicGrid(64)
        theta = random_band_limited(grid, 1, seed=5)
        mod = builtin("constant", value=1.0, horizon=1.0)
        cfg = SolverConfig(nu=1e-2, k=1, dt=0.1, n_points=64)
        before = l2_norm_sq(theta)
        after = l2_norm_sq(step(theta, 0.0, 0.1, cfg, profile, mod))
        assert after <= before * (1 + 1e-14)

    def test_transport_preserves_magnitudes(self, profile):
        grid = PeriodicGrid(64)
        theta = random_band_limited(grid, 1, seed=6)
        mod = builtin("constant", value=1.0, horizon=1.0)
        cfg = SolverConfig(nu=0.0, k=1, dt=0.1, n_points=64)
        out = step(theta, 0.0, 0.1, cfg, profile, mod)
        assert np.max(np.abs(np.abs(out.values) - np.abs(theta.values))) < 1e-14


class TestConvergence:
    def test_strang_second_order(self, profile):
        grid = PeriodicGrid(64)
        theta0 = single_mode(grid, 1, 1)
        mod = builtin("constant", value=1.0, horizon=1.0)

        def final_state(dt):
            cfg = SolverConfig(nu=1e-2, k=1, dt=dt, n_points=64, save_every=10**9)
            return simulate(theta0, 1.0, cfg, profile, mod).thetas[-1]

        reference = final_state(1.25e-4)
        errors = [np.sqrt(l2_norm_sq(theta0.with_values(final_state(dt) - reference))) for dt in (4e-3, 2e-3, 1e-3)]
        slopes = [np.log2(errors[i] / errors[i + 1]) for i in range(2)]
        for slope in slopes:
            assert slope == pytest.approx(2.0, abs=0.1)

    def test_lie_first_order(self, profile):
        grid = PeriodicGrid(64)
        theta0 = single_mode(grid, 1, 1)
        mod = builtin("constant", value=1.0, horizon=1.0)

        def final_state(dt):
            cfg = SolverConfig(nu=1e-2, k=1, dt=dt, n_points=64, save_every=10**9, scheme="lie")
            return simulate(theta0, 1.0, cfg, profile, mod).thetas[-1]

        reference = final_state(1.25e-4)
        errors = [np.sqrt(l2_norm_sq(theta0.with_values(final_state(dt) - reference))) for dt in (4e-3, 2e-3)]
        slope = np.log2(errors[0] / errors[1])
        assert slope == pytest.approx(1.0, abs=0.2)


class TestSimulate:
    def test_heat_oracle(self, profile):
        grid = PeriodicGrid(64)
        nu = 1e-2
        mod = builtin("constant", value=0.0, horizon=50.0)
        cfg = SolverConfig(nu=nu, k=1, dt=0.01, n_points=64, save_every=100)
        for n in (1, 3):
            traj = simulate(single_mode(grid, n, 1), 50.0, cfg, profile, mod)
            series = energy_series(traj, profile)
            oracle = 2 * np.pi * np.exp(-2 * nu * n * n * traj.times)
            assert np.max(np.abs(series["e0"] - oracle) / oracle) < 1e-10

    def test_inviscid_energy_conserved(self, profile):
        grid = PeriodicGrid(128)
        mod = builtin("oscillatory", horizon=5.0)
        cfg = SolverConfig(nu=0.0, k=1, dt=0.01, n_points=128, save_every=50)
        traj = simulate(random_band_limited(grid, 1, seed=9), 5.0, cfg, profile, mod)
        series = energy_series(traj, profile)
        assert np.max(np.abs(series["e0"] - series["e0"][0])) <= 1e-12 * series["e0"][0]

    def test_inviscid_matches_exact_solution(self, profile):
        grid = PeriodicGrid(128)
        theta0 = random_band_limited(grid, 1, seed=12)
        mod = builtin("oscillatory", horizon=5.0)
        cfg = SolverConfig(nu=0.0, k=1, dt=0.01, n_points=128, save_every=100)
        traj = simulate(theta0, 5.0, cfg, profile, mod)
        exact = exact_inviscid(theta0, 5.0, profile, mod)
        assert np.max(np.abs(traj.thetas[-1] - exact.values)) <= 1e-12

    def test_shear_beats_pure_diffusion_half_life(self, profile):
        # time for E0 to fall below e^{-1} is well under a fifth of the
        # pure-diffusion crossing time 1/(2 nu)
        nu = 1e-3
        mod = builtin("constant", value=1.0, horizon=30.0)
        cfg = SolverConfig(nu=nu, k=1, dt=0.01, n_points=128, save_every=20)
        traj = simulate(single_mode(PeriodicGrid(128), 1, 1), 30.0, cfg, profile, mod)
        series = energy_series(traj, profile)
        target = series["e0"][0] / np.e
        idx = int(np.argmax(series["e0"] <= target))
        assert series["e0"][idx] <= target
        t_cross = float(traj.times[idx])
        diffusion_cross = 1.0 / (2 * nu)
        assert t_cross / diffusion_cross <= 0.2

    def test_e0_strictly_decreasing(self, profile):
        grid = PeriodicGrid(64)
        mod = builtin("constant", value=1.0, horizon=20.0)
        cfg = SolverConfig(nu=1e-3, k=1, dt=0.01, n_points=64, save_every=100)
        traj = simulate(single_mode(grid, 1, 1), 20.0, cfg, profile, mod)
        e0 = energy_series(traj, profile)["e0"]
        assert np.all(np.diff(e0) < 0)

    def test_conjugate_symmetry(self, profile):
        grid = PeriodicGrid(64)
        theta0 = random_band_limited(grid, 1, seed=21)
        conj0 = theta0.with_values(np.conj(theta0.values))
        conj0 = type(theta0)(grid, np.conj(theta0.values), -1)
        mod = builtin("constant", value=1.0, horizon=3.0)
        cfg_p = SolverConfig(nu=1e-2, k=1, dt=0.01, n_points=64, save_every=100)
        cfg_m = SolverConfig(nu=1e-2, k=-1, dt=0.01, n_points=64, save_every=100)
        traj_p = simulate(theta0, 3.0, cfg_p, profile, mod)
        traj_m = simulate(conj0, 3.0, cfg_m, profile, mod)
        scale = np.max(np.abs(traj_p.thetas[-1]))
        assert np.max(np.abs(traj_m.thetas[-1] - np.conj(traj_p.thetas[-1]))) < 1e-12 * scale

    def test_breakpoints_hit_exactly(self, profile):
        # dt does not divide the ramp length; the ramp end must still be a
        # step boundary so the piecewise antiderivative is never mixed
        nu = 1e-2
        mod = builtin("example_B", nu=nu)  # breakpoints at 10, 31.6..
        grid = PeriodicGrid(64)
        cfg = SolverConfig(nu=nu, k=1, dt=0.3, n_points=64, save_every=10)
        traj = simulate(single_mode(grid, 1, 1), 50.0, cfg, profile, mod)
        assert traj.times[-1] == 50.0
        e0 = energy_series(traj, profile)["e0"]
        assert np.all(np.isfinite(e0))

    def test_theta_hat_reconstruction(self, profile):
        grid = PeriodicGrid(64)
        nu, k = 1e-2, 2
        mod = builtin("constant", value=0.0, horizon=1.0)
        cfg = SolverConfig(nu=nu, k=k, dt=0.01, n_points=64, save_every=100)
        traj = simulate(single_mode(grid, 1, k), 1.0, cfg, profile, mod)
        i = len(traj) - 1
        expected = np.exp(-nu * k * k * traj.times[i]) * traj.thetas[i]
        assert np.max(np.abs(traj.theta_hat(i) - expected)) < 1e-15

    def test_horizon_exceeded_rejected(self, profile):
        mod = builtin("constant", value=1.0, horizon=1.0)
        cfg = SolverConfig(nu=1e-2, k=1, dt=0.01, n_points=64)
        with pytest.raises(ValueError, match="horizon"):
            simulate(single_mode(PeriodicGrid(64), 1, 1), 2.0, cfg, profile, mod)

    def test_exact_inviscid_identity_at_zero(self, profile):
        theta0 = random_band_limited(PeriodicGrid(64), 1, seed=2)
        mod = builtin("constant", value=1.0, horizon=1.0)
        out = exact_inviscid(theta0, 0.0, profile, mod)
        assert np.array_equal(out.values, theta0.values)

    def test_exact_inviscid_phase(self, profile):
        # v = cos y, xi = 1, k = 1, t = pi: multiply by e^{-i pi cos y}
        grid = PeriodicGrid(64)
        theta0 = single_mode(grid, 1, 1)
        mod = builtin("constant", value=1.0, horizon=5.0)
        out = exact_inviscid(theta0, np.pi, profile, mod)
        expected = np.exp(-1j * np.pi * np.cos(grid.points)) * theta0.values
        assert np.max(np.abs(out.values - expected)) < 1e-14


def test_default_dt_resolves_transport(profile):
    mod = builtin("constant", value=1.0, horizon=10.0)
    dt = default_dt(1e-4, 1, profile, mod, 10.0)
    assert 0 < dt <= 0.01

    mod_fast = builtin("poly", nu=1e-2, horizon=10.0)
    dt_fast = default_dt(1e-2, 1, profile, mod_fast, 10.0)
    assert dt_fast < dt
