import math

import numpy as np
import pytest

from regime_tagger.sim import (
    DivergenceError,
    SdeSpec,
    Trajectory,
    VectorField,
    euler_maruyama,
    hopf_field,
    lorenz_field,
    rk4_integrate,
    trajectory_from_csv,
    trajectory_to_csv,
)

BETA = 8.0 / 3.0


def linear_decay():
    return VectorField(dim=1, fn=lambda x, t, p: -x)


def c_plus(rho, beta=BETA):
    c = math.sqrt(beta * (rho - 1.0))
    return np.array([c, c, rho - 1.0])


class TestRk4:
    def test_linear_decay_matches_exponential(self):
        traj = rk4_integrate(linear_decay(), [1.0], 0.0, 1.0, 1e-3)
        assert traj.times[-1] == pytest.approx(1.0, abs=1e-12)
        assert traj.states[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-6)

    def test_zero_field_is_constant(self):
        field = VectorField(dim=1, fn=lambda x, t, p: np.zeros(1))
        traj = rk4_integrate(field, [7.0], 0.0, 2.0, 0.1)
        assert np.all(traj.states == 7.0)

    def test_lorenz_fixed_point_stays_fixed(self):
        # C+ solves sigma(y-x)=0, x(rho-z)-y=0, xy-beta z=0
        rho = 24.5
        x0 = c_plus(rho)
        field = lorenz_field(sigma=10.0, rho=rho, beta=BETA)
        assert np.abs(field.eval(x0, 0.0)).max() < 1e-12
        traj = rk4_integrate(field, x0, 0.0, 1.0, 0.01)
        assert np.abs(traj.states - x0).max() < 1e-12

    def test_exact_equilibrium_is_exactly_preserved(self):
        field = lorenz_field(sigma=10.0, rho=24.5, beta=BETA)
        traj = rk4_integrate(field, np.zeros(3), 0.0, 1.0, 0.01)
        assert np.all(traj.states == 0.0)

    def test_divergence_error_names_step(self):
        field = VectorField(dim=1, fn=lambda x, t, p: x * x)  # blows up at t=1
        with pytest.raises(DivergenceError) as err:
            rk4_integrate(field, [1.0], 0.0, 5.0, 0.01)
        assert err.value.step > 0
        assert "step" in str(err.value)

    def test_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            rk4_integrate(linear_decay(), [1.0], 0.0, 1.0, -0.1)
        with pytest.raises(ValueError):
            rk4_integrate(linear_decay(), [1.0], 1.0, 1.0, 0.1)

    def test_uniform_time_grid(self):
        traj = rk4_integrate(linear_decay(), [1.0], 0.0, 0.35, 0.1)
        steps = np.diff(traj.times)
        assert traj.times[-1] >= 0.35 - 0.1
        assert np.abs(steps - 0.1).max() < 1e-12


class TestEulerMaruyama:
    def test_zero_noise_matches_exponential_within_euler_bound(self):
        dt = 1e-3
        spec = SdeSpec(drift=linear_decay(), noise_intensity=np.zeros(1))
        traj = euler_maruyama(spec, [1.0], 0.0, 1.0, dt, seed=0)
        assert abs(traj.states[-1, 0] - math.exp(-1.0)) < 5 * dt

    def test_same_seed_bitwise_identical(self):
        spec = SdeSpec(drift=hopf_field(-0.5), noise_intensity=np.array([0.1, 0.1]))
        a = euler_maruyama(spec, [0.1, 0.1], 0.0, 5.0, 0.01, seed=123)
        b = euler_maruyama(spec, [0.1, 0.1], 0.0, 5.0, 0.01, seed=123)
        assert np.array_equal(a.states, b.states)
        assert a.seed == 123

    def test_different_seeds_differ(self):
        spec = SdeSpec(drift=hopf_field(-0.5), noise_intensity=np.array([0.1, 0.1]))
        a = euler_maruyama(spec, [0.1, 0.1], 0.0, 5.0, 0.01, seed=1)
        b = euler_maruyama(spec, [0.1, 0.1], 0.0, 5.0, 0.01, seed=2)
        assert not np.array_equal(a.states, b.states)

    def test_zero_noise_first_order_convergence_vs_rk4(self):
        # non-chaotic start near C+ so errors do not saturate
        field = lorenz_field(sigma=10.0, rho=23.5, beta=BETA)
        x0 = np.array([8.246, 8.246, 23.0])
        spec = SdeSpec(drift=field, noise_intensity=np.zeros(3))
        errs = []
        for dt in (5e-4, 2.5e-4):
            ref = rk4_integrate(field, x0, 0.0, 10.0, dt)
            em = euler_maruyama(spec, x0, 0.0, 10.0, dt, seed=5)
            errs.append(np.abs(em.states - ref.states).max())
        assert 0.4 <= errs[1] / errs[0] <= 0.6

    def test_noise_intensity_validation(self):
        with pytest.raises(ValueError):
            SdeSpec(drift=hopf_field(0.0), noise_intensity=np.array([-0.1, 0.1]))
        with pytest.raises(ValueError):
            SdeSpec(drift=hopf_field(0.0), noise_intensity=np.array([0.1]))


class TestHopfField:
    def test_origin_is_equilibrium(self):
        field = hopf_field(0.7, 0.0)
        assert np.all(field.eval(np.zeros(2), 3.0) == 0.0)

    def test_direct_substitution(self):
        # lam=1 at (1, 0): f = lam*x - y - x y^2 = 1, g = x + lam*y - y^3 = 1
        field = hopf_field(1.0, 0.0)
        assert np.array_equal(field.eval(np.array([1.0, 0.0]), 0.0), [1.0, 1.0])

    def test_time_dependent_lambda(self):
        field = hopf_field(-1.0, 0.5)
        # at t=2, lam=0: f(1,0) = 0*1 - 0 - 0 = 0, g = 1
        assert np.array_equal(field.eval(np.array([1.0, 0.0]), 2.0), [0.0, 1.0])

    def test_subcritical_decay_to_origin(self):
        field = hopf_field(-0.5, 0.0)
        traj = rk4_integrate(field, [0.5, 0.5], 0.0, 100.0, 0.01)
        assert np.linalg.norm(traj.states[-1]) < 1e-3

    def test_radial_derivative_identity(self, rng):
        # 2 x f + 2 y g == 2 (lam - y^2)(x^2 + y^2) for the exact polynomials
        lam = 0.37
        field = hopf_field(lam, 0.0)
        for _ in range(100):
            x, y = rng.uniform(-2, 2, size=2)
            fx, gy = field.eval(np.array([x, y]), 0.0)
            lhs = 2 * x * fx + 2 * y * gy
            rhs = 2 * (lam - y * y) * (x * x + y * y)
            assert abs(lhs - rhs) < 1e-10


class TestLorenzField:
    def test_origin_is_equilibrium(self):
        field = lorenz_field(sigma=10.0, rho=24.5, beta=BETA)
        assert np.all(field.eval(np.zeros(3), 0.0) == 0.0)

    def test_both_fixed_points_vanish(self):
        rho = 24.5
        field = lorenz_field(sigma=10.0, rho=rho, beta=BETA)
        cp = c_plus(rho)
        cm = cp * np.array([-1.0, -1.0, 1.0])
        assert cp[0] == pytest.approx(7.9162, abs=5e-5)
        assert np.abs(field.eval(cp, 0.0)).max() < 1e-12
        assert np.abs(field.eval(cm, 0.0)).max() < 1e-12

    def test_rotation_symmetry_bitwise(self, rng):
        field = lorenz_field(sigma=10.0, rho=24.5, beta=BETA)
        for _ in range(20):
            state = rng.uniform(-20, 20, size=3)
            u, v, w = field.eval(state, 0.0)
            mirrored = field.eval(state * np.array([-1.0, -1.0, 1.0]), 0.0)
            assert np.array_equal(mirrored, np.array([-u, -v, w]))

    def test_trajectory_equivariance_bitwise(self):
        field = lorenz_field(sigma=10.0, rho=23.5, beta=BETA)
        flip = np.array([-1.0, -1.0, 1.0])
        a = rk4_integrate(field, np.array([1.0, 2.0, 3.0]), 0.0, 5.0, 0.01)
        b = rk4_integrate(field, np.array([1.0, 2.0, 3.0]) * flip, 0.0, 5.0, 0.01)
        assert np.array_equal(b.states, a.states * flip)


class TestTrajectory:
    def test_validation(self):
        with pytest.raises(ValueError):
            Trajectory(times=np.array([0.0]), states=np.zeros((1, 2)))
        with pytest.raises(ValueError):
            Trajectory(times=np.array([0.0, 0.1, 0.3]), states=np.zeros((3, 1)))

    def test_csv_roundtrip_exact(self, tmp_path):
        traj = rk4_integrate(lorenz_field(rho=23.5), np.array([1.0, 1.0, 1.0]), 0.0, 1.0, 0.01)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        back = trajectory_from_csv(path)
        assert np.array_equal(back.times, traj.times)
        assert np.array_equal(back.states, traj.states)
