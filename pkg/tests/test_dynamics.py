import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gauge_rig import (
    GaugePolicy,
    ManifoldError,
    PhasePoint,
    ProjectionError,
    angular_rate,
    hamiltonian,
    integrate,
    per_particle_forces,
    prepare_initial_data,
    project_to_constraint_manifold,
    reference_framework,
    residuals,
    tangency_solve_multiplier_rates,
    vector_field,
)

KERNEL = np.array([3.0, 3.0, 3.0, -1.0, -1.0, -1.0])


class TestHamiltonian:
    def test_rotating_energy(self, reference_system, rotating_point):
        framework, _ = reference_system
        assert_allclose(hamiltonian(framework, rotating_point), 1.5, atol=1e-14)

    def test_static_zero(self, reference_system):
        framework, configuration = reference_system
        point = PhasePoint(configuration.coords, np.zeros((4, 2)), np.zeros(6))
        assert hamiltonian(framework, point) == 0.0

    def test_length_error_term(self, reference_system):
        framework, configuration = reference_system
        point = PhasePoint(1.1 * configuration.coords, np.zeros((4, 2)), np.ones(6))
        # 0.5 * (3 * 0.21 + 3 * 0.63) evaluated by hand
        assert_allclose(hamiltonian(framework, point), 1.26, atol=1e-12)


class TestVectorField:
    def test_rotating_zero_policy(self, reference_system, rotating_point):
        framework, _ = reference_system
        value = vector_field(framework, rotating_point, GaugePolicy.zero())
        assert_allclose(value.d_positions, rotating_point.momenta, atol=1e-15)
        assert_allclose(
            value.d_momenta, -rotating_point.positions, atol=1e-14
        )  # centripetal force at omega = 1
        assert_allclose(value.d_tensions, 0.0, atol=1e-12)
        assert_allclose(value.d_edge_momenta, 0.0)

    def test_policy_pattern(self, reference_system, rotating_point):
        framework, _ = reference_system
        value = vector_field(framework, rotating_point, GaugePolicy.constant(2.5))
        expected = 2.5 * np.array([1, 1, 1, -1 / 3, -1 / 3, -1 / 3])
        assert_allclose(value.d_tensions, expected, atol=1e-12)

    def test_equilibrium_is_fixed_point(self, reference_system):
        framework, configuration = reference_system
        point = PhasePoint(configuration.coords, np.zeros((4, 2)), np.zeros(6))
        value = vector_field(framework, point, GaugePolicy.zero())
        assert_allclose(value.d_positions, 0.0)
        assert_allclose(value.d_momenta, 0.0)
        assert_allclose(value.d_tensions, 0.0, atol=1e-15)

    def test_matches_trajectory_derivative(self, reference_system, rotating_point):
        framework, _ = reference_system
        policy = GaugePolicy.sine(0.8, 1.3)
        step = 1e-3
        trajectory = integrate(framework, rotating_point, policy, 4 * step, step)
        mid = 2
        value = vector_field(
            framework, trajectory.state(mid), policy, time=trajectory.times[mid]
        )
        for attr, rate in (
            ("positions", value.d_positions),
            ("momenta", value.d_momenta),
            ("tensions", value.d_tensions),
        ):
            arr = getattr(trajectory, attr)
            fd = (arr[mid + 1] - arr[mid - 1]) / (2.0 * step)
            assert_allclose(fd, rate, atol=1e-6)


class TestTangency:
    def test_rotating_point(self, reference_system, rotating_point):
        framework, _ = reference_system
        rates = tangency_solve_multiplier_rates(framework, rotating_point)
        assert rates.compatibility < 1e-12
        assert_allclose(rates.particular, 0.0, atol=1e-12)
        assert_allclose(rates.kernel_basis[0], KERNEL, atol=1e-9)

    def test_static_point(self, reference_system):
        framework, configuration = reference_system
        point = prepare_initial_data(framework, configuration, omega=0.0)
        rates = tangency_solve_multiplier_rates(framework, point)
        assert_allclose(rates.particular, 0.0, atol=1e-14)

    def test_five_rod_unique(self, reference_system):
        framework, configuration = reference_system
        smaller = framework.without_edge("3", "4")
        point = prepare_initial_data(smaller, configuration, omega=1.0)
        rates = tangency_solve_multiplier_rates(smaller, point)
        assert rates.kernel_basis.shape == (0, 5)


class TestPrepare:
    def test_reference_momenta(self, rotating_point):
        assert_allclose(
            rotating_point.momenta,
            [[0, 0], [-1, 0], [0.5, math.sqrt(3) / 2], [0.5, -math.sqrt(3) / 2]],
            atol=1e-15,
        )

    def test_static(self, reference_system):
        framework, configuration = reference_system
        point = prepare_initial_data(framework, configuration, omega=0.0, lam=0.0)
        assert_allclose(point.momenta, 0.0)
        assert_allclose(point.tensions, 0.0, atol=1e-14)

    def test_faster_rotation_tensions(self, reference_system):
        framework, configuration = reference_system
        point = prepare_initial_data(framework, configuration, omega=2.0, lam=0.0)
        assert_allclose(
            point.tensions, [0, 0, 0, 4 / 3, 4 / 3, 4 / 3], atol=1e-12
        )

    def test_five_rod_unique_tensions(self, reference_system):
        framework, configuration = reference_system
        smaller = framework.without_edge("3", "4")
        point = prepare_initial_data(smaller, configuration, omega=1.0)
        assert_allclose(point.tensions, [1, 1, 1, 0, 0], atol=1e-12)
        assert residuals(smaller, point).max_abs() < 1e-12

    def test_rejects_broken_lengths(self, reference_system):
        framework, configuration = reference_system
        with pytest.raises(ManifoldError, match="length"):
            prepare_initial_data(framework, 1.01 * configuration.coords, omega=1.0)


class TestProjection:
    def test_fixed_point(self, reference_system, rotating_point):
        framework, _ = reference_system
        projected = project_to_constraint_manifold(framework, rotating_point)
        assert np.max(np.abs(projected.positions - rotating_point.positions)) < 1e-14
        assert np.max(np.abs(projected.momenta - rotating_point.momenta)) < 1e-14
        assert np.max(np.abs(projected.tensions - rotating_point.tensions)) < 1e-14

    def test_position_noise_removed(self, reference_system, rotating_point):
        framework, _ = reference_system
        rng = np.random.default_rng(17)
        noisy = rotating_point.replace(
            positions=rotating_point.positions + 1e-4 * rng.normal(size=(4, 2))
        )
        projected = project_to_constraint_manifold(framework, noisy)
        assert np.max(np.abs(residuals(framework, projected).c1)) < 1e-12

    def test_momenta_become_rigid(self, reference_system, rotating_point):
        framework, _ = reference_system
        rng = np.random.default_rng(18)
        wild = rotating_point.replace(momenta=1e-2 * rng.normal(size=(4, 2)))
        projected = project_to_constraint_manifold(framework, wild)
        omega = angular_rate(framework, projected)
        q, p = projected.positions, projected.momenta
        m = framework.masses
        for e, (i, j) in enumerate(framework.edge_pairs):
            i, j = int(i), int(j)
            dq = q[i] - q[j]
            expected = m[i] * omega * np.array([-dq[1], dq[0]])
            assert_allclose(p[i] - p[j], expected, atol=1e-10)

    def test_kernel_coordinate_preserved(self, reference_system):
        framework, configuration = reference_system
        point = prepare_initial_data(framework, configuration, omega=1.0, lam=0.4)
        rng = np.random.default_rng(19)
        noisy = point.replace(
            positions=point.positions + 1e-5 * rng.normal(size=(4, 2))
        )
        projected = project_to_constraint_manifold(framework, noisy)
        unit = KERNEL / np.linalg.norm(KERNEL)
        assert_allclose(
            float(unit @ projected.tensions), float(unit @ point.tensions), atol=1e-9
        )

    def test_basin_gate(self, reference_system, rotating_point):
        framework, _ = reference_system
        far = rotating_point.replace(positions=1.5 * rotating_point.positions)
        with pytest.raises(ProjectionError, match="gate"):
            project_to_constraint_manifold(framework, far)


class TestIntegration:
    def test_equilibrium_stays_put(self, reference_system):
        framework, configuration = reference_system
        point = PhasePoint(configuration.coords, np.zeros((4, 2)), np.zeros(6))
        trajectory = integrate(framework, point, GaugePolicy.zero(), 0.1, 1e-2)
        assert_allclose(trajectory.positions, trajectory.positions[0], atol=1e-13)
        assert_allclose(trajectory.momenta, 0.0, atol=1e-13)
        assert_allclose(trajectory.tensions, 0.0, atol=1e-13)

    def test_deterministic(self, reference_system, rotating_point):
        framework, _ = reference_system
        policy = GaugePolicy.cosine(1.0, 1.0)
        one = integrate(framework, rotating_point, policy, 0.05, 1e-3)
        two = integrate(framework, rotating_point, policy, 0.05, 1e-3)
        assert np.array_equal(one.positions, two.positions)
        assert np.array_equal(one.tensions, two.tensions)

    def test_energy_drift_over_period(self, period_run_xi_zero):
        trajectory, _ = period_run_xi_zero
        drift = np.max(np.abs(trajectory.energies - trajectory.energies[0]))
        assert drift < 1e-8

    def test_constraint_drift_over_period(self, period_run_xi_zero):
        trajectory, _ = period_run_xi_zero
        assert trajectory.c1_max.max() < 1e-10
        assert trajectory.c2_max.max() < 1e-10
        assert trajectory.c3_max.max() < 1e-10

    def test_invariant_tension_functional(self, reference_system, rotating_point):
        framework, _ = reference_system
        trajectory = integrate(
            framework, rotating_point, GaugePolicy.cosine(1.0, 1.0), 0.4, 1e-3
        )
        functional = trajectory.tensions[:, 0] + 3.0 * trajectory.tensions[:, 3]
        assert np.max(np.abs(functional - 1.0)) < 1e-10

    def test_forces_recorded(self, reference_system, rotating_point):
        framework, _ = reference_system
        trajectory = integrate(
            framework, rotating_point, GaugePolicy.zero(), 0.01, 1e-3
        )
        expected = per_particle_forces(framework, trajectory.state(0))
        assert_allclose(trajectory.forces[0], expected)

    def test_bad_arguments(self, reference_system, rotating_point):
        framework, _ = reference_system
        with pytest.raises(ValueError, match="step"):
            integrate(framework, rotating_point, GaugePolicy.zero(), 1.0, 0.0)
        with pytest.raises(ValueError, match="t_end"):
            integrate(framework, rotating_point, GaugePolicy.zero(), 0.0, 1e-3)


def test_angular_rate_fit(reference_system):
    framework, configuration = reference_system
    for omega in (0.0, 0.3, -1.8):
        point = prepare_initial_data(framework, configuration, omega)
        assert_allclose(angular_rate(framework, point), omega, atol=1e-13)
