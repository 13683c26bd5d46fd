import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gauge_rig import (
    ManifoldWarning,
    PhasePoint,
    RodFramework,
    UnsolvableSystemError,
    assemble_tension_system,
    dimensionless_matrix,
    prepare_initial_data,
    reference_framework,
    residuals,
    rigidity_matrix,
    solvability_check,
    solve_tensions,
    solve_tensions_with_edge_value,
)
from gauge_rig.oracle import REFERENCE_TENSION_MATRIX, AnalyticSolution

KERNEL = np.array([3.0, 3.0, 3.0, -1.0, -1.0, -1.0])


def _rotated_state(rng):
    """Random admissible state of the reference system."""
    framework, configuration = reference_framework(1.0, 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    rot = np.array(
        [[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]]
    )
    coords = configuration.coords @ rot.T
    omega = rng.uniform(-2.0, 2.0)
    lam = rng.uniform(-1.0, 1.0)
    return framework, prepare_initial_data(framework, coords, omega, lam)


class TestResiduals:
    def test_rotating_solution_is_admissible(self, reference_system, rotating_point):
        framework, _ = reference_system
        res = residuals(framework, rotating_point)
        assert res.max_abs() < 1e-12
        assert_allclose(res.c0, 0.0)

    def test_static_force_free(self, reference_system):
        framework, configuration = reference_system
        point = PhasePoint(configuration.coords, np.zeros((4, 2)), np.zeros(6))
        res = residuals(framework, point)
        assert res.max_abs() == 0.0

    def test_scaled_positions_pin(self, reference_system):
        framework, configuration = reference_system
        point = PhasePoint(1.1 * configuration.coords, np.zeros((4, 2)), np.zeros(6))
        res = residuals(framework, point)
        assert_allclose(res.c1[:3], 0.21, atol=1e-12)
        assert_allclose(res.c1[3:], 0.63, atol=1e-12)


class TestAssembly:
    def test_reference_rank_and_kernel(self, reference_system, rotating_point):
        framework, _ = reference_system
        system = assemble_tension_system(
            framework, rotating_point.positions, rotating_point.momenta
        )
        assert system.rank == 5
        assert system.gauge_dimension == 1
        assert_allclose(system.self_stress_basis[0], KERNEL, atol=1e-9)
        assert_allclose(system.matrix, system.matrix.T)

    def test_dimensionless_matrix(self, reference_system, rotating_point):
        framework, _ = reference_system
        system = assemble_tension_system(
            framework, rotating_point.positions, rotating_point.momenta
        )
        assert_allclose(
            dimensionless_matrix(system, 1.0, 1.0),
            REFERENCE_TENSION_MATRIX,
            atol=1e-12,
        )

    def test_dimensionless_matrix_scaled_system(self):
        framework, configuration = reference_framework(ell=2.0, m=3.0)
        point = prepare_initial_data(framework, configuration, omega=0.5)
        system = assemble_tension_system(framework, point.positions, point.momenta)
        assert_allclose(
            dimensionless_matrix(system, 3.0, 2.0),
            REFERENCE_TENSION_MATRIX,
            atol=1e-12,
        )

    def test_five_rod_has_no_kernel(self, reference_system, rotating_point):
        framework, configuration = reference_system
        smaller = framework.without_edge("3", "4")
        momenta = rotating_point.momenta
        system = assemble_tension_system(smaller, configuration.coords, momenta)
        assert smaller.n_edges == 5
        assert system.rank == 5
        assert system.gauge_dimension == 0

    def test_off_manifold_warns(self, reference_system):
        framework, configuration = reference_system
        with pytest.warns(ManifoldWarning):
            assemble_tension_system(
                framework, 1.3 * configuration.coords, np.zeros((4, 2))
            )

    def test_matrix_is_weighted_rigidity_product(self):
        # equals R diag(1/m per coordinate) R^T / 2 built through rigidity_matrix
        rng = np.random.default_rng(11)
        framework, configuration = reference_framework(1.0, 1.0)
        for _ in range(4):
            coords = configuration.coords + 0.2 * rng.normal(size=(4, 2))
            system = assemble_tension_system(
                framework, coords, rng.normal(size=(4, 2)), warn=False
            )
            R = rigidity_matrix(framework, coords)
            weights = 1.0 / np.repeat(framework.masses, 2)
            assert_allclose(system.matrix, 0.5 * (R * weights) @ R.T, atol=1e-12)

    def test_matrix_matches_fd_jacobian_of_c3(self):
        rng = np.random.default_rng(23)
        framework, _ = reference_framework(1.0, 1.0)
        delta = 1e-5
        for _ in range(5):
            coords = rng.normal(size=(4, 2)) * 1.5
            momenta = rng.normal(size=(4, 2))
            system = assemble_tension_system(framework, coords, momenta, warn=False)
            fd = np.zeros((6, 6))
            for col in range(6):
                for sign in (1.0, -1.0):
                    tau = np.zeros(6)
                    tau[col] = sign * delta
                    c3 = residuals(
                        framework, PhasePoint(coords, momenta, tau)
                    ).c3
                    fd[:, col] -= sign * c3 / (2.0 * delta)
            scale = np.max(np.abs(system.matrix))
            assert_allclose(system.matrix, fd, atol=1e-8 * scale)

    def test_self_stress_balances_forces(self):
        rng = np.random.default_rng(3)
        framework, point = _rotated_state(rng)
        system = assemble_tension_system(
            framework, point.positions, point.momenta, warn=False
        )
        stress = system.self_stress_basis[0]
        q = point.positions
        for i in range(framework.n_vertices):
            net = np.zeros(2)
            for e, (a, b) in enumerate(framework.edge_pairs):
                a, b = int(a), int(b)
                if a == i:
                    net += stress[e] * (q[a] - q[b])
                elif b == i:
                    net += stress[e] * (q[b] - q[a])
            assert_allclose(net, 0.0, atol=1e-9)

    def test_unequal_masses_keep_kernel_and_symmetry(self, reference_system):
        framework, configuration = reference_system
        heavier = RodFramework(
            zip("1234", (1.0, 2.0, 3.0, 4.0)),
            list(zip(framework.edges, framework.rest_lengths)),
        )
        point = prepare_initial_data(heavier, configuration, omega=1.2, lam=0.3)
        system = assemble_tension_system(heavier, point.positions, point.momenta)
        assert_allclose(system.matrix, system.matrix.T)
        assert system.gauge_dimension == 1
        assert_allclose(system.self_stress_basis[0], KERNEL, atol=1e-9)
        assert residuals(heavier, point).max_abs() < 1e-12


class TestSolvability:
    def test_reference_solvable_any_omega(self, reference_system):
        framework, configuration = reference_system
        for omega in (0.0, 1.0, -1.7):
            point = prepare_initial_data(framework, configuration, omega)
            system = assemble_tension_system(
                framework, point.positions, point.momenta
            )
            solvable, violation = solvability_check(system)
            assert solvable
            assert violation < 1e-12

    def test_perturbed_rhs_violation_value(self, reference_system, rotating_point):
        framework, _ = reference_system
        system = assemble_tension_system(
            framework, rotating_point.positions, rotating_point.momenta
        )
        bumped = dataclasses.replace(system, rhs=system.rhs + np.eye(6)[0])
        solvable, violation = solvability_check(bumped)
        assert not solvable
        # |u . rhs'| / |rhs'| with unit u: (3/sqrt(30)) / sqrt(125)
        assert_allclose(violation, 3.0 / math.sqrt(3750.0), atol=1e-12)

    def test_zero_momenta_trivially_solvable(self, reference_system):
        framework, configuration = reference_system
        system = assemble_tension_system(
            framework, configuration.coords, np.zeros((4, 2))
        )
        assert_allclose(system.rhs, 0.0)
        assert system.solvable


class TestSolutions:
    def _system(self, reference_system, omega):
        framework, configuration = reference_system
        point = prepare_initial_data(framework, configuration, omega)
        return assemble_tension_system(framework, point.positions, point.momenta)

    def test_edge_value_parameterization(self, reference_system):
        system = self._system(reference_system, omega=1.0)
        lam0 = solve_tensions_with_edge_value(system, 0, 0.0).tensions
        assert_allclose(lam0, [0, 0, 0, 1 / 3, 1 / 3, 1 / 3], atol=1e-12)
        lam1 = solve_tensions_with_edge_value(system, 0, 1.0).tensions
        assert_allclose(lam1, [1, 1, 1, 0, 0, 0], atol=1e-12)

    def test_static_solution_is_stress_free(self, reference_system):
        system = self._system(reference_system, omega=0.0)
        solution = solve_tensions_with_edge_value(system, 0, 0.0)
        assert_allclose(solution.tensions, 0.0, atol=1e-13)

    def test_minimum_norm_particular(self, reference_system):
        system = self._system(reference_system, omega=1.0)
        solution = solve_tensions(system, [0.7])
        assert_allclose(float(solution.particular @ KERNEL), 0.0, atol=1e-12)
        assert_allclose(
            solution.tensions, solution.particular + 0.7 * KERNEL, atol=1e-13
        )

    def test_solution_family_stays_admissible(self, reference_system, rotating_point):
        framework, _ = reference_system
        system = assemble_tension_system(
            framework, rotating_point.positions, rotating_point.momenta
        )
        rng = np.random.default_rng(5)
        for _ in range(5):
            tensions = solve_tensions(system, rng.normal(size=1)).tensions
            point = rotating_point.replace(tensions=tensions)
            assert np.max(np.abs(residuals(framework, point).c3)) < 1e-10

    def test_unsolvable_raises_with_violation(self, reference_system, rotating_point):
        framework, _ = reference_system
        system = assemble_tension_system(
            framework, rotating_point.positions, rotating_point.momenta
        )
        bumped = dataclasses.replace(
            system, rhs=system.rhs + np.eye(6)[0], solvable=False, violation=0.049
        )
        with pytest.raises(UnsolvableSystemError) as err:
            solve_tensions(bumped)
        assert err.value.violation == 0.049

    def test_rank_plus_kernel_dimension(self, reference_system, rotating_point):
        framework, _ = reference_system
        system = assemble_tension_system(
            framework, rotating_point.positions, rotating_point.momenta
        )
        assert system.rank + system.gauge_dimension == framework.n_edges
