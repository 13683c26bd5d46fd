"""Constraint hierarchy and the rod-tension linear system.

Four residual levels are tracked per edge:

* c0: multiplier momentum (zero for every admissible state),
* c1: squared length error  |q_i - q_j|^2 - L^2,
* c2: first time derivative of c1,  2 (q_i - q_j) . (v_i - v_j),
* c3: second time derivative of c1, 2 |v_i - v_j|^2 + 2 (q_i - q_j) . (a_i - a_j),

with velocities v_i = p_i / m_i and accelerations
a_i = -(1/m_i) sum_j tau_ij (q_i - q_j).  c3 is affine in the tensions, so the
acceleration-level conditions form a linear system

    matrix @ tensions == rhs,     matrix[e, e'] = -d c3_e / d tau_e',

whose kernel is the space of self-stresses: tension assignments exerting zero
net force at every vertex.  The kernel dimension is the gauge dimension of
the system, the number of free directions in the admissible tensions.

Scale convention: the time-derivative normalization above makes the matrix
equal to ``m / ell**2`` times its dimensionless form, so for the reference
system (mass m, central rod length ell) ``dimensionless_matrix`` returns a
constant integer matrix.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import (
    DegenerateConfigurationError,
    ManifoldWarning,
    UnsolvableSystemError,
)
from .framework import as_coords, check_point

__all__ = [
    "ConstraintResiduals",
    "TensionSystem",
    "TensionSolution",
    "residuals",
    "assemble_tension_system",
    "solvability_check",
    "solve_tensions",
    "solve_tensions_with_edge_value",
    "dimensionless_matrix",
]


@dataclass(frozen=True)
class ConstraintResiduals:
    """Per-edge residuals of the four constraint levels."""

    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray

    def max_abs(self):
        """Worst violation over c1, c2, c3 (c0 vanishes by construction)."""
        return max(
            float(np.max(np.abs(self.c1), initial=0.0)),
            float(np.max(np.abs(self.c2), initial=0.0)),
            float(np.max(np.abs(self.c3), initial=0.0)),
        )


@dataclass(frozen=True)
class TensionSystem:
    """The linear system for rod tensions at a fixed (positions, momenta).

    ``matrix`` is symmetric; ``rank + len(self_stress_basis) == n_edges``.
    ``self_stress_basis`` rows are canonically scaled (largest entry magnitude
    one, first nonzero entry positive, rationalized to small integers when
    the entries sit on an integer ratio).  ``kernel_orthonormal`` holds the
    same space as orthonormal rows for projections.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    rank: int
    self_stress_basis: np.ndarray
    solvable: bool
    violation: float
    edges: tuple = field(default=())
    kernel_orthonormal: np.ndarray = field(default=None, repr=False)
    singular_values: np.ndarray = field(default=None, repr=False)

    @property
    def gauge_dimension(self):
        return self.self_stress_basis.shape[0]

    def designated_edges(self):
        """Per basis vector, the first edge index with a nonzero entry."""
        out = []
        for row in self.self_stress_basis:
            nz = np.flatnonzero(np.abs(row) > 1e-12 * max(1.0, np.max(np.abs(row))))
            out.append(int(nz[0]))
        return tuple(out)

    def gauge_directions(self):
        """Self-stress basis rescaled to +1 on each designated edge.

        A coefficient in this convention equals the tension (or tension rate)
        contributed on that direction's designated edge.
        """
        k = self.gauge_dimension
        if k == 0:
            return np.zeros((0, self.matrix.shape[0]))
        dirs = np.array(self.self_stress_basis, dtype=float)
        for r, e in enumerate(self.designated_edges()):
            dirs[r] /= dirs[r, e]
        return dirs


@dataclass(frozen=True)
class TensionSolution:
    """Minimum-norm particular tensions plus a self-stress combination."""

    particular: np.ndarray
    kernel_coefficients: np.ndarray
    tensions: np.ndarray


def _accelerations(framework, coords, tensions):
    delta = coords[framework.edge_pairs[:, 0]] - coords[framework.edge_pairs[:, 1]]
    forces = -framework.incidence() @ (tensions[:, None] * delta)
    return forces / framework.masses[:, None]


def residuals(framework, point):
    """Evaluate all four constraint levels at a phase point."""
    check_point(framework, point)
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    q = point.positions
    delta = q[ei] - q[ej]
    c1 = (delta**2).sum(axis=1) - framework.squared_lengths
    v = point.momenta / framework.masses[:, None]
    dv = v[ei] - v[ej]
    c2 = 2.0 * (delta * dv).sum(axis=1)
    a = _accelerations(framework, q, point.tensions)
    c3 = 2.0 * (dv**2).sum(axis=1) + 2.0 * (delta * (a[ei] - a[ej])).sum(axis=1)
    return ConstraintResiduals(
        c0=np.array(point.edge_momenta), c1=c1, c2=c2, c3=c3
    )


def tension_matrix(framework, positions):
    """Coefficient matrix -d c3 / d tau at the given positions."""
    coords = as_coords(framework, positions)
    delta = coords[framework.edge_pairs[:, 0]] - coords[framework.edge_pairs[:, 1]]
    if np.any((delta**2).sum(axis=1) <= 1e-24):
        raise DegenerateConfigurationError("zero-length edge in configuration")
    return 2.0 * framework.pair_weights() * (delta @ delta.T)


def _canonical_vector(v):
    scaled = v / np.max(np.abs(v))
    nz = np.flatnonzero(np.abs(scaled) > 1e-12)
    if scaled[nz[0]] < 0:
        scaled = -scaled
    # integer rationalization: smallest multiplier putting all entries on ints
    for k in range(1, 49):
        stretched = k * scaled
        rounded = np.round(stretched)
        if np.max(np.abs(stretched - rounded)) <= 1e-9 * k:
            ints = rounded.astype(int)
            g = np.gcd.reduce(np.abs(ints[np.abs(ints) > 0]))
            return rounded / g if g > 1 else rounded
    return scaled


def _kernel_violation(kernel_orthonormal, rhs):
    if kernel_orthonormal.shape[0] == 0:
        return 0.0
    scale = float(np.linalg.norm(rhs))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(kernel_orthonormal @ rhs))) / scale


def assemble_tension_system(
    framework, positions, momenta, *, warn=True, solvability_tol=None
):
    """Build and analyze the linear system the tensions must satisfy.

    ``rhs`` is the kinetic part of c3, ``2 |v_i - v_j|^2`` per edge.  The
    positions are expected to satisfy c1 = 0 and the momenta c2 = 0; a
    :class:`ManifoldWarning` is issued otherwise (the system is still
    assembled).  Rank detection uses singular values with the cutoff
    ``config.RANK_EPS * sigma_max * n_edges``.
    """
    coords = as_coords(framework, positions)
    p = np.asarray(momenta, dtype=float)
    if p.shape != coords.shape:
        raise ValueError(f"momenta shape {p.shape} does not match positions")
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    delta = coords[ei] - coords[ej]
    v = p / framework.masses[:, None]
    dv = v[ei] - v[ej]

    if warn:
        c1 = (delta**2).sum(axis=1) - framework.squared_lengths
        c2 = 2.0 * (delta * dv).sum(axis=1)
        gate = config.resolve(config.MANIFOLD_GATE)
        worst = max(np.max(np.abs(c1), initial=0.0), np.max(np.abs(c2), initial=0.0))
        if worst > gate:
            warnings.warn(
                f"length or velocity constraints violated by {worst:.3e}",
                ManifoldWarning,
                stacklevel=2,
            )

    matrix = tension_matrix(framework, coords)
    rhs = 2.0 * (dv**2).sum(axis=1)

    ne = framework.n_edges
    _, sigma, vt = np.linalg.svd(matrix)
    cutoff = config.RANK_EPS * sigma[0] * ne if sigma[0] > 0 else 0.0
    rank = int(np.sum(sigma > cutoff))
    kernel_orthonormal = vt[rank:].copy()
    basis = (
        np.array([_canonical_vector(row) for row in kernel_orthonormal])
        if rank < ne
        else np.zeros((0, ne))
    )
    violation = _kernel_violation(kernel_orthonormal, rhs)
    tol = config.resolve(config.SOLVABILITY_TOL) if solvability_tol is None else solvability_tol
    return TensionSystem(
        matrix=matrix,
        rhs=rhs,
        rank=rank,
        self_stress_basis=basis,
        solvable=violation <= tol,
        violation=violation,
        edges=framework.edges,
        kernel_orthonormal=kernel_orthonormal,
        singular_values=sigma,
    )


def solvability_check(system, tol=None):
    """Whether the right-hand side is orthogonal to every self-stress.

    Returns ``(solvable, worst_violation)`` with the violation normalized by
    the right-hand-side norm.
    """
    tol = config.resolve(config.SOLVABILITY_TOL) if tol is None else tol
    violation = _kernel_violation(system.kernel_orthonormal, system.rhs)
    return violation <= tol, violation


def _min_norm_particular(system):
    rcond = config.RANK_EPS * system.matrix.shape[0]
    particular, *_ = np.linalg.lstsq(system.matrix, system.rhs, rcond=rcond)
    return particular


def solve_tensions(system, kernel_coefficients=None):
    """Tensions solving the system for the given self-stress coefficients.

    The coefficients multiply ``system.self_stress_basis`` rows and default
    to zero, which selects the minimum-norm solution (orthogonal to the
    self-stress space).
    """
    if not system.solvable:
        raise UnsolvableSystemError(
            f"tension system incompatible, violation {system.violation:.3e}",
            violation=system.violation,
        )
    particular = _min_norm_particular(system)
    k = system.gauge_dimension
    if kernel_coefficients is None:
        coeffs = np.zeros(k)
    else:
        coeffs = np.asarray(kernel_coefficients, dtype=float).ravel()
        if coeffs.size != k:
            raise ValueError(f"expected {k} kernel coefficients, got {coeffs.size}")
    tensions = particular + coeffs @ system.self_stress_basis
    return TensionSolution(
        particular=particular, kernel_coefficients=coeffs, tensions=tensions
    )


def solve_tensions_with_edge_value(system, edge_index, value):
    """Tensions solving the system with a prescribed value on one edge.

    Converts between self-stress coefficients and the "tension on edge e
    equals value" parameterization: the minimum-norm coefficient vector
    achieving ``tensions[edge_index] == value`` is used.  When the system has
    no self-stress the unique solution is returned and ``value`` is ignored.
    """
    if not system.solvable:
        raise UnsolvableSystemError(
            f"tension system incompatible, violation {system.violation:.3e}",
            violation=system.violation,
        )
    particular = _min_norm_particular(system)
    k = system.gauge_dimension
    if k == 0:
        return TensionSolution(
            particular=particular,
            kernel_coefficients=np.zeros(0),
            tensions=particular,
        )
    column = system.self_stress_basis[:, edge_index]
    norm2 = float(column @ column)
    if norm2 <= 1e-24:
        raise UnsolvableSystemError(
            f"self-stress space has no component on edge {edge_index}"
        )
    coeffs = column * ((value - particular[edge_index]) / norm2)
    tensions = particular + coeffs @ system.self_stress_basis
    return TensionSolution(
        particular=particular, kernel_coefficients=coeffs, tensions=tensions
    )


def dimensionless_matrix(system, mass, ell):
    """Rescale the tension matrix by ``mass / ell**2``.

    In this scale the reference system's matrix has the constant integer
    entries tabulated in :data:`gauge_rig.oracle.REFERENCE_TENSION_MATRIX`.
    """
    return system.matrix * (mass / ell**2)
