"""Reduced description of the four-mass system: rigid-body coordinates.

On the constraint set, the four-mass six-rod system moves as a rigid body in
the plane, so a state is determined up to gauge by the center of mass, one
orientation angle, and their conjugate momenta.  The reduced evolution is
free: constant momenta, linear drift in position and angle.  This module is
hard-coded to that framework shape (a central vertex joined to an
equilateral triangle with side sqrt(3) times the central rod length).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import config
from .constraints import residuals
from .errors import ManifoldWarning, ReductionError
from .framework import check_point

__all__ = [
    "ReducedState",
    "system_parameters",
    "reduce_state",
    "reduced_hamiltonian",
    "reduced_flow",
]

_TWO_PI = 2.0 * math.pi


def _wrap_angle(a):
    """Wrap to the half-open interval (-pi, pi]."""
    w = math.remainder(a, _TWO_PI)
    return w + _TWO_PI if w <= -math.pi else w


@dataclass(frozen=True)
class ReducedState:
    """Center-of-mass position, orientation angle, and their momenta."""

    x: float
    y: float
    theta: float
    p_x: float
    p_y: float
    p_theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_angle(self.theta))


def _detect_shape(framework, rel_tol=1e-9):
    """Locate the central vertex; return (center, anchor, mass, ell).

    The anchor is the first non-central vertex in framework order; the
    orientation angle is measured toward it.
    """
    if framework.dimension != 2:
        raise ReductionError("reduction requires a planar framework")
    if framework.n_vertices != 4 or framework.n_edges != 6:
        raise ReductionError("reduction requires 4 vertices joined by 6 rods")
    masses = framework.masses
    if np.max(masses) - np.min(masses) > rel_tol * np.max(masses):
        raise ReductionError("reduction requires equal masses")
    lengths = framework.rest_lengths
    for center in range(4):
        incident = [
            k
            for k, (i, j) in enumerate(framework.edge_pairs)
            if center in (int(i), int(j))
        ]
        outer = [k for k in range(6) if k not in incident]
        ell = float(np.mean(lengths[incident]))
        side = float(np.mean(lengths[outer]))
        if (
            np.max(np.abs(lengths[incident] - ell)) <= rel_tol * ell
            and np.max(np.abs(lengths[outer] - side)) <= rel_tol * side
            and abs(side - math.sqrt(3.0) * ell) <= rel_tol * side
        ):
            anchor = next(v for v in range(4) if v != center)
            return center, anchor, float(masses[0]), ell
    raise ReductionError(
        "rod lengths do not match a central vertex inside an equilateral "
        "triangle of side sqrt(3) times the central rods"
    )


def system_parameters(framework):
    """Common vertex mass and central rod length of a reducible framework."""
    _, _, mass, ell = _detect_shape(framework)
    return mass, ell


def reduce_state(framework, point):
    """Map an admissible state to rigid-body coordinates.

    Position is the mass-weighted centroid, the angle is the direction of
    the anchor vertex from the centroid, momenta are total linear momentum
    and total angular momentum about the centroid.
    """
    check_point(framework, point)
    _, anchor, _, _ = _detect_shape(framework)
    gate = config.resolve(config.MANIFOLD_GATE)
    worst = residuals(framework, point).max_abs()
    if worst > gate:
        warnings.warn(
            f"reduce_state: constraint residuals {worst:.3e} exceed {gate:.3e}",
            ManifoldWarning,
            stacklevel=2,
        )
    m = framework.masses
    center = (m[:, None] * point.positions).sum(axis=0) / m.sum()
    direction = point.positions[anchor] - center
    rel = point.positions - center
    total_p = point.momenta.sum(axis=0)
    p_theta = float(
        np.sum(rel[:, 0] * point.momenta[:, 1] - rel[:, 1] * point.momenta[:, 0])
    )
    return ReducedState(
        x=float(center[0]),
        y=float(center[1]),
        theta=math.atan2(direction[1], direction[0]),
        p_x=float(total_p[0]),
        p_y=float(total_p[1]),
        p_theta=p_theta,
    )


def reduced_hamiltonian(state, m, ell):
    """Free energy in rigid-body coordinates.

    Total mass 4m carries the translational part; the moment of inertia
    about the centroid is 3 m ell^2 (length kept explicit rather than set
    to one).
    """
    return (state.p_x**2 + state.p_y**2) / (8.0 * m) + state.p_theta**2 / (
        6.0 * m * ell**2
    )


def reduced_flow(state, m, ell, t):
    """Closed-form evolution: momenta constant, position and angle linear."""
    return ReducedState(
        x=state.x + t * state.p_x / (4.0 * m),
        y=state.y + t * state.p_y / (4.0 * m),
        theta=_wrap_angle(state.theta + t * state.p_theta / (3.0 * m * ell**2)),
        p_x=state.p_x,
        p_y=state.p_y,
        p_theta=state.p_theta,
    )
