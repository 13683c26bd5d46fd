"""Ground-truth generators and brute-force checkers for the test suite.

The four-mass six-rod system has a closed-form solution family: the body
rotates rigidly at a constant rate while the central-rod tensions follow an
arbitrary function of time f, with the outer-rod tensions compensating so
the net force on every vertex stays the same.  This module produces states
of that family and checks them, and the package's assembled quantities,
against finite differences.  The brute-force matrix extraction here shares
no assembly code with :func:`gauge_rig.constraints.assemble_tension_system`.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .framework import PhasePoint, as_coords, reference_framework

__all__ = [
    "AnalyticSolution",
    "analytic_state",
    "verify_eom",
    "coefficient_extraction",
    "REFERENCE_TENSION_MATRIX",
]

# Dimensionless tension matrix of the reference system (unit mass, unit
# central rod length), edges ordered 1-2, 1-3, 1-4, 2-3, 2-4, 3-4.
REFERENCE_TENSION_MATRIX = np.array(
    [
        [4.0, -1.0, -1.0, 3.0, 3.0, 0.0],
        [-1.0, 4.0, -1.0, 3.0, 0.0, 3.0],
        [-1.0, -1.0, 4.0, 0.0, 3.0, 3.0],
        [3.0, 3.0, 0.0, 12.0, 3.0, 3.0],
        [3.0, 0.0, 3.0, 3.0, 12.0, 3.0],
        [0.0, 3.0, 3.0, 3.0, 3.0, 12.0],
    ]
)
REFERENCE_TENSION_MATRIX.setflags(write=False)

_PHASES = (0.0, -2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0)


@dataclass
class AnalyticSolution:
    """Closed-form motion of the reference system.

    The central vertex rests at the origin; the outer vertices circle it at
    angular rate ``omega``.  ``f`` gives the (shared) central-rod tension as
    a function of time; the outer rods carry ``(m omega^2 - f) / 3``.
    """

    omega: float
    ell: float = 1.0
    m: float = 1.0
    f: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not self.ell > 0 or not self.m > 0:
            raise ValueError("ell and m must be positive")
        if self.f is None:
            self.f = lambda t: 0.0

    @property
    def framework(self):
        cached = self.__dict__.get("_framework")
        if cached is None:
            cached, _ = reference_framework(self.ell, self.m)
            self.__dict__["_framework"] = cached
        return cached

    def positions(self, t):
        rows = [[0.0, 0.0]]
        for phase in _PHASES:
            angle = self.omega * t + phase
            rows.append([-self.ell * math.sin(angle), self.ell * math.cos(angle)])
        return np.array(rows)

    def momenta(self, t):
        scale = self.m * self.ell * self.omega
        rows = [[0.0, 0.0]]
        for phase in _PHASES:
            angle = self.omega * t + phase
            rows.append([-scale * math.cos(angle), -scale * math.sin(angle)])
        return np.array(rows)

    def tensions(self, t):
        inner = float(self.f(t))
        outer = (self.m * self.omega**2 - inner) / 3.0
        return np.array([inner, inner, inner, outer, outer, outer])

    def state(self, t):
        return PhasePoint(self.positions(t), self.momenta(t), self.tensions(t))


def analytic_state(solution, t):
    """State of the closed-form family at time t."""
    return solution.state(t)


def verify_eom(solution, t, h):
    """Max residual of the force law against finite-differenced accelerations.

    Central second differences of the closed-form positions are compared to
    force / mass at time t; the residual is O(h^2) for the true solution.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    framework = solution.framework
    q = solution.positions(t)
    acc_fd = (solution.positions(t + h) - 2.0 * q + solution.positions(t - h)) / h**2
    tau = solution.tensions(t)
    worst = 0.0
    for i in range(framework.n_vertices):
        force = np.zeros(framework.dimension)
        for e, (a, b) in enumerate(framework.edge_pairs):
            a, b = int(a), int(b)
            if a == i:
                force -= tau[e] * (q[a] - q[b])
            elif b == i:
                force -= tau[e] * (q[b] - q[a])
        residual = acc_fd[i] - force / framework.masses[i]
        worst = max(worst, float(np.max(np.abs(residual))))
    return worst


def _c3_direct(framework, q, v, tau):
    """Acceleration-level residuals, written independently of the package's
    vectorized assembly (plain loops over vertices and edges)."""
    nv = framework.n_vertices
    acc = [np.zeros(framework.dimension) for _ in range(nv)]
    for e, (i, j) in enumerate(framework.edge_pairs):
        i, j = int(i), int(j)
        bond = q[i] - q[j]
        acc[i] = acc[i] - tau[e] * bond / framework.masses[i]
        acc[j] = acc[j] + tau[e] * bond / framework.masses[j]
    out = np.zeros(framework.n_edges)
    for e, (i, j) in enumerate(framework.edge_pairs):
        i, j = int(i), int(j)
        dv = v[i] - v[j]
        da = acc[i] - acc[j]
        out[e] = 2.0 * float(dv @ dv) + 2.0 * float((q[i] - q[j]) @ da)
    return out


def coefficient_extraction(framework, positions, momenta, delta=1e-5):
    """Brute-force tension matrix: central differences of c3 in each tension.

    c3 is exactly linear in the tensions, so the extraction is exact up to
    roundoff.  The result is directly comparable to the matrix assembled by
    :func:`gauge_rig.constraints.assemble_tension_system`.
    """
    q = as_coords(framework, positions)
    v = np.asarray(momenta, dtype=float) / framework.masses[:, None]
    ne = framework.n_edges
    matrix = np.zeros((ne, ne))
    for col in range(ne):
        tau_plus = np.zeros(ne)
        tau_plus[col] = delta
        tau_minus = np.zeros(ne)
        tau_minus[col] = -delta
        diff = _c3_direct(framework, q, v, tau_plus) - _c3_direct(
            framework, q, v, tau_minus
        )
        matrix[:, col] = -diff / (2.0 * delta)
    return matrix
