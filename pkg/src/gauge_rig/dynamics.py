"""Hamiltonian evolution on the constraint manifold.

The admissible states satisfy c1 = c2 = c3 = 0 (see :mod:`.constraints`).
On that set the evolution is

    dq_i/dt   = p_i / m_i
    dp_i/dt   = -sum_j tau_ij (q_i - q_j)
    dtau/dt   = particular tangency solution + free self-stress combination

where the tension rates solve the tangency condition (time derivative of c3
vanishes along the flow).  The self-stress part is arbitrary; a
:class:`GaugePolicy` supplies it.  Physically measurable output (positions,
momenta, per-particle forces) is independent of the policy; individual rod
tensions are not.

Integration uses the classical fourth-order one-step method with the policy
evaluated at each stage time, followed by a projection back onto the
constraint set after every step (position Gauss-Newton, momentum projection
onto the rigidity-matrix kernel, tension re-solve preserving the self-stress
coordinates).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import config
from .constraints import (
    _canonical_vector,
    assemble_tension_system,
    residuals,
    solve_tensions_with_edge_value,
    tension_matrix,
)
from .errors import ManifoldError, ManifoldWarning, ProjectionError
from .framework import PhasePoint, as_coords, check_point, rigidity_matrix

__all__ = [
    "GaugePolicy",
    "VectorFieldValue",
    "TangencyRates",
    "Trajectory",
    "hamiltonian",
    "per_particle_forces",
    "angular_rate",
    "rigid_body_momenta",
    "vector_field",
    "tangency_solve_multiplier_rates",
    "prepare_initial_data",
    "project_to_constraint_manifold",
    "integrate",
]


class GaugePolicy:
    """Chooses the free part of the tension rates along the flow.

    ``evaluator(t, point)`` must return one coefficient per self-stress
    direction of the current tension system; a scalar return value is
    broadcast.  Coefficient k equals the tension rate the policy adds on the
    designated edge of self-stress direction k (the first edge where that
    direction is nonzero), matching the edge-value parameterization used for
    tensions themselves.
    """

    def __init__(self, evaluator, name="custom"):
        self.evaluator = evaluator
        self.name = str(name)

    def __call__(self, t, point):
        return self.evaluator(t, point)

    def __repr__(self):
        return f"GaugePolicy({self.name!r})"

    @classmethod
    def zero(cls):
        return cls(lambda t, point: 0.0, name="0")

    @classmethod
    def constant(cls, value, name=None):
        value = float(value)
        return cls(lambda t, point: value, name=name or f"const:{value:g}")

    @classmethod
    def cosine(cls, amplitude=1.0, angular_frequency=1.0):
        a, w = float(amplitude), float(angular_frequency)
        return cls(lambda t, point: a * math.cos(w * t), name=f"cos:{a:g},{w:g}")

    @classmethod
    def sine(cls, amplitude=1.0, angular_frequency=1.0):
        a, w = float(amplitude), float(angular_frequency)
        return cls(lambda t, point: a * math.sin(w * t), name=f"sin:{a:g},{w:g}")

    @classmethod
    def from_spec(cls, text):
        """Parse a policy spec: a float literal, ``const:c``, ``cos:a,w``,
        or ``sin:a,w`` (meaning a*cos(w t) and a*sin(w t))."""
        text = str(text).strip()
        if ":" in text:
            head, _, tail = text.partition(":")
            head = head.strip().lower()
            parts = [s.strip() for s in tail.split(",") if s.strip()]
            try:
                values = [float(s) for s in parts]
            except ValueError:
                raise ValueError(f"bad policy parameters in {text!r}") from None
            if head == "const" and len(values) == 1:
                return cls.constant(values[0], name=text)
            if head in ("cos", "sin") and 1 <= len(values) <= 2:
                a = values[0]
                w = values[1] if len(values) == 2 else 1.0
                made = cls.cosine(a, w) if head == "cos" else cls.sine(a, w)
                made.name = text
                return made
            raise ValueError(f"unknown policy spec {text!r}")
        try:
            return cls.constant(float(text), name=text)
        except ValueError:
            raise ValueError(f"unknown policy spec {text!r}") from None


@dataclass(frozen=True)
class VectorFieldValue:
    """Evolution rates of positions, momenta, tensions, multiplier momenta."""

    d_positions: np.ndarray
    d_momenta: np.ndarray
    d_tensions: np.ndarray
    d_edge_momenta: np.ndarray


@dataclass(frozen=True)
class TangencyRates:
    """Affine space of admissible tension rates: particular + span(kernel)."""

    particular: np.ndarray
    kernel_basis: np.ndarray
    compatibility: float


class Trajectory:
    """Time-sampled states plus derived observables.

    Stored per sample: positions, momenta, tensions, total energy, worst
    residual of each constraint level, and per-particle force vectors.
    """

    def __init__(
        self, times, positions, momenta, tensions, energies, c1_max, c2_max,
        c3_max, forces,
    ):
        self.times = np.asarray(times, dtype=float)
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("sample times must be strictly increasing")
        self.positions = np.asarray(positions, dtype=float)
        self.momenta = np.asarray(momenta, dtype=float)
        self.tensions = np.asarray(tensions, dtype=float)
        self.energies = np.asarray(energies, dtype=float)
        self.c1_max = np.asarray(c1_max, dtype=float)
        self.c2_max = np.asarray(c2_max, dtype=float)
        self.c3_max = np.asarray(c3_max, dtype=float)
        self.forces = np.asarray(forces, dtype=float)
        n = self.times.size
        for name in ("positions", "momenta", "tensions", "energies",
                     "c1_max", "c2_max", "c3_max", "forces"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} does not have one entry per sample")

    def __len__(self):
        return self.times.size

    def state(self, k):
        return PhasePoint(self.positions[k], self.momenta[k], self.tensions[k])

    @property
    def states(self):
        cached = self.__dict__.get("_states")
        if cached is None:
            cached = [self.state(k) for k in range(len(self))]
            self.__dict__["_states"] = cached
        return cached


# -- pointwise quantities ---------------------------------------------------


def hamiltonian(framework, point):
    """Kinetic energy plus the tension-weighted length-error term."""
    check_point(framework, point)
    kinetic = float(
        np.sum((point.momenta**2).sum(axis=1) / (2.0 * framework.masses))
    )
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    delta = point.positions[ei] - point.positions[ej]
    c1 = (delta**2).sum(axis=1) - framework.squared_lengths
    return kinetic + 0.5 * float(point.tensions @ c1)


def per_particle_forces(framework, point):
    """Total rod force on each vertex, -sum_j tau_ij (q_i - q_j)."""
    check_point(framework, point)
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    delta = point.positions[ei] - point.positions[ej]
    return -framework.incidence() @ (point.tensions[:, None] * delta)


def angular_rate(framework, point):
    """Least-squares angular velocity of the rigid-body momentum field.

    Fits ``v_i - v_j = omega * R90 (q_i - q_j)`` over all edges, where R90
    is the quarter-turn rotation.  Exact on admissible states, where the
    momenta are those of a rigid body.
    """
    check_point(framework, point)
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    delta = point.positions[ei] - point.positions[ej]
    v = point.momenta / framework.masses[:, None]
    dv = v[ei] - v[ej]
    rotated = np.stack([-delta[:, 1], delta[:, 0]], axis=1)
    denom = float((rotated**2).sum())
    return float((dv * rotated).sum()) / denom if denom > 0 else 0.0


def rigid_body_momenta(framework, positions, omega):
    """Momenta of a rigid rotation about the center of mass."""
    coords = as_coords(framework, positions)
    if framework.dimension != 2:
        raise ValueError("rigid rotation momenta require a planar framework")
    m = framework.masses
    center = (m[:, None] * coords).sum(axis=0) / m.sum()
    rel = coords - center
    rotated = np.stack([-rel[:, 1], rel[:, 0]], axis=1)
    return float(omega) * m[:, None] * rotated


# -- the stage engine ---------------------------------------------------------


def _designated_directions(kernel_rows):
    """Rescale self-stress rows to +1 on their first significant entry."""
    directions = np.array(kernel_rows)
    for r in range(directions.shape[0]):
        row = directions[r]
        nz = np.flatnonzero(np.abs(row) > 1e-12 * max(1.0, np.max(np.abs(row))))
        directions[r] = row / row[nz[0]]
    return directions


def _tangency_affine(framework, q, p, tau):
    """Tension-rate tangency data at raw arrays (q, p, tau).

    Returns (dq, dp, particular, kernel_orthonormal, compatibility) where dq
    and dp are the position and momentum rates and the admissible tension
    rates form particular + span(kernel_orthonormal).
    """
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    masses = framework.masses
    B = framework.incidence()

    v = p / masses[:, None]
    delta = q[ei] - q[ej]
    dv = v[ei] - v[ej]
    forces = -B @ (tau[:, None] * delta)
    a = forces / masses[:, None]
    # rate of the acceleration at frozen tensions
    b = (-B @ (tau[:, None] * dv)) / masses[:, None]

    matrix = tension_matrix(framework, q)
    rhs = 6.0 * (dv * (a[ei] - a[ej])).sum(axis=1) + 2.0 * (
        delta * (b[ei] - b[ej])
    ).sum(axis=1)

    ne = framework.n_edges
    u, sigma, vt = np.linalg.svd(matrix)
    cutoff = config.RANK_EPS * sigma[0] * ne if sigma[0] > 0 else 0.0
    rank = int(np.sum(sigma > cutoff))
    kernel_orthonormal = vt[rank:]
    if kernel_orthonormal.shape[0]:
        compatibility = float(np.max(np.abs(kernel_orthonormal @ rhs))) / max(
            1.0, float(np.linalg.norm(rhs))
        )
    else:
        compatibility = 0.0
    if compatibility > config.COMPATIBILITY_TOL:
        raise ManifoldError(
            "tangency system incompatible "
            f"(residual {compatibility:.3e}); the state is off the constraint set"
        )
    particular = vt[:rank].T @ ((u[:, :rank].T @ rhs) / sigma[:rank])
    return v, forces, particular, kernel_orthonormal, compatibility


def _stage_field(framework, t, q, p, tau, policy):
    """One evaluation of the evolution rates at raw arrays."""
    dq, dp, particular, kernel, _ = _tangency_affine(framework, q, p, tau)
    k = kernel.shape[0]
    if k == 0:
        return dq, dp, particular
    directions = _designated_directions(kernel)
    xi = np.asarray(policy(t, PhasePoint(q, p, tau)), dtype=float).ravel()
    if xi.size == 1 and k != 1:
        xi = np.full(k, xi[0])
    if xi.size != k:
        raise ValueError(
            f"policy {policy.name!r} returned {xi.size} coefficients, "
            f"gauge dimension is {k}"
        )
    return dq, dp, particular + xi @ directions


# -- public operations --------------------------------------------------------


def _warn_if_off_manifold(framework, point, what):
    gate = config.resolve(config.MANIFOLD_GATE)
    worst = residuals(framework, point).max_abs()
    if worst > gate:
        warnings.warn(
            f"{what}: constraint residuals {worst:.3e} exceed {gate:.3e}",
            ManifoldWarning,
            stacklevel=3,
        )


def vector_field(framework, point, policy, time=0.0):
    """Evolution rates at an admissible state under the given policy."""
    check_point(framework, point)
    _warn_if_off_manifold(framework, point, "vector_field")
    dq, dp, dtau = _stage_field(
        framework, time, point.positions, point.momenta, point.tensions, policy
    )
    return VectorFieldValue(
        d_positions=dq,
        d_momenta=dp,
        d_tensions=dtau,
        d_edge_momenta=np.zeros_like(dtau),
    )


def tangency_solve_multiplier_rates(framework, point):
    """Affine space of tension rates keeping c3 zero along the flow.

    The compatibility of the underlying linear system is verified
    numerically; an incompatibility beyond ``config.COMPATIBILITY_TOL``
    raises :class:`ManifoldError` (it signals an off-manifold state).
    """
    check_point(framework, point)
    _warn_if_off_manifold(framework, point, "tangency solve")
    _, _, particular, kernel, compatibility = _tangency_affine(
        framework, point.positions, point.momenta, point.tensions
    )
    basis = (
        np.array([_canonical_vector(row) for row in kernel])
        if kernel.shape[0]
        else np.zeros((0, framework.n_edges))
    )
    return TangencyRates(
        particular=particular, kernel_basis=basis, compatibility=compatibility
    )


def prepare_initial_data(framework, configuration, omega, lam=0.0):
    """Admissible state: rigid rotation at rate omega, designated tension lam.

    The configuration must satisfy the length constraints.  Momenta are those
    of a rigid rotation about the center of mass; tensions solve the
    acceleration-level system with the value ``lam`` on the designated gauge
    edge (ignored when the framework has no self-stress).
    """
    coords = as_coords(framework, configuration)
    scale = 1.0 + float(np.max(framework.squared_lengths))
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    c1 = ((coords[ei] - coords[ej]) ** 2).sum(axis=1) - framework.squared_lengths
    if np.max(np.abs(c1)) > 1e-12 * scale:
        raise ManifoldError(
            f"configuration violates length constraints by {np.max(np.abs(c1)):.3e}"
        )
    momenta = rigid_body_momenta(framework, coords, omega)
    system = assemble_tension_system(framework, coords, momenta, warn=False)
    if system.gauge_dimension:
        edge = system.designated_edges()[0]
        solution = solve_tensions_with_edge_value(system, edge, lam)
    else:
        solution = solve_tensions_with_edge_value(system, 0, lam)
    point = PhasePoint(coords, momenta, solution.tensions)
    worst = residuals(framework, point).max_abs()
    if worst > 1e-12 * scale:
        raise ManifoldError(f"prepared state misses the constraint set by {worst:.3e}")
    return point


# -- projection ---------------------------------------------------------------


def _project_positions(framework, q, tol, max_iter):
    q = np.array(q)
    nv, d = q.shape
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    for _ in range(max_iter):
        c1 = ((q[ei] - q[ej]) ** 2).sum(axis=1) - framework.squared_lengths
        if np.max(np.abs(c1)) <= tol:
            return q
        jac = rigidity_matrix(framework, q)
        step, *_ = np.linalg.lstsq(jac, c1, rcond=None)
        q = q - step.reshape(nv, d)
    c1 = ((q[ei] - q[ej]) ** 2).sum(axis=1) - framework.squared_lengths
    raise ProjectionError(
        f"position projection stalled at residual {np.max(np.abs(c1)):.3e} "
        f"after {max_iter} iterations"
    )


def _project_momenta(framework, q, p, tol):
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    v = p / framework.masses[:, None]
    c2 = 2.0 * ((q[ei] - q[ej]) * (v[ei] - v[ej])).sum(axis=1)
    if np.max(np.abs(c2), initial=0.0) <= tol:
        return p
    nv, d = q.shape
    # c2 == bmat @ p_flat; remove the row-space component of p
    bmat = rigidity_matrix(framework, q) / np.repeat(framework.masses, d)[None, :]
    p_flat = p.reshape(-1)
    p_flat = p_flat - np.linalg.pinv(bmat, rcond=1e-12) @ (bmat @ p_flat)
    return p_flat.reshape(nv, d)


def _project_tensions(framework, q, p, tau, tol):
    ei = framework.edge_pairs[:, 0]
    ej = framework.edge_pairs[:, 1]
    delta = q[ei] - q[ej]
    v = p / framework.masses[:, None]
    dv = v[ei] - v[ej]
    a = -framework.incidence() @ (tau[:, None] * delta) / framework.masses[:, None]
    c3 = 2.0 * (dv**2).sum(axis=1) + 2.0 * (delta * (a[ei] - a[ej])).sum(axis=1)
    if np.max(np.abs(c3), initial=0.0) <= tol:
        return tau
    system = assemble_tension_system(framework, q, p, warn=False)
    if not system.solvable:
        raise ProjectionError(
            f"tension system incompatible (violation {system.violation:.3e})"
        )
    particular = np.linalg.lstsq(
        system.matrix, system.rhs, rcond=config.RANK_EPS * framework.n_edges
    )[0]
    kernel = system.kernel_orthonormal
    return particular + kernel.T @ (kernel @ tau) if kernel.shape[0] else particular


def project_to_constraint_manifold(
    framework, point, *, basin_gate=None, tol=None, max_iter=50
):
    """Project a nearby state back onto the constraint set.

    Projection order follows the constraint hierarchy: positions first
    (Gauss-Newton on the edge lengths), then momenta (orthogonal projection
    onto the rigidity-matrix kernel), then tensions (re-solve keeping the
    self-stress coordinates).  A state already on the constraint set is a
    fixed point.  Residuals beyond ``basin_gate`` are rejected outright.
    """
    check_point(framework, point)
    basin_gate = config.BASIN_GATE if basin_gate is None else basin_gate
    tol = config.resolve(config.PROJECTION_TOL) if tol is None else tol
    worst = residuals(framework, point).max_abs()
    if worst > basin_gate:
        raise ProjectionError(
            f"residuals {worst:.3e} exceed the projection gate {basin_gate:.3e}"
        )
    q = _project_positions(framework, point.positions, tol, max_iter)
    p = _project_momenta(framework, q, point.momenta, tol)
    tau = _project_tensions(framework, q, p, point.tensions, tol)
    return PhasePoint(q, p, tau)


# -- integration ---------------------------------------------------------------


def _sample_times(t_start, t_end, step):
    n_full = int(math.floor((t_end - t_start) / step + 1e-9))
    times = t_start + step * np.arange(n_full + 1)
    if t_end - times[-1] > 1e-12 * step:
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def integrate(framework, initial, policy, t_end, step, *, t_start=0.0):
    """Evolve an admissible state and record observables at every step.

    Classical fourth-order Runge-Kutta on (positions, momenta, tensions)
    with the policy evaluated at each stage time, then projection back onto
    the constraint set.  The initial state is projected first and must lie
    within the projection basin.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if not t_end > t_start:
        raise ValueError("t_end must exceed t_start")
    start = project_to_constraint_manifold(framework, initial)
    tol = config.resolve(config.PROJECTION_TOL)

    times = _sample_times(t_start, t_end, step)
    n = times.size
    nv, d = start.positions.shape
    ne = framework.n_edges

    positions = np.empty((n, nv, d))
    momenta = np.empty((n, nv, d))
    tensions = np.empty((n, ne))
    energies = np.empty(n)
    c_max = np.empty((n, 3))
    forces = np.empty((n, nv, d))

    q = np.array(start.positions)
    p = np.array(start.momenta)
    tau = np.array(start.tensions)

    def record(k):
        point = PhasePoint(q, p, tau)
        res = residuals(framework, point)
        positions[k] = q
        momenta[k] = p
        tensions[k] = tau
        energies[k] = hamiltonian(framework, point)
        c_max[k] = (
            np.max(np.abs(res.c1)),
            np.max(np.abs(res.c2)),
            np.max(np.abs(res.c3)),
        )
        forces[k] = per_particle_forces(framework, point)

    record(0)
    for k in range(n - 1):
        t0, t1 = times[k], times[k + 1]
        h = t1 - t0
        try:
            k1 = _stage_field(framework, t0, q, p, tau, policy)
            k2 = _stage_field(
                framework,
                t0 + 0.5 * h,
                q + 0.5 * h * k1[0],
                p + 0.5 * h * k1[1],
                tau + 0.5 * h * k1[2],
                policy,
            )
            k3 = _stage_field(
                framework,
                t0 + 0.5 * h,
                q + 0.5 * h * k2[0],
                p + 0.5 * h * k2[1],
                tau + 0.5 * h * k2[2],
                policy,
            )
            k4 = _stage_field(
                framework,
                t1,
                q + h * k3[0],
                p + h * k3[1],
                tau + h * k3[2],
                policy,
            )
            q = q + (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            p = p + (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            tau = tau + (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            q = _project_positions(framework, q, tol, 50)
            p = _project_momenta(framework, q, p, tol)
            tau = _project_tensions(framework, q, p, tau, tol)
        except (ProjectionError, ManifoldError) as exc:
            raise ProjectionError(f"integration failed at step {k + 1}: {exc}") from exc
        record(k + 1)

    return Trajectory(
        times=times,
        positions=positions,
        momenta=momenta,
        tensions=tensions,
        energies=energies,
        c1_max=c_max[:, 0],
        c2_max=c_max[:, 1],
        c3_max=c_max[:, 2],
        forces=forces,
    )
