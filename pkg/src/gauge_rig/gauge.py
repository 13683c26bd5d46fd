"""Gauge structure made concrete: orbit sampling, observables, gauge fixing.

Runs started from the same admissible state under different policies reach
physically identical configurations at equal times, while individual rod
tensions spread out.  This module measures that directly, classifies which
linear functions of the tensions are policy-independent, and implements
fixing surfaces of the form "tension on one edge stays constant".
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constraints import assemble_tension_system, solve_tensions_with_edge_value
from .dynamics import (
    GaugePolicy,
    _designated_directions,
    _tangency_affine,
    check_point,
    integrate,
)
from .errors import GaugeFixingError

__all__ = [
    "GaugeComparison",
    "GaugeFixing",
    "gauge_orbit_sample",
    "classify_tension_functionals",
    "gauge_fix",
]


@dataclass(frozen=True)
class GaugeComparison:
    """Results of evolving one state under several policies.

    ``invariant_report`` holds the max-abs discrepancy across policies, over
    all samples and components, for each observable that must not depend on
    the policy.  ``variant_report`` holds the per-edge tension spread (max
    minus min across policies, maximized over samples).
    """

    policy_names: tuple
    times: np.ndarray
    end_states: dict
    invariant_report: dict
    variant_report: dict
    trajectories: dict


def gauge_orbit_sample(framework, initial, policies, t_end, step, *, parallel=True):
    """Integrate once per policy from shared initial data and compare."""
    policies = list(policies)
    if not policies:
        raise ValueError("at least one policy is required")
    names = []
    for k, policy in enumerate(policies):
        name = policy.name
        if name in names:
            name = f"{name}#{k}"
        names.append(name)

    def run(policy):
        return integrate(framework, initial, policy, t_end, step)

    if parallel and len(policies) > 1:
        with ThreadPoolExecutor(max_workers=len(policies)) as pool:
            results = list(pool.map(run, policies))
    else:
        results = [run(policy) for policy in policies]

    trajectories = dict(zip(names, results))
    stack = lambda attr: np.stack([getattr(r, attr) for r in results])
    spread = lambda arr: arr.max(axis=0) - arr.min(axis=0)

    invariant_report = {
        "positions": float(np.max(spread(stack("positions")), initial=0.0)),
        "momenta": float(np.max(spread(stack("momenta")), initial=0.0)),
        "forces": float(np.max(spread(stack("forces")), initial=0.0)),
    }
    tension_spread = spread(stack("tensions")).max(axis=0)
    variant_report = {
        framework.edge_label(e): float(tension_spread[e])
        for e in range(framework.n_edges)
    }
    end_states = {name: traj.state(-1) for name, traj in trajectories.items()}
    return GaugeComparison(
        policy_names=tuple(names),
        times=results[0].times,
        end_states=end_states,
        invariant_report=invariant_report,
        variant_report=variant_report,
        trajectories=trajectories,
    )


def classify_tension_functionals(system):
    """Split tension space into policy-invariant and pure-gauge parts.

    Returns ``(invariant_basis, gauge_basis)``: orthonormal rows spanning the
    coefficient vectors c for which ``c @ tensions`` is independent of the
    self-stress coordinates (the orthogonal complement of the kernel), and
    the self-stress directions themselves.
    """
    _, _, vt = np.linalg.svd(system.matrix)
    invariant = vt[: system.rank].copy()
    return invariant, np.array(system.self_stress_basis)


@dataclass(frozen=True)
class GaugeFixing:
    """A fixing surface "tension on fixed_edge == fixed_value" and its data.

    ``induced_policy`` is the unique policy keeping the surface invariant
    along the flow (the tension rate on the fixed edge is driven to zero);
    ``point`` is the input state moved onto the surface along the
    self-stress space.
    """

    fixed_edge: tuple
    fixed_value: float
    induced_policy: GaugePolicy
    point: object


def gauge_fix(framework, point, fixed_edge, fixed_value):
    """Fix the gauge by pinning the tension of one edge.

    The self-stress space must have a nonzero component on the chosen edge,
    otherwise the surface is tangent to the gauge directions and cannot
    determine the free rates.
    """
    check_point(framework, point)
    edge = (
        int(fixed_edge)
        if isinstance(fixed_edge, (int, np.integer))
        else framework.edge_index(fixed_edge)
    )
    system = assemble_tension_system(framework, point.positions, point.momenta)
    if system.gauge_dimension == 0:
        raise GaugeFixingError(
            "framework has no self-stress: tensions are unique, nothing to fix"
        )
    column = system.self_stress_basis[:, edge]
    if np.max(np.abs(column)) <= 1e-9 * np.max(np.abs(system.self_stress_basis)):
        raise GaugeFixingError(
            f"self-stress space vanishes on edge {framework.edge_label(edge)}; "
            "the fixing surface is not transversal"
        )
    solution = solve_tensions_with_edge_value(system, edge, fixed_value)
    fixed_point = point.replace(tensions=solution.tensions)

    def induced(t, state):
        _, _, particular, kernel, _ = _tangency_affine(
            framework, state.positions, state.momenta, state.tensions
        )
        directions = _designated_directions(kernel)
        col = directions[:, edge]
        norm2 = float(col @ col)
        if norm2 <= 1e-24:
            raise GaugeFixingError(
                f"self-stress space vanishes on edge {framework.edge_label(edge)}"
            )
        # minimum-norm coefficients cancelling the rate on the fixed edge
        return col * (-particular[edge] / norm2)

    policy = GaugePolicy(induced, name=f"fix:{framework.edge_label(edge)}")
    return GaugeFixing(
        fixed_edge=framework.edges[edge],
        fixed_value=float(fixed_value),
        induced_policy=policy,
        point=fixed_point,
    )
