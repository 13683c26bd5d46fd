"""Command-line interface.

Commands: ``analyze`` (constraint structure at a state), ``simulate``
(trajectory export), ``gauge-compare`` (one run per policy, discrepancy and
spread report), ``gauge-fix`` (pin one rod tension and evolve), ``reduce``
(rigid-body coordinates of a saved trajectory), ``oracle-check``
(self-diagnostics against closed forms and finite differences).

Human-readable summaries go to stdout; machine-readable reports are written
with ``--out`` (atomically, never leaving partial files).  The environment
variable ``GAUGE_RIG_TOL`` overrides the default tunable tolerances.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .constraints import (
    assemble_tension_system,
    residuals,
    solvability_check,
    solve_tensions_with_edge_value,
)
from .dynamics import (
    GaugePolicy,
    angular_rate,
    integrate,
    prepare_initial_data,
    rigid_body_momenta,
)
from .errors import FrameworkError, GaugeRigError
from .framework import PhasePoint
from .gauge import classify_tension_functionals, gauge_fix, gauge_orbit_sample
from .oracle import (
    REFERENCE_TENSION_MATRIX,
    AnalyticSolution,
    coefficient_extraction,
    verify_eom,
)
from .reduced import reduce_state, reduced_hamiltonian, system_parameters
from .serialize import (
    atomic_write_text,
    load_framework,
    read_trajectory,
    write_trajectory,
)

TWO_PI = 2.0 * math.pi


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _policy(text):
    try:
        return GaugePolicy.from_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_edge(framework, text):
    """Resolve an edge given as 'a-b' or 'a,b' vertex labels."""
    if "," in text:
        a, _, b = text.partition(",")
        return framework.edge_index((a.strip(), b.strip()))
    for k in range(1, len(text)):
        if text[k] != "-":
            continue
        a, b = text[:k], text[k + 1 :]
        if a in framework.vertex_ids and b in framework.vertex_ids:
            return framework.edge_index((a, b))
    raise FrameworkError(f"cannot resolve edge {text!r}")


def _vector(values):
    return [float(x) for x in np.asarray(values).ravel()]


def _emit(args, report):
    if getattr(args, "out", None):
        atomic_write_text(args.out, json.dumps(report, indent=1) + "\n")


# -- analyze -----------------------------------------------------------------


def cmd_analyze(args):
    framework, configuration = load_framework(args.input)
    coords = configuration.coords
    momenta = rigid_body_momenta(framework, coords, args.omega)
    system = assemble_tension_system(framework, coords, momenta)
    solvable, violation = solvability_check(system)
    if solvable:
        if system.gauge_dimension:
            edge = system.designated_edges()[0]
            tensions = solve_tensions_with_edge_value(system, edge, args.lam).tensions
        else:
            tensions = solve_tensions_with_edge_value(system, 0, 0.0).tensions
    else:
        tensions = np.zeros(framework.n_edges)
    point = PhasePoint(coords, momenta, tensions)
    res = residuals(framework, point)
    invariant, _ = classify_tension_functionals(system)

    print(f"framework: {framework.n_vertices} vertices, {framework.n_edges} rods")
    print(f"rank: {system.rank}")
    print(f"gauge dimension: {system.gauge_dimension}")
    for row in system.self_stress_basis:
        print("self-stress: (" + ", ".join(f"{x:g}" for x in row) + ")")
    print(f"solvable: {str(solvable).lower()} (violation {violation:.3e})")
    print(
        "residuals: "
        f"c1 {np.max(np.abs(res.c1)):.3e}  "
        f"c2 {np.max(np.abs(res.c2)):.3e}  "
        f"c3 {np.max(np.abs(res.c3)):.3e}"
    )
    report = {
        "edges": list(framework.edge_labels),
        "matrix": [_vector(row) for row in system.matrix],
        "rhs": _vector(system.rhs),
        "rank": system.rank,
        "gauge_dimension": system.gauge_dimension,
        "self_stress_basis": [_vector(row) for row in system.self_stress_basis],
        "invariant_functional_basis": [_vector(row) for row in invariant],
        "solvable": bool(solvable),
        "violation": violation,
        "omega": args.omega,
        "angular_rate_fit": angular_rate(framework, point),
        "residuals": {
            "c1_max": float(np.max(np.abs(res.c1))),
            "c2_max": float(np.max(np.abs(res.c2))),
            "c3_max": float(np.max(np.abs(res.c3))),
        },
        "tensions": _vector(point.tensions),
    }
    _emit(args, report)
    return 0


# -- simulate ------------------------------------------------------------------


def cmd_simulate(args):
    framework, configuration = load_framework(args.input)
    initial = prepare_initial_data(framework, configuration, args.omega, args.lam)
    trajectory = integrate(framework, initial, args.xi, args.t_end, args.step)
    write_trajectory(framework, trajectory, args.out, fmt=args.format)
    drift = float(
        max(trajectory.c1_max.max(), trajectory.c2_max.max(), trajectory.c3_max.max())
    )
    energy_drift = float(np.max(np.abs(trajectory.energies - trajectory.energies[0])))
    print(
        f"wrote {len(trajectory)} samples to {args.out} "
        f"(constraint drift {drift:.3e}, energy drift {energy_drift:.3e})"
    )
    return 0


# -- gauge-compare --------------------------------------------------------------


def cmd_gauge_compare(args):
    framework, configuration = load_framework(args.input)
    initial = prepare_initial_data(framework, configuration, args.omega, args.lam)
    policies = args.xi or [GaugePolicy.zero()]
    comparison = gauge_orbit_sample(
        framework, initial, policies, args.t_end, args.step
    )
    system = assemble_tension_system(
        framework, initial.positions, initial.momenta, warn=False
    )
    invariant, _ = classify_tension_functionals(system)

    print("policies: " + ", ".join(comparison.policy_names))
    for name, value in comparison.invariant_report.items():
        print(f"{name} discrepancy: {value:.3e}")
    for label, value in comparison.variant_report.items():
        print(f"tension spread {label}: {value:.3e}")
    report = {
        "policies": list(comparison.policy_names),
        "t_end": args.t_end,
        "step": args.step,
        "discrepancies": comparison.invariant_report,
        "tension_spread": comparison.variant_report,
        "invariant_functionals": {
            "basis": [_vector(row) for row in invariant],
            "times": _vector(comparison.times),
            "values": {
                name: [
                    _vector(traj.tensions @ row) for row in invariant
                ]
                for name, traj in comparison.trajectories.items()
            },
        },
    }
    _emit(args, report)
    return 0


# -- gauge-fix -------------------------------------------------------------------


def cmd_gauge_fix(args):
    framework, configuration = load_framework(args.input)
    initial = prepare_initial_data(framework, configuration, args.omega, args.lam)
    edge = _parse_edge(framework, args.fixed_edge)
    fixing = gauge_fix(framework, initial, edge, args.fixed_value)
    xi0 = np.asarray(fixing.induced_policy(0.0, fixing.point), dtype=float).ravel()
    label = framework.edge_label(edge)
    if xi0.size == 1:
        print(f"induced Xi = {xi0[0]:g}")
    else:
        print("induced Xi = (" + ", ".join(f"{x:g}" for x in xi0) + ")")

    trajectory = integrate(
        framework, fixing.point, fixing.induced_policy, args.t_end, args.step
    )
    drift = float(np.max(np.abs(trajectory.tensions[:, edge] - args.fixed_value)))
    print(f"tension {label} held at {args.fixed_value:g} with drift {drift:.3e}")
    report = {
        "fixed_edge": label,
        "fixed_value": args.fixed_value,
        "induced_xi": _vector(xi0),
        "tension_drift": drift,
        "t_end": args.t_end,
        "step": args.step,
        "final_tensions": _vector(trajectory.tensions[-1]),
    }
    _emit(args, report)
    return 0


# -- reduce ----------------------------------------------------------------------


def cmd_reduce(args):
    framework, _ = load_framework(args.input)
    mass, ell = system_parameters(framework)
    times, states = read_trajectory(framework, args.trajectory, fmt=args.format)
    lines = ["t,x,y,theta,p_x,p_y,p_theta,H_R"]
    last = None
    for t, state in zip(times, states):
        last = reduce_state(framework, state)
        energy = reduced_hamiltonian(last, mass, ell)
        values = (t, last.x, last.y, last.theta, last.p_x, last.p_y,
                  last.p_theta, energy)
        lines.append(",".join(format(v, ".17g") for v in values))
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(
        f"wrote {len(times)} reduced samples to {args.out} "
        f"(final p_theta {last.p_theta:.6g})"
    )
    return 0


# -- oracle-check ------------------------------------------------------------------


def cmd_oracle_check(args):
    rows = []

    def check(name, value, threshold):
        rows.append((name, value, threshold, value < threshold))

    solution = AnalyticSolution(omega=args.omega, f=math.sin)
    framework = solution.framework

    worst = 0.0
    for t in (0.0, 0.7, 2.1, 5.5):
        res = residuals(framework, solution.state(t))
        worst = max(worst, res.max_abs())
    check("closed-form states satisfy constraints", worst, 1e-12)

    check(
        "equations of motion vs finite differences",
        verify_eom(solution, t=1.0, h=1e-4),
        1e-6,
    )

    state0 = solution.state(0.0)
    system = assemble_tension_system(
        framework, state0.positions, state0.momenta, warn=False
    )
    extracted = coefficient_extraction(framework, state0.positions, state0.momenta)
    scale = float(np.max(np.abs(system.matrix)))
    check(
        "assembled matrix vs brute-force extraction",
        float(np.max(np.abs(extracted - system.matrix))) / scale,
        1e-6,
    )
    check(
        "assembled matrix vs reference table",
        float(np.max(np.abs(system.matrix - REFERENCE_TENSION_MATRIX))),
        1e-10,
    )

    rng = np.random.default_rng(20260810)
    worst = 0.0
    for _ in range(20):
        sample = AnalyticSolution(omega=float(rng.uniform(-2.0, 2.0)))
        t = float(rng.uniform(0.0, 6.0))
        state = sample.state(t)
        built = assemble_tension_system(
            framework, state.positions, state.momenta, warn=False
        )
        brute = coefficient_extraction(framework, state.positions, state.momenta)
        denom = float(np.max(np.abs(built.matrix)))
        worst = max(worst, float(np.max(np.abs(brute - built.matrix))) / denom)
    check("random states: assembled vs extracted", worst, 1e-6)

    width = max(len(name) for name, *_ in rows)
    failed = False
    for name, value, threshold, ok in rows:
        status = "PASS" if ok else "FAIL"
        failed = failed or not ok
        print(f"{name:<{width}}  {value:.3e} < {threshold:.0e}  {status}")
    return 1 if failed else 0


# -- parser ------------------------------------------------------------------------


def _add_common(parser, *, input_required=True):
    parser.add_argument(
        "--input",
        required=input_required,
        help="framework JSON document (vertices, edges, positions)",
    )
    parser.add_argument(
        "--omega",
        type=float,
        default=1.0,
        help="rigid rotation rate of the initial data (default 1)",
    )
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=0.0,
        help="tension on the designated gauge edge at t=0 (default 0)",
    )


def _add_run(parser):
    parser.add_argument(
        "--t-end", type=_positive_float, default=TWO_PI,
        help="integration horizon (default 2*pi)",
    )
    parser.add_argument(
        "--step", type=_positive_float, default=1e-3,
        help="integrator step (default 1e-3)",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gauge-rig",
        description="Constrained rod-and-mass dynamics with tension gauge freedom.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="constraint structure at a state")
    _add_common(p)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="integrate and export a trajectory")
    _add_common(p)
    _add_run(p)
    p.add_argument(
        "--xi", type=_policy, default=GaugePolicy.zero(),
        help="gauge policy: a number, const:c, cos:a,w, or sin:a,w (default 0)",
    )
    p.add_argument("--out", required=True, help="trajectory output path")
    p.add_argument(
        "--format", choices=("csv", "json"), default="csv",
        help="trajectory format (default csv)",
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gauge-compare", help="one run per policy, then compare")
    _add_common(p)
    _add_run(p)
    p.add_argument(
        "--xi", type=_policy, action="append", default=None,
        help="gauge policy, repeatable (default: the zero policy alone)",
    )
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_gauge_compare)

    p = sub.add_parser("gauge-fix", help="pin one rod tension and evolve")
    _add_common(p)
    _add_run(p)
    p.add_argument(
        "--fixed-edge", required=True,
        help="edge to pin, as 'a-b' or 'a,b' vertex labels",
    )
    p.add_argument(
        "--fixed-value", type=float, default=0.0,
        help="tension value to hold on the fixed edge (default 0)",
    )
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_gauge_fix)

    p = sub.add_parser("reduce", help="rigid-body coordinates of a trajectory")
    p.add_argument("trajectory", help="trajectory file written by simulate")
    p.add_argument("--input", required=True, help="framework JSON document")
    p.add_argument(
        "--format", choices=("csv", "json"), default=None,
        help="trajectory format (default: from the file suffix)",
    )
    p.add_argument("--out", required=True, help="reduced CSV output path")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("oracle-check", help="self-diagnostics, pass/fail table")
    p.add_argument(
        "--omega", type=float, default=1.0,
        help="rotation rate of the probe solution (default 1)",
    )
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GaugeRigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
