"""Constrained dynamics of point masses joined by ideal rods.

The library builds rod-and-mass frameworks, evaluates their constraint
hierarchy, analyzes the linear system governing rod tensions (including its
self-stress kernel, the source of the tension gauge freedom), evolves states
with a user-chosen gauge policy, fixes the gauge, and reduces the bundled
four-mass system to rigid-body coordinates.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateConfigurationError,
    FrameworkError,
    GaugeFixingError,
    GaugeRigError,
    ManifoldError,
    ManifoldWarning,
    ProjectionError,
    ReductionError,
    SerializationError,
    UnsolvableSystemError,
)
from .framework import (
    Configuration,
    PhasePoint,
    RodFramework,
    reference_framework,
    rigidity_matrix,
    validate,
)
from .constraints import (
    ConstraintResiduals,
    TensionSolution,
    TensionSystem,
    assemble_tension_system,
    dimensionless_matrix,
    residuals,
    solvability_check,
    solve_tensions,
    solve_tensions_with_edge_value,
)
from .dynamics import (
    GaugePolicy,
    TangencyRates,
    Trajectory,
    VectorFieldValue,
    angular_rate,
    hamiltonian,
    integrate,
    per_particle_forces,
    prepare_initial_data,
    project_to_constraint_manifold,
    rigid_body_momenta,
    tangency_solve_multiplier_rates,
    vector_field,
)
from .gauge import (
    GaugeComparison,
    GaugeFixing,
    classify_tension_functionals,
    gauge_fix,
    gauge_orbit_sample,
)
from .reduced import (
    ReducedState,
    reduce_state,
    reduced_flow,
    reduced_hamiltonian,
    system_parameters,
)
from .oracle import (
    REFERENCE_TENSION_MATRIX,
    AnalyticSolution,
    analytic_state,
    coefficient_extraction,
    verify_eom,
)
from .serialize import (
    atomic_write_text,
    dump_framework,
    load_framework,
    read_trajectory,
    write_trajectory,
)
