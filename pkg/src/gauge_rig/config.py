"""Default numerical tolerances.

The environment variable ``GAUGE_RIG_TOL`` (a float) overrides the defaults
marked as tunable below whenever the corresponding function argument is left
at ``None``.  The rank cutoff, tangency compatibility threshold, and the
projection basin gate are structural choices and stay fixed.
"""

import os

# Tunable through GAUGE_RIG_TOL.
MANIFOLD_GATE = 1e-6      # residual level above which off-manifold warnings fire
PROJECTION_TOL = 1e-12    # target max residual after constraint projection
SOLVABILITY_TOL = 1e-9    # kernel / right-hand-side orthogonality requirement

# Fixed.
RANK_EPS = 1e-10          # singular values below RANK_EPS * sigma_max * n count as zero
COMPATIBILITY_TOL = 1e-7  # tangency right-hand side must be this compatible
BASIN_GATE = 1e-2         # projection refuses to start beyond this residual


def resolve(default):
    """Return the ``GAUGE_RIG_TOL`` override if set, else ``default``."""
    value = os.environ.get("GAUGE_RIG_TOL")
    return float(value) if value else default
