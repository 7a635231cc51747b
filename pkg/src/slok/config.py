"""Shared numerical tolerances and constants.

All tolerances that gate validation logic live here so that tests and
callers agree on a single source of truth.
"""

# Normalization / exactness tolerances
UNIT_TOL = 1e-12          # |x| = 1 after renormalization
WEIGHT_SUM_TOL = 1e-12    # probability weights sum to 1
MASS_TOL = 1e-10          # density mass checks
MARGINAL_TOL = 1e-9       # transport plan marginal agreement

# Inner products at or below this threshold are treated as non-positive,
# i.e. the arc carries infinite cost and is forbidden.
DOT_FORBIDDEN_TOL = 1e-12

# Angular tolerance for merging duplicate atoms (radians)
ATOM_MERGE_TOL = 1e-10

# Dual feasibility / complementary slackness
DUAL_FEAS_TOL = 1e-8
SLACKNESS_TOL = 1e-6

# Convexity margin used when repairing inadmissible support functions
CONVEXITY_REPAIR_FLOOR = 1e-6

# Polytope facets smaller than this fraction of |Omega|^{(n-1)/n} are dropped
DEGENERATE_FACET_REL_TOL = 1e-12

# Unit ball volumes, indexed by dimension
BALL_VOLUME = {2: 3.141592653589793, 3: 4.188790204786391}
