"""Numerical tolerances and defaults, collected in one place.

Every constant here can be overridden per call (the functions that use one
take it as a keyword argument) or globally through the harness configuration
file, which assigns to these names before an experiment starts.
"""

# Row sums of a mixing matrix must match 1 this closely.
ROW_SUM_TOL = 1e-12

# Residual target for the stationary-vector solver, measured as
# max_j |(pi^T A - pi^T)_j|.
PERRON_TOL = 1e-12

# Relative tolerance for spectral norms computed by Gram power iteration.
NORM_TOL = 1e-10

# The contraction factor is raised to the k-th power inside geometric
# envelopes, which compounds any under-estimate by a factor k; compute it
# three decades tighter than ordinary norms.
BETA_NORM_TOL = 1e-13

# A diagonal estimate at or below this value is treated as numerically zero
# and raises instead of being inverted.
DIAG_FLOOR = 1e-14

# Per-step tolerances for the optimizer's exact algebraic probes.
CENTROID_PROBE_TOL = 1e-10
TRACKER_PROBE_TOL = 1e-8

# Slack factor for verified inequalities: "lhs <= rhs" is accepted when
# lhs <= rhs * (1 + INEQ_SLACK), absorbing benign float rounding.
INEQ_SLACK = 1e-9

# Maximum radius escalations before geometric-graph generation gives up.
MAX_RADIUS_RETRIES = 50

# Default seed used by the CLI when neither flag, config file nor the
# ROWGOSSIP_SEED environment variable provides one.
DEFAULT_SEED = 42
