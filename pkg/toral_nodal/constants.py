from fractions import Fraction

THREADS_ENV = "TORAL_NODAL_THREADS"

# lattice
DEFAULT_DELTA2 = Fraction(1, 4)
MAX_CANDIDATE_VISITS = 10 ** 8
CENTER_UNIT_TOL = 1e-12

# eigenfun
NORMALIZATION_TOL = 1e-12
MAX_IMAG_PART = 10.0
SLAB_TOL = 1e-9
D_MULTIPLIER = 1.0

# surface
DOMAIN_RADIUS = 0.3
TAU = 0.05
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
PATCH_IMAG_TOL = 1e-8
STATIONARY_TOL = 1e-3
CONDITION_LIMIT = 1e12
ASYMPTOTIC_TOL = 1e-9
ADMISSIBLE_HESSIAN_BOUND = 1e-3
ADMISSIBLE_PROBES = 100
MIN_CAP_ANGLE = 1e-3
BUMP_FILL = 0.9
DEFAULT_GRID = (24, 24)

# oscillatory
MIN_ORDER = 20
MAX_ORDER = 200
ORDER_PER_CYCLE = 6
GAUSS_NORMAL_SEPARATION = 1e-6
DECAY_RATIO = 0.5

# restriction
BASE_CASE_DELTAS = tuple(k / 10 for k in range(1, 10))
COVERAGE_PROBES = 10 ** 4
CENTER_CANDIDATES = 500
CAP_MAX_STEPS = 10 ** 4

# cli
DEFAULT_SEED = 42
NODAL_GRID = 512

SVG_TEMPLATE = """<svg xmlns="http://www.w3.org/2000/svg" \
width="{size}" height="{size}" viewBox="0 0 1 1">
  <title>{title}</title>
  <rect x="0" y="0" width="1" height="1" fill="white" stroke="black" \
stroke-width="{stroke}"/>
  <g fill="none" stroke="black" stroke-width="{stroke}" \
transform="translate(0,1) scale(1,-1)">
{paths}
  </g>
</svg>
"""

CONFIG_ATTRIBUTE = "__toral_nodal_config__"
PROG_NAME = "toral-nodal"
