"""
Configuration settings for the quasihomogeneous n-body toolkit.
"""
import os

# Debug mode - set QH_DEBUG=1 to enable debug messages
IN_DEBUG_MODE = os.environ.get("QH_DEBUG", "0") == "1"

# Progress bars - set QH_PROGRESS=0 to silence tqdm
SHOW_PROGRESS = os.environ.get("QH_PROGRESS", "1") != "0"

# Worker threads for ordering classes and mass-grid sweeps
try:
    MAX_THREADS = max(1, int(os.environ.get("QH_THREADS", "1")))
except ValueError:
    MAX_THREADS = 1

# Central configuration defaults
DEFAULT_INERTIA = 1.0
DEFAULT_GRAD_TOL = 1e-12
DEFAULT_MAX_ITER = 200
MAX_COLLINEAR_BODIES = 6
POLISH_STEPS = 2
ARMIJO_C = 1e-4
MIN_LINE_STEP = 1e-12

# Tolerances
COLLISION_GUARD_FACTOR = 1e-10
SPHERE_TOL = 1e-12
COM_TOL = 1e-12
CONSTRAINT_TOL = 1e-12
MANIFOLD_TOL = 1e-9
ZERO_MODE_RATIO = 1e-8
SIMULTANEOUS_TOL = 1e-10
SPECTRUM_MATCH_TOL = 1e-8

# f-root search
F_ROOT_REL_TOL = 1e-14
F_ROOT_MAX_EXPANSIONS = 200
F_ROOT_SCAN_POINTS = 2001
F_ROOT_SCAN_DECADES = 12

# Integrator
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
COLLISION_RTOL = 1e-9
PLANE_RTOL = 1e-12
PLANE_ATOL = 1e-14
EVENT_TOL = 1e-10
MIN_STEP_RATIO = 1e-14
MAX_STEPS = 500_000
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

# Orbits
DEFAULT_RHO_FLOOR = 1e-8
EQUILIBRIUM_TOL = 1e-9
TAU_BUDGET = 1e3
BINARY_APPROACH = 1e-3
HOMOTHETY_DEFECT_TOL = 1e-4

# Output
SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = ".17g"
DEFAULT_OUT_DIR = "out"

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
