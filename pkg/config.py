"""
Numerical defaults for spinboson-spectrum

Every tolerance and rule size used by the library lives here so that the
command-line front end and the tests agree on one set of defaults.
"""
from dataclasses import dataclass

from errors import DomainError

# Integrals are converged to this relative tolerance by adaptive refinement
INTEGRAL_REL_TOL = 1e-10

# Roots of the Nevanlinna functions are located to this absolute tolerance;
# steep roots near the boundary need more than 1e-10 for a 1e-9 residual
ROOT_ABS_TOL = 1e-12

# phi refuses arguments closer than this to its boundary m + sigma*eps
BOUNDARY_GAP = 1e-12

# Adaptive quadrature gives up beyond this many nodes
MAX_ADAPTIVE_NODES = 2 ** 20

DEFAULT_PANELS = 8
DEFAULT_ORDER = 16

# The dense oracle grows like n^2 / 2, keep its default rule small
ORACLE_PANELS = 4
ORACLE_ORDER = 6

# Relative threshold separating negative eigenvalues from numerical zeros
EIGEN_ZERO_THRESHOLD = 1e-12

# Truncated eigenvalues this close (relative) to a threshold are rounding copies of it
THRESHOLD_NOISE_TOL = 1e-12

# Nodes with |omega(r) - m| below this belong to the level set of the mass
LEVEL_SET_TOL = 1e-14

# Jump locations of the counting function are bisected to this width
JUMP_TOL = 1e-8

# Spacings below this floor count as degenerate accumulation
CLUSTER_FLOOR = 1e-9

# Eigenvalues that move more than this under rule refinement belong to the continuum
CLUSTER_MATCH_TOL = 1e-6

# Dyadic shifts 2^-k used by the integrability probe
INTEGRABILITY_PROBE_EXPONENTS = (10, 20, 30)

# Range searched for a sign change before a BracketFailure
MAX_BRACKET_DOUBLINGS = 200

JSON_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Tolerances:
    """Bundle of the tolerances a computation runs with."""

    rel_tol: float = INTEGRAL_REL_TOL
    root_tol: float = ROOT_ABS_TOL
    boundary_gap: float = BOUNDARY_GAP

    def __post_init__(self):
        if self.rel_tol <= 0 or self.root_tol <= 0 or self.boundary_gap <= 0:
            raise DomainError("tolerances must be positive")

