"""Exception types shared across the laboratory.

Every failure mode that a caller can act on gets its own class; all of
them derive from :class:`NodalLabError` so the CLI can map any numerical
failure to a single exit code.
"""


class NodalLabError(Exception):
    """Base class for all laboratory errors."""


class ConfigError(NodalLabError):
    """Invalid experiment configuration (bad key, missing file, bad value)."""


# --- meshes / fields -------------------------------------------------------

class MeshQualityError(NodalLabError):
    """A mesh violates the positivity / minimum-angle contract."""


class LoopDefectTooLarge(NodalLabError):
    """Path integration of a conjugate differential is inconsistent on loops."""


class DegenerateField(NodalLabError):
    """A field vanishes identically on a region where structure is required."""


# --- solvers ---------------------------------------------------------------

class SingularSystem(NodalLabError):
    """The assembled linear system is singular or has no interior unknowns."""


class ExponentBelowThreshold(NodalLabError):
    """Weight exponent a lies at or below the admissible threshold -a_S."""


class QuadratureBreakdown(NodalLabError):
    """Weighted element integrals concentrate pathologically or go non-finite."""


# --- nodal geometry --------------------------------------------------------

class NoNodalIntersection(NodalLabError):
    """No nodal branch enters the requested search annulus."""


class OrderMismatch(NodalLabError):
    """The normalized complex gradient degenerates: declared order is wrong."""


# --- frequency -------------------------------------------------------------

class RadiusOutOfDomain(NodalLabError):
    """A requested ellipsoid pokes outside the computational domain."""


class ZeroHeight(NodalLabError):
    """Boundary height H(r) vanishes below the representable threshold."""


class NoConvergence(NodalLabError):
    """An iterative limit (vanishing order, Newton loop) did not settle."""


# --- hodograph -------------------------------------------------------------

class NonConstantDeterminant(NodalLabError):
    """det A varies over the region where the straightening needs it constant."""


class InverseMapFailure(NodalLabError):
    """Newton inversion of the hodograph map failed to converge."""


class RankDeficientDictionary(NodalLabError):
    """The sampled fit dictionary is numerically rank deficient."""


# --- approximation scheme --------------------------------------------------

class OrderDeficit(NodalLabError):
    """A prescribed-blow-up solution lost vanishing order at the origin."""


class IterationOverrun(NodalLabError):
    """The corrector loop exceeded its iteration budget."""


# --- regularity ------------------------------------------------------------

class NodalInclusionViolated(NodalLabError):
    """The numerator of a ratio does not vanish on the nodal set of the base."""
