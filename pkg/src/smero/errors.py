"""Exception hierarchy.

Every numerical failure carries a stable machine-readable ``name`` so the CLI
can report it verbatim in its result JSON.
"""


class SmeroError(Exception):
    """Base class for all library errors."""

    name = "SmeroError"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.name = cls.__name__


class SchemaError(SmeroError):
    """Malformed job configuration or input document."""


# laurent
class CenterMismatch(SmeroError):
    pass


# local analysis
class NonIntegerExponents(SmeroError):
    pass


class FirstOrderPolePresent(SmeroError):
    pass


class TruncationTooShort(SmeroError):
    pass


class PoleTooStrong(SmeroError):
    """Potential has a pole of order greater than two."""


class UnsupportedOrder(SmeroError):
    pass


# potentials
class PoleProximity(SmeroError):
    pass


class NotAPole(SmeroError):
    pass


class RadiusCollision(SmeroError):
    pass


class GridTooCoarse(SmeroError):
    pass


class TrackingLost(SmeroError):
    pass


# singular spaces
class MissingLocalData(SmeroError):
    pass


class MembershipViolation(SmeroError):
    pass


class QuadratureFailure(SmeroError):
    pass


class NonSMeromorphicPotential(SmeroError):
    pass


# genus one
class LatticePoint(SmeroError):
    pass


class DegenerateLevelSet(SmeroError):
    pass


class NormTooSmall(SmeroError):
    pass
