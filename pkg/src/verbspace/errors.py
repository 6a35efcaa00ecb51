"""Exception hierarchy shared by all verbspace modules."""


class VerbSpaceError(Exception):
    """Base class for every error raised by this package."""


# taxonomy
class MalformedDocument(VerbSpaceError, ValueError):
    pass


class CyclicTaxonomy(VerbSpaceError, ValueError):
    pass


class DuplicateId(VerbSpaceError, ValueError):
    pass


class DanglingParent(VerbSpaceError, ValueError):
    pass


class UnknownNode(VerbSpaceError, KeyError):
    pass


class MissingCount(VerbSpaceError, KeyError):
    pass


# text
class EmptyInput(VerbSpaceError, ValueError):
    pass


class EmptyText(VerbSpaceError, ValueError):
    pass


# harmonize
class UnmappedClass(VerbSpaceError, KeyError):
    pass


class PendingVerdicts(VerbSpaceError, ValueError):
    pass


class ClosureConflict(VerbSpaceError, ValueError):
    pass


class NonPositiveDuration(VerbSpaceError, ValueError):
    pass


class NoInstances(VerbSpaceError, ValueError):
    pass


class MalformedManifest(VerbSpaceError, ValueError):
    pass


# geometry
class DimensionMismatch(VerbSpaceError, ValueError):
    pass


class CurvatureMismatch(VerbSpaceError, ValueError):
    pass


class MagnitudeOverflow(VerbSpaceError, OverflowError):
    pass


class OriginAperture(VerbSpaceError, ValueError):
    pass


class DegeneratePair(VerbSpaceError, ValueError):
    pass


class OriginApex(VerbSpaceError, ValueError):
    pass


# model / training
class MissingPseudo(VerbSpaceError, ValueError):
    pass


class ConfigMismatch(VerbSpaceError, ValueError):
    pass


class NonFiniteLoss(VerbSpaceError, FloatingPointError):
    pass


class LabelOutOfRange(VerbSpaceError, ValueError):
    pass


class FingerprintMismatch(VerbSpaceError, ValueError):
    pass


# augment / eval
class ZeroVector(VerbSpaceError, ValueError):
    pass


class ShapeMismatch(VerbSpaceError, ValueError):
    pass


class NoPositives(VerbSpaceError, ValueError):
    pass


class SplitOverlap(VerbSpaceError, ValueError):
    pass


class MalformedFeatureFile(VerbSpaceError, ValueError):
    pass
