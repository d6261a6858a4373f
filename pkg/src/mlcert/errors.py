"""Exception hierarchy shared by every mlcert module."""


class CertError(Exception):
    """Base class for all errors raised by mlcert."""


# configuration / certification model
class MalformedConfig(CertError, ValueError):
    pass


class FactorMismatch(CertError, ValueError):
    pass


class UnknownProcedure(CertError, ValueError):
    pass


# predicate evaluation and merging
class MissingEvidence(CertError, LookupError):
    pass


class IncompleteOutcomes(CertError, ValueError):
    pass


class DuplicateFactor(CertError, ValueError):
    pass


# reference target
class InvalidDimensions(CertError, ValueError):
    pass


class FractionOutOfRange(CertError, ValueError):
    pass


class DivergedTraining(CertError, ArithmeticError):
    pass


class DimensionMismatch(CertError, ValueError):
    pass


class InvalidInput(CertError, ValueError):
    pass


class IoFailure(CertError, OSError):
    pass


class MalformedArtifact(CertError, ValueError):
    pass


# collectors
class UnknownTechnique(MalformedArtifact):
    pass


class KTooLarge(CertError, ValueError):
    pass


class EmptySampleSet(CertError, ValueError):
    pass


# certificates
class SigningFailure(CertError):
    pass
