"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DGMError(Exception):
    exit_code = 1


class UnknownSymbolError(DGMError):
    pass


class UnknownReferenceError(DGMError):
    pass


class BudgetExceededError(DGMError):
    exit_code = 4


class OutOfDomainError(DGMError):
    pass


class TimeScaleMismatchError(DGMError):
    pass


class TypeMismatchError(DGMError):
    pass


class SelfWiringError(DGMError):
    pass


class AlgebraicLoopError(DGMError):
    pass


class InvalidPartitionError(DGMError):
    pass


class SignatureMismatchError(DGMError):
    pass


class CompileError(DGMError):
    pass


class UnknownKindError(CompileError):
    pass


class DanglingPortError(CompileError):
    pass


class EnvironmentContractError(DGMError):
    pass


class SnapshotMismatchError(DGMError):
    pass


class StaleBasisError(DGMError):
    pass


class CertificateInvalidError(DGMError):
    exit_code = 2


class ForbiddenEditError(DGMError):
    pass


class MalformedProposalError(DGMError):
    pass


class UnresolvableHashError(DGMError):
    exit_code = 3


class MissingArtifactError(DGMError):
    exit_code = 3


class ReplayMismatchError(DGMError):
    exit_code = 2


class UsageError(DGMError):
    """Bad command line, configuration or lookup name."""
