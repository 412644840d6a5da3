"""
Exception hierarchy shared by the solver services, the CLI and the HTTP layer
"""
from typing import Optional


class FchcError(Exception):
    """Base class for every error the solver raises on purpose"""


# Graph input

class ParseError(FchcError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DegreeExceeded(FchcError):
    pass


class SelfLoop(FchcError):
    pass


class GenerationFailed(FchcError):
    pass


class OracleLimitExceeded(FchcError):
    pass


# Reversible machine

class MachineError(FchcError):
    pass


class AncillaNotClean(MachineError):
    def __init__(self, program: str, register: str):
        self.program = program
        self.register = register
        super().__init__(f"ancilla '{register}' of '{program}' not returned to zero")


class OracleContractViolation(AncillaNotClean):
    pass


class DeadRegister(MachineError):
    pass


class RadixMismatch(MachineError):
    pass


class ShapeMismatch(RadixMismatch):
    pass


# Set encodings

class EncodingError(FchcError, ValueError):
    pass


class ElementOutOfRange(EncodingError):
    pass


class EmptySet(EncodingError):
    pass


class MalformedEncoding(EncodingError):
    pass


class InvalidK(EncodingError):
    pass


class DuplicateElement(EncodingError):
    pass


class NotDisjoint(EncodingError):
    pass


class PlanViolation(FchcError):
    pass


# Solvers

class SelectionImpossible(FchcError):
    pass


class AuditFailure(FchcError):
    pass


class InstanceNotReduced(FchcError):
    pass


class SearchSpaceTooLarge(FchcError):
    pass


class NoWitness(FchcError):
    pass


# Hybrid model

class DomainError(FchcError, ValueError):
    pass


class TooSmallBudget(FchcError):
    pass


class InsufficientData(FchcError):
    pass


class OracleMismatch(FchcError):
    pass
