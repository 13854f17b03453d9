"""
Exception hierarchy for axiomlib.

Every hard error raised by the mechanisms derives from AxiomError so callers
(the CLI in particular) can catch one type. Refusals, denials and integrity
reports are *not* exceptions; they come back as result objects.
"""


class AxiomError(Exception):
    """Base class for all axiomlib errors."""


# ledger
class UnknownAuthorError(AxiomError):
    pass


class DigestMismatchError(AxiomError):
    pass


class SequenceError(AxiomError):
    """Transaction ids must strictly increase within a chain."""


class EmptyPoolError(AxiomError):
    pass


class DuplicateVoteError(AxiomError):
    pass


class BelowQuorumError(AxiomError):
    def __init__(self, votes, quorum, what="operation"):
        super().__init__(f"{what} refused: {votes} valid votes, quorum is {quorum}")
        self.votes = votes
        self.quorum = quorum


class CorruptChainError(AxiomError):
    def __init__(self, height, reason=""):
        super().__init__(f"chain corrupt at height {height}: {reason}".rstrip(": "))
        self.height = height


# identity
class MissingFieldError(AxiomError, ValueError):
    def __init__(self, field):
        super().__init__(f"certificate request is missing field '{field}'")
        self.field = field


class DuplicateSubjectError(AxiomError):
    pass


# morality / behavior
class MalformedProposalError(AxiomError, ValueError):
    pass


class AnchorNotFoundError(AxiomError):
    pass


class TamperedPolicyError(AxiomError):
    pass


class MalformedTreeError(AxiomError, ValueError):
    pass


# components
class UnregisteredComponentError(AxiomError):
    pass


class InactiveComponentError(AxiomError):
    pass


class StageOrderError(AxiomError, ValueError):
    pass


class UnauthorizedStakeholderError(AxiomError):
    pass


# contracts
class ContractExpiredError(AxiomError):
    pass


class ContractBreachedError(AxiomError):
    pass


class UnknownTechnologyError(AxiomError):
    pass


class UnverifiedSignerError(AxiomError):
    pass


class DomainError(AxiomError, ValueError):
    pass


# simulation / cli
class InvalidSpecError(AxiomError, ValueError):
    pass


class BaseNotContainedError(AxiomError):
    pass


class EmptyGridError(AxiomError, ValueError):
    pass


class InvalidConfigError(AxiomError, ValueError):
    pass


class ParseError(AxiomError, ValueError):
    """Input file could not be parsed; carries a 1-based location."""

    def __init__(self, message, line=None, column=None, source=None):
        where = ""
        if line is not None:
            where = f"{source or '<input>'}:{line}"
            if column is not None:
                where += f":{column}"
            where += ": "
        super().__init__(f"{where}{message}")
        self.line = line
        self.column = column
        self.source = source


class MissingArtifactsError(AxiomError):
    pass
