"""Exception hierarchy.

Two families matter to callers: ``InputError`` (the data itself is bad; CLI
exit code 2) and ``PreconditionError`` (the data is well-formed but an
operation's requirements are not met; CLI exit code 3).
"""


class FomError(ValueError):
    """Base class for every error raised by fomkit."""

    kind = "FomError"

    def __init__(self, message="", **context):
        super().__init__(message)
        self.context = context

    def to_dict(self):
        return {"error": self.kind, "message": str(self), **self.context}


class InputError(FomError):
    kind = "InputError"


class PreconditionError(FomError):
    kind = "PreconditionError"


def _make(name, base):
    return type(name, (base,), {"kind": name})


MalformedInput = _make("MalformedInput", InputError)
BadLabel = _make("BadLabel", InputError)
NonFiniteScore = _make("NonFiniteScore", InputError)
InconsistentSubjectLabel = _make("InconsistentSubjectLabel", InputError)

DegenerateClasses = _make("DegenerateClasses", PreconditionError)
LengthMismatch = _make("LengthMismatch", PreconditionError)
BadSliverSpec = _make("BadSliverSpec", PreconditionError)
BadSpecificity = _make("BadSpecificity", PreconditionError)
TooFewSamples = _make("TooFewSamples", PreconditionError)
ZeroSpread = _make("ZeroSpread", PreconditionError)

MissingFolds = _make("MissingFolds", PreconditionError)
TooFewControls = _make("TooFewControls", PreconditionError)
UnknownFold = _make("UnknownFold", PreconditionError)

TooFewObjects = _make("TooFewObjects", PreconditionError)
MixedFoldWithinSubject = _make("MixedFoldWithinSubject", PreconditionError)
BadRule = _make("BadRule", PreconditionError)

DegenerateEpoch = _make("DegenerateEpoch", PreconditionError)
MissingEpochColumn = _make("MissingEpochColumn", PreconditionError)
FomNotInSeries = _make("FomNotInSeries", PreconditionError)
UnknownCovariate = _make("UnknownCovariate", PreconditionError)
BadFomSpec = _make("BadFomSpec", PreconditionError)

EmptySpace = _make("EmptySpace", PreconditionError)
BadSpace = _make("BadSpace", PreconditionError)
BadConfig = _make("BadConfig", PreconditionError)


class SearchAborted(FomError):
    """An objective evaluation failed; ``ledger`` holds the trials that finished."""

    kind = "SearchAborted"

    def __init__(self, message, ledger):
        super().__init__(message, completed_trials=len(ledger.trials))
        self.ledger = ledger
