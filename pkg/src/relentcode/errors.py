"""Exception hierarchy shared by the codecs and the CLI."""

from __future__ import annotations


class RelentError(Exception):
    """Base class for all errors raised by this package."""


class UndefinedRatioError(RelentError, ValueError):
    """The marginal assigns zero mass or density to the requested output."""


class UnboundedRatioError(RelentError, ValueError):
    """No finite bound on the density ratio is available."""


class MutualInformationUnavailable(RelentError):
    """The mechanism has no closed-form mutual information."""


class CodecError(RelentError):
    """A record could not be encoded or decoded."""


class BudgetExhausted(CodecError):
    """A selection sampler hit its step budget before terminating.

    ``steps`` is the number of proposals examined and ``best_index`` the
    candidate the sampler would have returned had it stopped there.
    """

    def __init__(self, steps: int, best_index: int, message: str | None = None):
        self.steps = steps
        self.best_index = best_index
        super().__init__(message or f"budget of {steps} steps exhausted "
                                    f"(best index so far: {best_index})")


class ZeroProbabilityError(CodecError):
    """The symbol to encode has (almost) no mass under the coding distribution."""


class TruncatedError(CodecError):
    """The bit string ended in the middle of a codeword."""


class MalformedCodeword(CodecError):
    """The bits do not form a valid codeword for the given model."""


class FormatError(RelentError):
    """A container file is not in the expected format."""
