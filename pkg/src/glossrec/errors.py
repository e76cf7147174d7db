"""Typed errors.

Callers are expected to distinguish data problems (infeasible alignments,
too-short sequences) from plain misuse (bad shapes, bad config) and from
runtime failures (divergence), so each gets its own class.
"""


class GlossrecError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(GlossrecError, ValueError):
    """Malformed input: bad ids, bad shapes, non-finite values, bad flags."""


class InfeasibleAlignmentError(GlossrecError):
    """The labeling cannot be produced by any path of the given length."""


class OracleLimitError(GlossrecError):
    """Brute-force enumeration bounds exceeded."""


class SequenceTooShortError(GlossrecError):
    """Input sequence shorter than the temporal variant's minimum length."""


class ConfigError(GlossrecError):
    """Inconsistent or unsatisfiable configuration."""


class ForwardCacheError(GlossrecError):
    """backward() called without a matching forward() pass."""


class DivergenceError(GlossrecError):
    """Training produced a non-finite loss or gradient."""
