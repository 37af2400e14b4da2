"""Exception hierarchy for the plr package.

Every domain error derives from PlrError so the CLI can map them to a
single exit code. Class names are stable identifiers: diagnostics print
``type(e).__name__`` and scripts may match on it.
"""

from __future__ import annotations


class PlrError(Exception):
    """Base class for all domain errors raised by this package."""


# feature file format
class MalformedHeader(PlrError):
    """Feature file does not start with a valid magic/version header."""


class DimensionMismatch(PlrError):
    """Declared and actual shapes disagree (empty sets are also rejected)."""


class NonFiniteValue(PlrError):
    """A feature row contains NaN or Inf; the message names the row index."""


class IoFailure(PlrError):
    """Underlying file I/O failed."""


# clustering
class InvalidK(PlrError):
    """k-means cluster count outside 1..N."""


class HeuristicZero(PlrError):
    """Cluster-count heuristic floor(n / 15) evaluated to zero."""


# selection / sampling
class EmptySelection(PlrError):
    """No cluster survived the selection rules."""

    def __init__(self, message: str, iteration: int | None = None, records=None):
        super().__init__(message)
        self.iteration = iteration
        self.records = records if records is not None else []


class TooFewIdentities(PlrError):
    """Fewer pseudo identities than the P of a PK batch."""


class IdentityTooSmall(PlrError):
    """A pseudo identity has fewer than K samples; message names the id."""


# evaluation
class NoValidQuery(PlrError):
    """Every query was excluded by the evaluation protocol filter."""


class GalleryTooSmall(PlrError):
    """Gallery too small for the requested re-ranking neighborhood."""


# synthetic data / loop
class InfeasibleSpec(PlrError):
    """Synthetic data spec cannot be satisfied (e.g. <2 cameras)."""


class TrainerFailure(PlrError):
    """External trainer exited non-zero or produced malformed output."""
