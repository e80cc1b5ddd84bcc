"""Exception types shared across the harness.

Every error the harness raises on purpose derives from HarnessError so
callers (and the CLI) can separate expected failures from bugs.
"""


class HarnessError(Exception):
    """Base class for all errors raised by the harness."""


# --- strategy catalog ---------------------------------------------------

class CatalogParseError(HarnessError):
    """Catalog file is missing, malformed, or violates an invariant."""


class DuplicateStrategyId(CatalogParseError):
    """Two catalog entries share the same id."""


class UnknownStrategy(HarnessError):
    """Lookup of a strategy id that is not in the catalog."""


# --- prompt construction ------------------------------------------------

class EmptyQuestion(HarnessError):
    """An example with an empty question reached the prompt builder."""


# --- answer extraction / scoring ----------------------------------------

class NoAnswerFound(HarnessError):
    """No candidate answer of the requested kind exists in the text."""


class KindMismatch(HarnessError):
    """Two answers of different kinds were compared or pooled."""


# --- completion backends ------------------------------------------------

class BackendUnavailable(HarnessError):
    """Backend could not produce a completion (network, auth, 5xx)."""


class RateLimited(HarnessError):
    """Backend kept returning 429 after the retry budget was spent."""


class CacheMiss(HarnessError):
    """Strict replay (or a scripted mock) has no response for a request."""


class MalformedResponse(HarnessError):
    """Backend answered, but the body could not be interpreted."""


# --- dataset ingestion ----------------------------------------------------

class SourceParseError(HarnessError):
    """A dataset (or script/config) file could not be parsed."""


class CountMismatch(HarnessError):
    """Strict loading found a different number of examples than declared."""


class KindViolation(HarnessError):
    """An example's answer does not fit the dataset's declared kind."""


class SliceTooLarge(HarnessError):
    """A random slice larger than the dataset was requested."""


# --- evaluation ----------------------------------------------------------

class EmptyVote(HarnessError):
    """majority_vote received no answers."""


class MixedRuns(HarnessError):
    """A report was requested over records from different runs."""


# --- analysis ------------------------------------------------------------

class EmptyInput(HarnessError):
    """An aggregate was requested over an empty (or too small) collection."""


class DuplicateExample(HarnessError):
    """The same example id appears twice in an annotation set."""


class IdMismatch(HarnessError):
    """Feature vectors and error labels cover different example ids."""
