"""Exception types shared across the package."""


class WmlabError(Exception):
    """Base class for all package errors."""


class UnknownSymbol(WmlabError):
    """Text contains a character with no vocabulary entry, not even a single-char fallback."""


class EmptyCorpus(WmlabError):
    """Model training was asked to run on an empty corpus."""


class InvalidDistribution(WmlabError):
    """A hook produced a next-token distribution that is not a valid probability vector."""


class EmptyInput(WmlabError):
    """A detector was handed an empty token sequence."""


class KeyExhausted(WmlabError):
    """Inverse sampling ran past the end of the key sequence."""


class ConfigError(WmlabError):
    """A scheme or attack was configured inconsistently (missing table, missing token, ...)."""


class Undecidable(WmlabError):
    """Detection cannot be evaluated on this input (e.g. no whitespace, no encodable words)."""


class AttackFailed(WmlabError):
    """An attack hook failed or timed out; the scenario must be marked invalid."""


class JudgeFailed(WmlabError):
    """An external quality judge hook failed; the scenario must be marked invalid."""


class ScenarioSkipped(WmlabError):
    """The requested (scheme, attack) pairing is not applicable."""


class Unsupported(WmlabError):
    """The operation is only defined for the built-in toy backends."""
