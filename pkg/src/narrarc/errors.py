"""Exception hierarchy shared by every narrarc module.

Domain errors map to CLI exit code 1 and to 4xx HTTP responses;
configuration errors map to exit code 2.
"""

from __future__ import annotations


class NarrarcError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(NarrarcError):
    """Invalid or missing configuration (file, environment, or flags)."""


class DomainError(NarrarcError):
    """A request that is well-formed but violates a domain rule."""


class NotFound(DomainError):
    """Referenced entity does not exist in the store."""


class Conflict(DomainError):
    """Operation would violate a uniqueness or consistency rule."""


class ConstraintViolation(DomainError):
    """Input breaks referential integrity or a schema constraint."""


class SelfMerge(DomainError):
    """Merge where keep and remove are the same entity."""


class PreconditionError(DomainError):
    """Operation called with inputs that violate its stated preconditions."""


class OutOfOrderEpisode(DomainError):
    """Pipeline run attempted before all prior episodes were processed."""


class EpisodeAlreadyProcessed(DomainError):
    """Pipeline run attempted for an episode that was already committed."""


class StoreBusy(DomainError):
    """Mutation rejected because a pipeline run holds the season lock."""


class MalformedCorpus(DomainError):
    """Corpus directory violates the expected layout or file naming."""


class DimensionMismatch(DomainError):
    """Vector operation on vectors of different dimensions."""


class ZeroVector(DomainError):
    """Cosine similarity requested for a zero-norm vector."""


class InsufficientPoints(DomainError):
    """Too few embedded arcs for the requested projection."""


class GatewayError(NarrarcError):
    """Base class for model-provider failures."""


class ProviderUnavailable(GatewayError):
    """The configured provider could not serve the request."""


class SchemaRepairExhausted(GatewayError):
    """Model output still failed schema validation after all repair attempts."""


class UnexpectedRequest(GatewayError):
    """The mock provider received a request its script does not cover."""


class PipelineStageError(NarrarcError):
    """An agent returned schema-valid output that violates a stage contract."""
