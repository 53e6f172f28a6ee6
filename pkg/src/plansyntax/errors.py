"""
Errors raised by plansyntax.

Every error derives from :class:`PlanSyntaxError` so that batch drivers (the
oracle and the CLI) can turn any per-plan failure into data instead of
aborting a run. Errors that describe a bad input value also derive from
``ValueError``.
"""


class PlanSyntaxError(Exception):
    """Base class of all plansyntax errors."""


# ---- mask parsing ----


class DecodeError(PlanSyntaxError, ValueError):
    """The encoded image could not be decoded."""


class ChannelCountError(PlanSyntaxError, ValueError):
    """The decoded raster does not have exactly four channels."""


class InvariantError(PlanSyntaxError, ValueError):
    """A decoded mask violates a structural invariant."""


class UnknownCodeError(PlanSyntaxError, ValueError):
    """A pixel value is absent from the channel-code table (strict mode)."""


# ---- graph / integration ----


class EmptyPlanError(PlanSyntaxError):
    """No rectangle survived the decomposition."""


class DisconnectedError(PlanSyntaxError):
    """The rectangle-space graph is disconnected (strict mode)."""


class TooFewNodesError(PlanSyntaxError, ValueError):
    """Not enough nodes for the requested integration method."""


# ---- metrics ----


class MissingPublicError(PlanSyntaxError):
    """The plan has no scored public room."""


class MissingOtherError(PlanSyntaxError):
    """The plan has no scored non-public room."""


class NoValidCategoryError(PlanSyntaxError):
    """No merged category of the denominator set is present."""


class MissingLivingError(PlanSyntaxError):
    """Living is absent, or no other visible category exists."""


class CategoryMismatchError(PlanSyntaxError, ValueError):
    """Two profiles do not share the same category set."""


class EmptyError(PlanSyntaxError, ValueError):
    """A statistic was requested over an empty sample."""


class EmptyOthersError(PlanSyntaxError, ValueError):
    """The robust advantage needs at least one other room type."""


# ---- generator / training ----


class ConfigError(PlanSyntaxError, ValueError):
    """Inconsistent configuration."""


class DegeneratePolygonError(PlanSyntaxError):
    """A room polygon rasterizes to zero area."""


class DimensionError(PlanSyntaxError, ValueError):
    """Array dimensions do not agree."""


class LengthMismatchError(PlanSyntaxError, ValueError):
    """Two sequences were expected to have equal lengths."""


class SpecParseError(PlanSyntaxError, ValueError):
    """A compact text setting (a respacing string) could not be parsed."""


class RespacingError(SpecParseError):
    """A timestep respacing string is malformed."""


class ZeroStepsError(PlanSyntaxError, ValueError):
    """A timestep respacing string allocates no step at all."""


class OODViolationError(PlanSyntaxError):
    """A training condition exceeded the room-count cap."""
