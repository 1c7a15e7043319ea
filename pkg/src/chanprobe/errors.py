"""Exception hierarchy for the probing toolkit."""


class ChanprobeError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ChanprobeError):
    """An input is outside the mathematical domain of a conversion."""


class FitError(ChanprobeError):
    """Back-to-back characterization data is unusable for fitting."""


class CharacterizationError(ChanprobeError):
    """A fitted characterization violates its contract (non-monotone, etc.)."""


class ExtrapolationError(ChanprobeError):
    """A curve was evaluated outside its validity range without opting in."""


class InversionError(ChanprobeError):
    """A Q value has no pre-image on the curve's validity range."""


class CatalogError(ChanprobeError):
    """Configuration/curve bookkeeping mismatch."""


class PowerBudgetError(ChanprobeError):
    """Total power at an amplifier output exceeds its rating."""


class EngineError(ChanprobeError):
    """The probing pipeline received inputs it cannot aggregate."""


class SourceError(ChanprobeError):
    """A measurement source failed to produce a reading for a stimulus."""


class RegimeError(ChanprobeError):
    """Regime classification lacks the sweep points it needs."""
