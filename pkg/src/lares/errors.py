"""Exception types shared across the simulator.

Every domain error raised by this package derives from :class:`LaresError`
so callers (and the CLI exit-code mapping) can catch them in one place.
Input/configuration problems and runtime/numerical problems are kept on
separate branches.
"""

from __future__ import annotations


class LaresError(Exception):
    """Base class for all errors raised by this package."""


class InputError(LaresError):
    """A problem with user-supplied files, values, or configuration."""


class RuntimeFailure(LaresError):
    """A problem that arises while a model run is executing."""


# ---------------------------------------------------------------------------
# grid / geometry
# ---------------------------------------------------------------------------

class MissingCell(InputError):
    """A (segment, layer) cell expected by the shared ladder is absent."""


class NonMonotonicWidth(InputError):
    """Cell widths increase with depth within a segment."""


class NegativeGeometry(InputError):
    """A thickness, width, or length is negative."""


class ElevationOutOfRange(InputError):
    """A queried elevation lies outside the grid's vertical range."""


# ---------------------------------------------------------------------------
# forcing
# ---------------------------------------------------------------------------

class ParseError(InputError):
    """A forcing or profile file could not be parsed."""


class RangeViolation(InputError):
    """A record value violates its documented physical range."""


class GapTooLong(InputError):
    """A gap in a daily series is too long to interpolate (>= 30 days)."""


class InsufficientData(InputError):
    """Too few records to interpolate a series."""


class OutOfHorizon(RuntimeFailure):
    """A sample time lies outside the series horizon."""


# ---------------------------------------------------------------------------
# hydrodynamics / transport
# ---------------------------------------------------------------------------

class OutOfRange(InputError):
    """A scalar argument lies outside the supported physical range."""


class NoWetLayer(RuntimeFailure):
    """A column holds no water at the current surface elevation."""


class DryPath(RuntimeFailure):
    """Flow routing reached a segment with no wet cells."""


class CflViolation(RuntimeFailure):
    """An advection step would violate the CFL stability bound."""


class ReservoirOverflow(RuntimeFailure):
    """The water surface rose above the top of the grid."""


class ReservoirEmpty(RuntimeFailure):
    """The water surface dropped below the deepest bed."""


class SingularSystem(RuntimeFailure):
    """An implicit diffusion system was singular or ill-posed."""


# ---------------------------------------------------------------------------
# calibration / scenario / cli
# ---------------------------------------------------------------------------

class LengthMismatch(InputError):
    """Paired prediction/observation sequences differ in length."""


class EmptyInput(InputError):
    """An operation received an empty sequence where data is required."""


class StationUnknown(InputError):
    """An observation references a station the run does not define."""


class DayOutsideHorizon(InputError):
    """An observation day lies outside the simulated horizon."""


class BudgetExhausted(RuntimeFailure):
    """The calibration evaluation budget was exhausted before any search."""


class WindowOutsideHorizon(InputError):
    """A scenario window does not fit inside the run horizon."""


class ConfigError(InputError):
    """A configuration file is missing keys or holds malformed values."""


class CheckFailure(LaresError):
    """A requested validation check did not pass (grid-check, directional)."""
