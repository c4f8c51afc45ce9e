"""Exception types raised by the library.

Everything derives from :class:`AntiCollapseError` so callers can catch the
whole family; individual classes also subclass the closest builtin
(``ValueError`` / ``RuntimeError`` / ``IOError``) to stay friendly to generic
error handling.
"""


class AntiCollapseError(Exception):
    """Base class for all library errors."""


# --- numerics ---------------------------------------------------------------

class NotSymmetric(AntiCollapseError, ValueError):
    """Matrix asymmetry exceeds the accepted tolerance."""


class NotPositiveDefinite(AntiCollapseError, ValueError):
    """Cholesky factorization hit a non-positive pivot."""


class NonFiniteValue(AntiCollapseError, ValueError):
    """An input or loaded array contains NaN or infinity."""


# --- batches, proxies, losses ------------------------------------------------

class EmptyInput(AntiCollapseError, ValueError):
    """Operation received zero rows."""


class EmptyBatch(EmptyInput):
    """Loss evaluated on an empty batch."""


class EmptySelection(AntiCollapseError, ValueError):
    """A class filter selected no proxies."""


class NotNormalized(AntiCollapseError, ValueError):
    """Row norms deviate from 1 beyond the accepted tolerance."""


class MissingProxy(AntiCollapseError, ValueError):
    """A batch label has no proxy in the proxy set."""


class NoNegativeProxies(AntiCollapseError, ValueError):
    """An anchor has no proxy of a different class to contrast against."""


class NonFiniteGradient(AntiCollapseError, RuntimeError):
    """A training step produced a NaN/inf loss or gradient."""


# --- metrics ------------------------------------------------------------------

class KTooLarge(AntiCollapseError, ValueError):
    """Requested neighborhood or cluster count exceeds what the data allows."""


class LengthMismatch(AntiCollapseError, ValueError):
    """Paired label vectors differ in length."""


class DegenerateInput(AntiCollapseError, ValueError):
    """Metric undefined for this input (empty pair set or zero denominator)."""


# --- data generation and persistence -----------------------------------------

class TooManyClasses(AntiCollapseError, ValueError):
    """Orthonormal class means requested with more classes than dimensions."""


class ClassTooSmall(AntiCollapseError, ValueError):
    """A class has fewer samples than the batch plan draws from it."""


class BadMagic(AntiCollapseError, IOError):
    """File does not start with the expected magic bytes."""


class TruncatedFile(AntiCollapseError, IOError):
    """File ends before the declared payload is complete."""
