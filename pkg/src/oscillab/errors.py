"""Shared exception types.

Every named failure mode raised by the library lives here so callers can
catch one base class (OscillabError) or the specific condition.
"""

from __future__ import annotations


class OscillabError(Exception):
    """Base class for all library errors."""


class EmptyCube(OscillabError):
    """A cube contains no cell centers."""


class OutOfDomain(OscillabError):
    """A cube (or evaluation point) leaves the grid box."""


class ResolutionTooCoarse(OscillabError):
    """Requested dyadic generation is finer than the grid spacing."""


class GridMismatch(OscillabError):
    """Two grid functions (or a function and a space) live on different grids."""


class NonPositiveWeight(OscillabError):
    """A weight must be strictly positive and finite at every cell."""


class BracketFailure(OscillabError):
    """Luxemburg bisection could not bracket the unit-modular level."""


class ConjugateUndefined(OscillabError):
    """Conjugate exponent requested where p attains 1."""


class DivisionByZeroNorm(OscillabError):
    """A ratio of norms was requested with a zero denominator."""


class AlphaOutOfRange(OscillabError):
    """Fractional order alpha outside the admissible interval."""


class MeanZeroViolation(OscillabError):
    """Singular kernel whose angular part does not integrate to zero."""


class UncoveredPoint(OscillabError):
    """A maximal-operator cube family fails to cover some cell center."""


class KernelVanishes(OscillabError):
    """No admissible annulus point keeps |K| bounded away from zero."""


class BadDelta(OscillabError):
    """Geometry parameter delta outside (0, 1)."""


class TailTooLarge(OscillabError):
    """Truncated reciprocal-kernel expansion misses its residual budget."""


class NormUnavailable(OscillabError):
    """Requested norm cannot be evaluated for this space kind."""


class ConfigError(OscillabError):
    """Malformed experiment configuration."""
