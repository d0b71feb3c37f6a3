"""Gaussian-rational scalars and certified square-root bounds.

A :class:`Coeff` is a complex number ``re + im*i`` whose parts are exact
:class:`fractions.Fraction` values.  All core arithmetic in the package is
exact; an opt-in floating mode (see :func:`set_float_tolerance`) lets the
same code run with binary floats, in which case every equality test is
governed by one global tolerance.

The module also provides rational upper/lower bounds for square roots of
non-negative rationals.  These are what make disc geometry decidable: a
containment test ``|c| + r <= R`` is replaced by exact comparisons of
squared quantities, and reported margins use the (sound) ceil-sqrt bound.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

Rat = Fraction

# None means exact mode.  A Fraction-or-float tolerance enables float mode
# equality semantics: |a - b| <= tolerance counts as equal.
_tolerance: float | None = None


def set_float_tolerance(tol: float | None) -> None:
    """Enable float-mode comparisons with tolerance ``tol``; ``None`` restores
    exact mode."""
    global _tolerance
    if tol is not None and tol < 0:
        raise ValueError("tolerance must be non-negative")
    _tolerance = None if tol is None else float(tol)


def float_tolerance() -> float | None:
    return _tolerance


Number = Union[int, Fraction, float]


class Coeff:
    """Complex scalar with exact rational (or float, in float mode) parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: Number = 0, im: Number = 0):
        if isinstance(re, float) or isinstance(im, float):
            self.re = float(re)
            self.im = float(im)
        else:
            self.re = re if isinstance(re, Fraction) else Fraction(re)
            self.im = im if isinstance(im, Fraction) else Fraction(im)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "Coeff") -> "Coeff":
        return Coeff(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "Coeff") -> "Coeff":
        return Coeff(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "Coeff":
        return Coeff(-self.re, -self.im)

    def __mul__(self, other: "Coeff") -> "Coeff":
        # Real-only fast path; this is the hot loop of jet multiplication.
        if not (self.im or other.im):
            return Coeff(self.re * other.re)
        return Coeff(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __truediv__(self, other: "Coeff") -> "Coeff":
        d = other.re * other.re + other.im * other.im
        if not d:
            raise ZeroDivisionError("division by zero coefficient")
        return Coeff(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def conj(self) -> "Coeff":
        return Coeff(self.re, -self.im)

    def abs2(self):
        """|z|^2, exact in exact mode."""
        return self.re * self.re + self.im * self.im

    # -- comparisons --------------------------------------------------------

    def is_zero(self) -> bool:
        tol = _tolerance
        if tol is not None and (isinstance(self.re, float) or isinstance(self.im, float)):
            return abs(self.re) <= tol and abs(self.im) <= tol
        return not (self.re or self.im)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Coeff):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self) -> str:
        if not self.im:
            return f"Coeff({self.re})"
        return f"Coeff({self.re}, {self.im})"


ZERO = Coeff(0)
ONE = Coeff(1)


def coeff_abs_ub(c: Coeff) -> Fraction:
    """Rational upper bound for |c|; exact when |c|^2 is a rational square."""
    a2 = c.abs2()
    if isinstance(a2, float):
        return Fraction(math.sqrt(a2)).limit_denominator(10**12) + Fraction(1, 10**9)
    return sqrt_ub(a2)


def coeff_abs_lb(c: Coeff) -> Fraction:
    """Rational lower bound for |c|."""
    a2 = c.abs2()
    if isinstance(a2, float):
        f = Fraction(math.sqrt(a2)).limit_denominator(10**12) - Fraction(1, 10**9)
        return f if f > 0 else Fraction(0)
    return sqrt_lb(a2)


def _isqrt_ceil(n: int) -> int:
    s = math.isqrt(n)
    return s if s * s == n else s + 1


# extra binary digits in the square-root bounds: certified margins are often
# small differences of radii, so the rounding slack must be far below them
_SQRT_SCALE = 1 << 24


def sqrt_ub(q: Fraction) -> Fraction:
    """Rational upper bound >= sqrt(q) for q >= 0, within 2^-24 of exact.

    Uses sqrt(p/d) = sqrt(p*d*S^2)/(d*S) and integer ceil-sqrt, so the bound
    is exact whenever p*d is a perfect square (for squares of rationals)."""
    if q < 0:
        raise ValueError("sqrt bound of negative rational")
    num = q.numerator * q.denominator * _SQRT_SCALE * _SQRT_SCALE
    return Fraction(_isqrt_ceil(num), q.denominator * _SQRT_SCALE)


def sqrt_lb(q: Fraction) -> Fraction:
    """Rational lower bound <= sqrt(q) for q >= 0, within 2^-24 of exact."""
    if q < 0:
        raise ValueError("sqrt bound of negative rational")
    num = q.numerator * q.denominator * _SQRT_SCALE * _SQRT_SCALE
    return Fraction(math.isqrt(num), q.denominator * _SQRT_SCALE)
