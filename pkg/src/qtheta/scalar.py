"""Elements of a complete normed field K and of its unit group K*.

Two backends are provided:

* ``ComplexField`` -- complex numbers in polar form ``abs * exp(2*pi*i*turns)``.
  ``abs`` is an exact positive ``Fraction`` when possible and an mpmath real
  otherwise; ``turns`` is an exact ``Fraction`` in [0, 1) or an mpmath real.
* ``PAdicField`` -- rationals with the p-adic norm ``|x| = p**(-v_p(x))``.

``Scalar`` objects are nonzero and multiplicative only.  ``Coefficient``
objects admit zero and addition; they keep an exact scalar as long as no
addition has happened.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math

import mpmath
from sympy import integer_nthroot

__all__ = [
    "BackendMismatch",
    "NotASquare",
    "ComplexField",
    "PAdicField",
    "Scalar",
    "ComplexScalar",
    "PAdicScalar",
    "Coefficient",
    "scalar_mul",
    "scalar_sqrt",
    "log_norm",
    "parse_rational",
]


class BackendMismatch(ValueError):
    pass


class NotASquare(ValueError):
    pass


@lru_cache(maxsize=None)
def _context(prec):
    ctx = mpmath.MPContext()
    ctx.prec = prec
    return ctx


def parse_rational(text):
    """Parse ``"p/q"`` or an integer literal into a Fraction."""
    if isinstance(text, bool):
        raise ValueError(f"not a rational literal: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, Fraction):
        return text
    if not isinstance(text, str):
        raise ValueError(f"not a rational literal: {text!r}")
    s = text.strip()
    if "." in s or "e" in s.lower():
        raise ValueError(f"not a rational literal: {text!r}")
    return Fraction(s)


def _exact_root(x: Fraction, k: int):
    """k-th root of a positive Fraction if it is rational, else None."""
    num, ok_n = integer_nthroot(x.numerator, k)
    if not ok_n:
        return None
    den, ok_d = integer_nthroot(x.denominator, k)
    if not ok_d:
        return None
    return Fraction(num, den)


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ComplexField:
    """Complex numbers at ``prec`` bits.

    ``tol`` is the relative equality tolerance; the default is 1e-30 at 256
    bits and scales with the precision.
    """

    prec: int = 256
    tol: float | None = None
    name = "complex"

    def __post_init__(self):
        if self.prec < 64:
            raise ValueError("precision must be at least 64 bits")

    @property
    def ctx(self):
        return _context(self.prec)

    @property
    def tolerance(self):
        if self.tol is not None:
            return self.ctx.mpf(self.tol)
        return self.ctx.mpf(10) ** (-(self.prec * 30 // 256))

    @property
    def dps(self):
        return self.ctx.dps

    def __eq__(self, other):
        return isinstance(other, ComplexField) and other.prec == self.prec

    def __hash__(self):
        return hash(("complex", self.prec))

    def scalar(self, abs=1, turns=0) -> ComplexScalar:
        return ComplexScalar(self, abs, turns)

    def one(self):
        return ComplexScalar(self, Fraction(1), Fraction(0))

    def real(self, value):
        """Scalar for a nonzero real number (sign goes into ``turns``)."""
        value = self._number(value)
        if value == 0:
            raise ValueError("zero is not in K*")
        if value < 0:
            return ComplexScalar(self, -value, Fraction(1, 2))
        return ComplexScalar(self, value, Fraction(0))

    def from_complex(self, z) -> ComplexScalar:
        """Scalar from a Python or mpmath complex number (turns become inexact)."""
        ctx = self.ctx
        z = ctx.mpc(z)
        r = abs(z)
        if r == 0:
            raise ValueError("zero is not in K*")
        return ComplexScalar(self, r, ctx.arg(z) / (2 * ctx.pi))

    def coefficient(self, value) -> Coefficient:
        if isinstance(value, Scalar):
            return Coefficient(self, value)
        if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
            return self.coefficient(self.real(value)) if value else self.zero()
        return Coefficient(self, self.ctx.mpc(value))

    def zero(self):
        return Coefficient(self, self.ctx.mpc(0))

    def _number(self, value):
        if isinstance(value, (Fraction, int)) and not isinstance(value, bool):
            return Fraction(value)
        if isinstance(value, str):
            try:
                return parse_rational(value)
            except ValueError:
                return self.ctx.mpf(value)
        return self.ctx.mpf(value)

    def parse(self, obj) -> ComplexScalar:
        """Scalar from its JSON literal ``{"abs": ..., "turns": ...}``.

        Bare numbers and strings are read as real scalars.
        """
        if isinstance(obj, ComplexScalar):
            return obj
        if isinstance(obj, dict):
            if set(obj) - {"abs", "turns"}:
                raise ValueError(f"unexpected keys in complex scalar {obj!r}")
            a = self._number(obj.get("abs", 1))
            t = self._number(obj.get("turns", 0))
            if a <= 0:
                raise ValueError(f"abs must be positive in {obj!r}")
            return ComplexScalar(self, a, t)
        if isinstance(obj, (int, str, float, Fraction)) and not isinstance(obj, bool):
            return self.real(obj)
        raise ValueError(f"not a complex scalar literal: {obj!r}")


@dataclass(frozen=True)
class PAdicField:
    """The rationals inside Q_p, normed by the p-adic absolute value."""

    p: int
    prec: int = 256
    name = "padic"

    def __post_init__(self):
        if self.p < 2 or any(self.p % d == 0 for d in range(2, math.isqrt(self.p) + 1)):
            raise ValueError(f"{self.p} is not a prime")

    @property
    def ctx(self):
        return _context(self.prec)

    @property
    def tolerance(self):
        return Fraction(0)

    def __eq__(self, other):
        return isinstance(other, PAdicField) and other.p == self.p

    def __hash__(self):
        return hash(("padic", self.p))

    def scalar(self, value) -> PAdicScalar:
        return PAdicScalar(self, Fraction(value))

    def one(self):
        return PAdicScalar(self, Fraction(1))

    def real(self, value):
        return PAdicScalar(self, parse_rational(value) if isinstance(value, str) else Fraction(value))

    def coefficient(self, value) -> Coefficient:
        if isinstance(value, PAdicScalar):
            return Coefficient(self, value.value)
        if isinstance(value, Scalar):
            raise BackendMismatch("complex scalar used with a p-adic field")
        return Coefficient(self, Fraction(value))

    def zero(self):
        return Coefficient(self, Fraction(0))

    def valuation(self, x: Fraction) -> int:
        if x == 0:
            raise ValueError("valuation of zero")
        v = 0
        n, d = x.numerator, x.denominator
        while n % self.p == 0:
            n //= self.p
            v += 1
        while d % self.p == 0:
            d //= self.p
            v -= 1
        return v

    def parse(self, obj) -> PAdicScalar:
        """Scalar from ``{"rat": "p/q", "p": prime}`` or a bare rational."""
        if isinstance(obj, PAdicScalar):
            return obj
        if isinstance(obj, dict):
            if set(obj) - {"rat", "p"}:
                raise ValueError(f"unexpected keys in p-adic scalar {obj!r}")
            if "p" in obj and obj["p"] != self.p:
                raise BackendMismatch(f"prime {obj['p']} does not match field prime {self.p}")
            if "rat" not in obj:
                raise ValueError(f"missing 'rat' in {obj!r}")
            return self.scalar(parse_rational(obj["rat"]))
        return self.scalar(parse_rational(obj))


class Scalar:
    """Common interface of the two backends (elements of K*)."""

    __slots__ = ()

    def _check(self, other):
        if not isinstance(other, Scalar):
            raise TypeError(f"cannot combine Scalar with {type(other).__name__}")
        if other.field != self.field:
            raise BackendMismatch(f"{self.field!r} vs {other.field!r}")

    def __truediv__(self, other):
        return self * other.inverse()

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    def sqrt(self, branch="principal"):
        return scalar_sqrt(self, branch)

    def relative_error(self, other):
        """|self/other - 1| as an mpmath real (0 for exactly equal values)."""
        self._check(other)
        q = self / other
        if q.is_exactly_one():
            return self.field.ctx.mpf(0)
        return abs(q.to_coefficient().value_complex() - 1)


class ComplexScalar(Scalar):
    __slots__ = ("field", "abs", "turns")

    def __init__(self, field, abs, turns):
        ctx = field.ctx
        if isinstance(abs, int) and not isinstance(abs, bool):
            abs = Fraction(abs)
        if not isinstance(abs, Fraction):
            abs = ctx.mpf(abs)
        if abs <= 0:
            raise ValueError("abs must be positive")
        if isinstance(turns, int) and not isinstance(turns, bool):
            turns = Fraction(turns)
        if isinstance(turns, Fraction):
            turns = turns - math.floor(turns)
        else:
            turns = ctx.mpf(turns)
            turns = turns - ctx.floor(turns)
            if turns >= 1:
                turns -= 1
        self.field = field
        self.abs = abs
        self.turns = turns

    @property
    def exact(self):
        return isinstance(self.abs, Fraction) and isinstance(self.turns, Fraction)

    def _abs_mpf(self):
        a = self.abs
        if isinstance(a, Fraction):
            return self.field.ctx.mpf(a.numerator) / a.denominator
        return a

    def _turns_mpf(self):
        t = self.turns
        if isinstance(t, Fraction):
            return self.field.ctx.mpf(t.numerator) / t.denominator
        return t

    def __mul__(self, other):
        if isinstance(other, Coefficient):
            return other * self
        self._check(other)
        if isinstance(self.abs, Fraction) and isinstance(other.abs, Fraction):
            a = self.abs * other.abs
        else:
            a = self._abs_mpf() * other._abs_mpf()
        if isinstance(self.turns, Fraction) and isinstance(other.turns, Fraction):
            t = self.turns + other.turns
        else:
            t = self._turns_mpf() + other._turns_mpf()
        return ComplexScalar(self.field, a, t)

    def inverse(self):
        a = 1 / self.abs
        return ComplexScalar(self.field, a, -self.turns)

    def __pow__(self, e):
        if isinstance(e, int) and not isinstance(e, bool):
            if isinstance(self.abs, Fraction):
                a = self.abs ** e
            else:
                a = self.abs ** e
            return ComplexScalar(self.field, a, self.turns * e)
        e = Fraction(e)
        if e.denominator == 1:
            return self ** e.numerator
        a = None
        if isinstance(self.abs, Fraction):
            root = _exact_root(self.abs, e.denominator)
            if root is not None:
                a = root ** e.numerator
        if a is None:
            ctx = self.field.ctx
            a = ctx.power(self._abs_mpf(), ctx.mpf(e.numerator) / e.denominator)
        if isinstance(self.turns, Fraction):
            t = self.turns * e
        else:
            t = self.turns * e.numerator / e.denominator
        return ComplexScalar(self.field, a, t)

    def is_exactly_one(self):
        return self.abs == 1 and self.turns == 0 and self.exact

    def is_one(self, tol=None):
        return self == self.field.one() if tol is None else self.close(self.field.one(), tol)

    def log_norm(self):
        a = self.abs
        if isinstance(a, Fraction) and a == 1:
            return self.field.ctx.mpf(0)
        return self.field.ctx.log(self._abs_mpf())

    def is_unit_norm(self, tol=None):
        if isinstance(self.abs, Fraction):
            return self.abs == 1
        tol = self.field.tolerance if tol is None else tol
        return abs(self.abs - 1) <= tol

    def to_coefficient(self):
        return Coefficient(self.field, self)

    def to_complex(self):
        """Cartesian value as an mpmath complex at the field precision."""
        ctx = self.field.ctx
        t = self.turns
        if isinstance(t, Fraction):
            if t == 0:
                phase = ctx.mpc(1)
            elif t == Fraction(1, 2):
                phase = ctx.mpc(-1)
            else:
                phase = ctx.expjpi(ctx.mpf(2 * t.numerator) / t.denominator)
        else:
            phase = ctx.expjpi(2 * t)
        return self._abs_mpf() * phase

    def close(self, other, tol=None):
        self._check(other)
        if self.exact and other.exact:
            return self.abs == other.abs and self.turns == other.turns
        tol = self.field.tolerance if tol is None else tol
        a1, a2 = self._abs_mpf(), other._abs_mpf()
        if abs(a1 - a2) > tol * max(a1, a2):
            return False
        d = self._turns_mpf() - other._turns_mpf()
        d = d - self.field.ctx.nint(d)
        return abs(d) <= tol

    def __eq__(self, other):
        if not isinstance(other, ComplexScalar) or other.field != self.field:
            return NotImplemented if not isinstance(other, Scalar) else False
        return self.close(other)

    def to_json(self):
        return {"abs": self._num_str(self.abs), "turns": self._num_str(self.turns)}

    def _num_str(self, x):
        if isinstance(x, Fraction):
            return _frac_str(x)
        return self.field.ctx.nstr(x, self.field.dps + 3, min_fixed=-10**9, max_fixed=10**9)

    def __repr__(self):
        j = self.to_json()
        return f"ComplexScalar(abs={j['abs']}, turns={j['turns']})"


class PAdicScalar(Scalar):
    __slots__ = ("field", "value")

    def __init__(self, field, value):
        value = Fraction(value)
        if value == 0:
            raise ValueError("zero is not in K*")
        self.field = field
        self.value = value

    exact = True

    def __mul__(self, other):
        if isinstance(other, Coefficient):
            return other * self
        self._check(other)
        return PAdicScalar(self.field, self.value * other.value)

    def inverse(self):
        return PAdicScalar(self.field, 1 / self.value)

    def __pow__(self, e):
        if isinstance(e, int) and not isinstance(e, bool):
            return PAdicScalar(self.field, self.value ** e)
        e = Fraction(e)
        if e.denominator == 1:
            return self ** e.numerator
        x = self.value
        k = e.denominator
        if x < 0:
            if k % 2 == 0:
                raise NotASquare(f"{x} has no rational root of even degree {k}")
            root = _exact_root(-x, k)
            root = -root if root is not None else None
        else:
            root = _exact_root(x, k)
        if root is None:
            raise NotASquare(f"{x} is not a rational {k}-th power")
        return PAdicScalar(self.field, root ** e.numerator)

    @property
    def valuation(self):
        return self.field.valuation(self.value)

    def is_exactly_one(self):
        return self.value == 1

    def is_one(self, tol=None):
        return self.value == 1

    def log_norm(self):
        ctx = self.field.ctx
        v = self.valuation
        if v == 0:
            return ctx.mpf(0)
        return -v * ctx.log(self.field.p)

    def is_unit_norm(self, tol=None):
        return self.valuation == 0

    def to_coefficient(self):
        return Coefficient(self.field, self.value)

    def close(self, other, tol=None):
        self._check(other)
        return self.value == other.value

    def __eq__(self, other):
        if not isinstance(other, PAdicScalar) or other.field != self.field:
            return NotImplemented if not isinstance(other, Scalar) else False
        return self.value == other.value

    def relative_error(self, other):
        self._check(other)
        if self.value == other.value:
            return self.field.ctx.mpf(0)
        d = self.value / other.value - 1
        return self.field.ctx.mpf(self.field.p) ** (-self.field.valuation(d))

    def to_json(self):
        return {"rat": _frac_str(self.value), "p": self.field.p}

    def __repr__(self):
        return f"PAdicScalar({_frac_str(self.value)}, p={self.field.p})"


class Coefficient:
    """An element of K, possibly zero.

    ``value`` is a Scalar while the coefficient is a plain product of scalars;
    sums fall back to an mpmath complex (complex field) or a Fraction (p-adic).
    """

    __slots__ = ("field", "value")

    def __init__(self, field, value):
        if isinstance(field, PAdicField) and isinstance(value, PAdicScalar):
            value = value.value
        self.field = field
        self.value = value

    def _cart(self):
        v = self.value
        if isinstance(v, ComplexScalar):
            return v.to_complex()
        return v

    def value_complex(self):
        """Cartesian value (mpmath complex, or Fraction for p-adic)."""
        return self._cart()

    def is_zero(self):
        return not isinstance(self.value, Scalar) and self.value == 0

    def _coerce(self, other):
        if isinstance(other, Coefficient):
            if other.field != self.field:
                raise BackendMismatch(f"{self.field!r} vs {other.field!r}")
            return other
        if isinstance(other, Scalar):
            if other.field != self.field:
                raise BackendMismatch(f"{self.field!r} vs {other.field!r}")
            return Coefficient(self.field, other)
        return self.field.coefficient(other)

    def __add__(self, other):
        other = self._coerce(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        return Coefficient(self.field, self._cart() + other._cart())

    __radd__ = __add__

    def __neg__(self):
        v = self.value
        if isinstance(v, ComplexScalar):
            return Coefficient(self.field, v * self.field.scalar(1, Fraction(1, 2)))
        return Coefficient(self.field, -v)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return self.field.zero()
        a, b = self.value, other.value
        if isinstance(a, ComplexScalar) and isinstance(b, ComplexScalar):
            return Coefficient(self.field, a * b)
        return Coefficient(self.field, self._cart() * other._cart())

    __rmul__ = __mul__

    def norm(self):
        """Absolute value in the field's norm, as an mpmath real."""
        ctx = self.field.ctx
        v = self.value
        if isinstance(v, ComplexScalar):
            return v._abs_mpf()
        if isinstance(self.field, PAdicField):
            if v == 0:
                return ctx.mpf(0)
            return ctx.mpf(self.field.p) ** (-self.field.valuation(v))
        return abs(v)

    def relative_distance(self, other):
        """|self - other| / max(|self|, |other|); zero when both vanish."""
        other = self._coerce(other)
        if self.is_zero() and other.is_zero():
            return self.field.ctx.mpf(0)
        if isinstance(self.value, Scalar) and isinstance(other.value, Scalar):
            if self.value.exact and other.value.exact and self.value.close(other.value):
                return self.field.ctx.mpf(0)
        if isinstance(self.field, PAdicField):
            if self._cart() == other._cart():
                return self.field.ctx.mpf(0)
        diff = (self - other).norm()
        return diff / max(self.norm(), other.norm())

    def close(self, other, tol=None):
        tol = self.field.tolerance if tol is None else tol
        return self.relative_distance(other) <= tol

    def to_json(self):
        v = self.value
        if isinstance(self.field, PAdicField):
            return {"rat": _frac_str(v), "p": self.field.p}
        z = self._cart()
        ctx = self.field.ctx
        n = self.field.dps + 3
        return {"re": ctx.nstr(z.real, n), "im": ctx.nstr(z.imag, n)}

    def __repr__(self):
        return f"Coefficient({self.value!r})"


def scalar_mul(x: Scalar, y: Scalar) -> Scalar:
    return x * y


def scalar_sqrt(x: Scalar, branch="principal") -> Scalar:
    """Square root of x.

    Complex: the principal branch halves ``turns`` (taken in [0, 1)); ``"other"``
    adds half a turn.  p-adic: x must be the square of a rational; the
    principal root is the positive one.
    """
    if branch not in ("principal", "other"):
        raise ValueError(f"unknown branch {branch!r}")
    if isinstance(x, PAdicScalar):
        if x.value < 0:
            raise NotASquare(f"{x.value} is not a rational square")
        r = x ** Fraction(1, 2)
        return r if branch == "principal" else PAdicScalar(x.field, -r.value)
    r = x ** Fraction(1, 2)
    if branch == "other":
        r = r * x.field.scalar(1, Fraction(1, 2))
    return r


def log_norm(x: Scalar):
    return x.log_norm()
