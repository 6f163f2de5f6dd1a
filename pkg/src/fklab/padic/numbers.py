"""Exact arithmetic and characters for truncated p-adic numbers.

A nonzero number is stored as ``unit * p**valuation`` with an exact signed
integer unit coprime to p, plus a precision annotation: the number of
digits tracked by whoever produced the value (samplers draw digits only up
to that window).  Because the unit is exact, field identities like
``x + (-x) == 0`` and ``|x*y| == |x|*|y|`` hold exactly; a precision error
is raised only when an addition cancels every digit both operands actually
share, so the result's valuation is genuinely indeterminate.

The canonical digit expansion (entries in [0, p), leading digit nonzero)
is derived on demand; for negative units it is the usual complement
expansion truncated to the precision window.
"""

from __future__ import annotations

from math import tau  # 2*pi
import cmath

DEFAULT_PRECISION = 32


class PrecisionExhaustedError(ArithmeticError):
    """All digits tracked by both operands cancelled; valuation unknown."""


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    f = 2
    while f * f <= p:
        if p % f == 0:
            return False
        f += 1
    return True


def _int_valuation(n: int, p: int) -> int:
    """Largest power of p dividing n (n != 0)."""
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


class PadicNumber:
    """An exact p-adic number with a digit-precision annotation."""

    __slots__ = ("p", "valuation", "unit", "precision")

    def __init__(self, p: int, valuation: int, digits, precision: int | None = None):
        """Build from a digit list: value = sum_i digits[i] * p**(valuation+i).

        The first digit must be nonzero; precision defaults to len(digits).
        Use :meth:`zero` for the zero element and :meth:`from_integer` /
        :meth:`from_unit` for other construction paths.
        """
        if not _is_prime(int(p)):
            raise ValueError(f"p must be prime, got {p}")
        digits = [int(d) for d in digits]
        if not digits:
            raise ValueError("need at least one digit (use PadicNumber.zero for 0)")
        if any(not 0 <= d < p for d in digits):
            raise ValueError(f"digits must lie in [0, {p})")
        if digits[0] == 0:
            raise ValueError("leading digit must be nonzero")
        unit = 0
        for d in reversed(digits):
            unit = unit * int(p) + d
        self.p = int(p)
        self.valuation = int(valuation)
        self.unit = unit
        self.precision = int(precision) if precision is not None else len(digits)
        if self.precision < 1:
            raise ValueError("precision must be >= 1")

    # -- constructors ---------------------------------------------------

    @classmethod
    def _raw(cls, p: int, valuation: int, unit: int, precision: int) -> "PadicNumber":
        obj = object.__new__(cls)
        obj.p = p
        obj.valuation = valuation
        obj.unit = unit
        obj.precision = precision
        return obj

    @classmethod
    def zero(cls, p: int, precision: int = DEFAULT_PRECISION) -> "PadicNumber":
        if not _is_prime(int(p)):
            raise ValueError(f"p must be prime, got {p}")
        return cls._raw(int(p), 0, 0, int(precision))

    @classmethod
    def from_unit(cls, p: int, valuation: int, unit: int,
                  precision: int = DEFAULT_PRECISION) -> "PadicNumber":
        """Value unit * p**valuation; unit may be any nonzero integer."""
        if unit == 0:
            return cls.zero(p, precision)
        v = _int_valuation(unit, p)
        return cls._raw(int(p), int(valuation) + v, unit // p**v, int(precision))

    @classmethod
    def from_integer(cls, p: int, n: int,
                     precision: int = DEFAULT_PRECISION) -> "PadicNumber":
        return cls.from_unit(p, 0, int(n), precision)

    # -- views ------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.unit == 0

    def digits(self, count: int | None = None) -> list[int]:
        """Canonical expansion digits from the leading position."""
        if self.is_zero:
            return []
        count = self.precision if count is None else int(count)
        u = self.unit % self.p**count
        out = []
        for _ in range(count):
            u, d = divmod(u, self.p)
            out.append(d)
        return out

    def norm(self) -> float:
        """|x| = p**(-valuation); 0 for the zero element."""
        if self.is_zero:
            return 0.0
        return float(self.p) ** (-self.valuation)

    def norm_exponent(self) -> int | None:
        """m with |x| = p**m, or None for zero."""
        return None if self.is_zero else -self.valuation

    def fractional_part(self) -> float:
        """The digits at negative positions as a real in [0, 1)."""
        if self.is_zero or self.valuation >= 0:
            return 0.0
        denom = self.p ** (-self.valuation)
        return (self.unit % denom) / denom

    # -- arithmetic -------------------------------------------------------

    def _check_same_field(self, other: "PadicNumber"):
        if not isinstance(other, PadicNumber):
            raise TypeError(f"expected PadicNumber, got {type(other).__name__}")
        if self.p != other.p:
            raise ValueError(f"mixed primes: {self.p} vs {other.p}")

    def _known_modulus_exponent(self) -> int | None:
        """Digits of this value are tracked below p**e; None for exact zero."""
        if self.is_zero:
            return None
        return self.valuation + self.precision

    def __add__(self, other: "PadicNumber") -> "PadicNumber":
        self._check_same_field(other)
        # the zero element is exact, so it does not narrow the window
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        p = self.p
        v = min(self.valuation, other.valuation)
        total = (self.unit * p ** (self.valuation - v)
                 + other.unit * p ** (other.valuation - v))
        known = min(self._known_modulus_exponent(), other._known_modulus_exponent())
        if total == 0:
            return PadicNumber.zero(p, known - v)
        tv = _int_valuation(total, p)
        if v + tv >= known:
            raise PrecisionExhaustedError(
                f"all {known - v} tracked digits cancelled; "
                "the sum's valuation is indeterminate")
        return PadicNumber._raw(p, v + tv, total // p**tv, known - (v + tv))

    def __neg__(self) -> "PadicNumber":
        if self.is_zero:
            return self
        return PadicNumber._raw(self.p, self.valuation, -self.unit, self.precision)

    def __sub__(self, other: "PadicNumber") -> "PadicNumber":
        return self + (-other)

    def __mul__(self, other: "PadicNumber") -> "PadicNumber":
        self._check_same_field(other)
        prec = min(self.precision, other.precision)
        if self.is_zero or other.is_zero:
            return PadicNumber.zero(self.p, prec)
        return PadicNumber._raw(self.p, self.valuation + other.valuation,
                                self.unit * other.unit, prec)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PadicNumber):
            return NotImplemented
        if self.p != other.p:
            return False
        return (self.unit == other.unit and
                (self.is_zero or self.valuation == other.valuation))

    def __hash__(self):
        return hash((self.p, 0 if self.is_zero else self.valuation, self.unit))

    def __repr__(self):
        if self.is_zero:
            return f"PadicNumber(p={self.p}, 0)"
        shown = self.digits(min(self.precision, 8))
        ell = "..." if self.precision > 8 else ""
        return (f"PadicNumber(p={self.p}, val={self.valuation}, "
                f"digits={shown}{ell})")


def padic_add(x: PadicNumber, y: PadicNumber) -> PadicNumber:
    return x + y


def padic_mul(x: PadicNumber, y: PadicNumber) -> PadicNumber:
    return x * y


def padic_neg(x: PadicNumber) -> PadicNumber:
    return -x


def padic_norm(x: PadicNumber) -> float:
    return x.norm()


def character(x: PadicNumber) -> complex:
    """The standard additive character chi(x) = exp(2*pi*i * frac(x)).

    frac(x) collects the digits at negative positions, so chi is 1 on the
    integers Z_p and chi(x + y) = chi(x) chi(y).
    """
    frac = x.fractional_part()
    if frac == 0.0:
        return complex(1.0, 0.0)
    return cmath.exp(1j * tau * frac)
