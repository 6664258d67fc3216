"""Exact continued-fraction arithmetic for the regular (Gauss) expansion.

Real numbers are carried as closed intervals with exact rational endpoints.
A digit is emitted only when the whole interval lies in one branch of the
Gauss map, so every digit returned by :func:`expand` is certified. Exact
rationals are the degenerate case ``lo == hi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence, Union

import mpmath

__all__ = [
    "PrecisionError",
    "DomainError",
    "Interval",
    "Digits",
    "Convergent",
    "Cylinder",
    "Orbit",
    "default_bits",
    "golden",
    "sqrt2m1",
    "parse_real",
    "expand",
    "convergents",
    "cylinder",
    "gauss_step",
    "orbit",
    "log_qn",
    "log_qn_digits",
    "deriv_ratio",
    "fold",
]


class PrecisionError(ArithmeticError):
    """The working precision cannot certify the next digit."""


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x) -> "Interval":
        x = Fraction(x)
        return cls(x, x)

    @classmethod
    def from_mpf(cls, x: mpmath.mpf, prec: int | None = None) -> "Interval":
        """Enclose an mpf by its value plus or minus one unit in the last place."""
        prec = prec or mpmath.mp.prec
        m, e = mpmath.mpf(x).man_exp
        mid = Fraction(int(m)) * Fraction(2) ** e
        ulp = Fraction(2) ** (e + max(int(m).bit_length(), 1) - prec)
        return cls(mid - ulp, mid + ulp)

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi


Real = Union[Interval, Fraction, int, float, mpmath.mpf]


@dataclass(frozen=True)
class Digits:
    """Partial quotients ``a_1..a_n``.

    ``finite`` is set when the input was rational and its expansion ended
    before the requested depth; ``values`` then holds the whole expansion.
    """

    values: tuple[int, ...]
    finite: bool = False

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("Digits needs at least one partial quotient")
        if any(int(a) != a or a < 1 for a in self.values):
            raise ValueError(f"partial quotients must be positive integers: {self.values}")
        object.__setattr__(self, "values", tuple(int(a) for a in self.values))

    @property
    def n(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]


def _as_digits(d) -> Digits:
    return d if isinstance(d, Digits) else Digits(tuple(d))


@dataclass(frozen=True)
class Convergent:
    p: int
    q: int
    k: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)


@dataclass(frozen=True)
class Cylinder:
    digits: Digits
    left: Fraction
    right: Fraction
    measure: Fraction
    q: int
    q_prev: int

    def __contains__(self, x) -> bool:
        return self.left < Fraction(x) < self.right


@dataclass(frozen=True)
class Orbit:
    x0: Interval
    points: tuple[mpmath.mpf, ...]
    log_deriv: mpmath.mpf


def default_bits(n: int) -> int:
    # about 3.42 bits are consumed per digit on average
    return 64 + 4 * n


def golden(bits: int) -> Interval:
    """Enclosure of (sqrt(5) - 1)/2 of width ``2**-bits``."""
    s = math.isqrt(5 << (2 * bits))
    one = 1 << bits
    den = 2 * one
    return Interval(Fraction(s - one, den), Fraction(s + 1 - one, den))


def sqrt2m1(bits: int) -> Interval:
    """Enclosure of sqrt(2) - 1 of width ``2**-bits``."""
    s = math.isqrt(2 << (2 * bits))
    one = 1 << bits
    return Interval(Fraction(s - one, one), Fraction(s + 1 - one, one))


_NAMED = {"golden": golden, "sqrt2m1": sqrt2m1}


def parse_real(text: str, bits: int = 256) -> Interval:
    """Parse ``"p/q"``, a decimal string (taken exactly) or a named constant."""
    text = text.strip()
    if text in _NAMED:
        return _NAMED[text](bits)
    try:
        return Interval.point(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse real number {text!r}") from exc


def _to_interval(x: Real) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, mpmath.mpf):
        return Interval.from_mpf(x)
    if isinstance(x, str):
        return parse_real(x)
    if isinstance(x, (Rational, float)):
        # floats are taken as the exact dyadic rational they store
        return Interval.point(Fraction(x))
    raise TypeError(f"unsupported real type {type(x).__name__}")


def _step_interval(x: Interval) -> tuple[int, Interval]:
    """One Gauss step on an interval: returns the shared digit and the image."""
    if x.lo <= 0 or x.hi > 1:
        raise DomainError(f"Gauss map needs x in (0, 1], got [{x.lo}, {x.hi}]")
    inv_lo, inv_hi = 1 / x.hi, 1 / x.lo
    a = math.floor(inv_lo)
    if math.floor(inv_hi) != a:
        raise PrecisionError(
            f"interval of width {float(x.width):.3g} straddles a branch boundary"
        )
    return a, Interval(inv_lo - a, inv_hi - a)


def expand(x: Real, n: int) -> Digits:
    """First ``n`` partial quotients of ``x``.

    Rationals whose expansion ends early return the full expansion with
    ``finite=True``; the last digit is then >= 2 whenever there are two or
    more digits. Raises :class:`PrecisionError` when an interval input is too
    wide to certify ``n`` digits.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    iv = _to_interval(x)
    if iv.exact:
        return _euclid(iv.lo, n)
    if iv.lo <= 0 or iv.hi > 1:
        raise DomainError(f"expand needs x in (0, 1), got [{iv.lo}, {iv.hi}]")
    # raw numerator/denominator pairs: (q - a*p)/p stays reduced, no gcds needed
    n_lo, d_lo = iv.lo.numerator, iv.lo.denominator
    n_hi, d_hi = iv.hi.numerator, iv.hi.denominator
    out = []
    for _ in range(n):
        if n_lo == 0:
            raise PrecisionError(f"cannot certify digit {len(out) + 1}: interval touches 0")
        a = d_hi // n_hi
        if d_lo // n_lo != a:
            raise PrecisionError(
                f"cannot certify digit {len(out) + 1}: interval straddles a branch boundary"
            )
        out.append(a)
        n_lo, d_lo, n_hi, d_hi = d_hi - a * n_hi, n_hi, d_lo - a * n_lo, n_lo
    return Digits(tuple(out))


def _euclid(x: Fraction, n: int) -> Digits:
    if not 0 < x < 1:
        raise DomainError(f"expand needs x in (0, 1), got {x}")
    num, den = x.numerator, x.denominator
    out = []
    while num and len(out) < n:
        a, r = divmod(den, num)
        out.append(a)
        den, num = num, r
    return Digits(tuple(out), finite=num == 0 and len(out) < n)


def convergents(d: Sequence[int] | Digits) -> list[Convergent]:
    d = _as_digits(d)
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    out = []
    for k, a in enumerate(d, start=1):
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append(Convergent(p, q, k))
    return out


def fold(d: Sequence[int] | Digits) -> Fraction:
    """Evaluate ``[0; a_1, ..., a_n]`` from the inside out."""
    d = _as_digits(d)
    v = Fraction(0)
    for a in reversed(d.values):
        v = 1 / (a + v)
    return v


def cylinder(d: Sequence[int] | Digits) -> Cylinder:
    d = _as_digits(d)
    cs = convergents(d)
    p, q = cs[-1].p, cs[-1].q
    p_prev, q_prev = (cs[-2].p, cs[-2].q) if len(cs) > 1 else (0, 1)
    a, b = Fraction(p, q), Fraction(p + p_prev, q + q_prev)
    left, right = min(a, b), max(a, b)
    return Cylinder(d, left, right, Fraction(1, q * (q + q_prev)), q, q_prev)


def gauss_step(x: Real):
    """Gauss map ``x -> 1/x - floor(1/x)`` on (0, 1].

    The result has the same type as the input: exact for rationals, an
    enclosure for intervals, and a working-precision value for floats and
    mpfs.
    """
    if isinstance(x, Interval):
        if x.exact:
            return Interval.point(gauss_step(x.lo))
        return _step_interval(x)[1]
    if isinstance(x, (Rational, float, mpmath.mpf)):
        if not 0 < x <= 1:
            raise DomainError(f"Gauss map needs x in (0, 1], got {x}")
        if isinstance(x, Rational):
            y = 1 / Fraction(x)
            return y - math.floor(y)
        if isinstance(x, float):
            y = 1.0 / x
            return y - math.floor(y)
        y = 1 / x
        return y - mpmath.floor(y)
    raise TypeError(f"unsupported real type {type(x).__name__}")


def orbit(x: Real, n: int, prec: int | None = None) -> Orbit:
    """Orbit ``T^0 x .. T^{n-1} x`` with ``log|DT^n(x)|``.

    Points are evaluated at interval midpoints; the log-derivative uses at
    least 64 bits.
    """
    iv = _to_interval(x)
    if expand(iv, n).finite:
        raise DomainError(f"rational x has fewer than {n} digits")
    prec = max(64, prec or default_bits(n))
    points = []
    with mpmath.workprec(prec):
        total = mpmath.mpf(0)
        cur = iv
        for _ in range(n):
            m = cur.mid
            pt = mpmath.mpf(m.numerator) / m.denominator
            points.append(pt)
            total += -2 * mpmath.log(pt)
            cur = gauss_step(cur)
    return Orbit(iv, tuple(points), total)


_RATIO_LIMIT = 10_000


def log_qn_digits(d: Sequence[int] | Digits) -> float:
    """``log q_n`` from the digits without forming ``q_n``.

    Uses ``r_k = q_{k-1}/q_k = 1/(a_k + r_{k-1})`` so every ratio stays in
    (0, 1]. Above 10^4 digits the exact big integer is used instead.
    """
    d = _as_digits(d)
    if d.n > _RATIO_LIMIT:
        return math.log(convergents_last_q(d))
    r = 0.0
    logs = []
    for a in d.values:
        r = 1.0 / (a + r)
        logs.append(math.log(r))
    return -math.fsum(logs)


def convergents_last_q(d: Sequence[int] | Digits) -> int:
    q_prev, q = 0, 1
    for a in _as_digits(d):
        q_prev, q = q, a * q + q_prev
    return q


def log_qn(x: Real, n: int) -> float:
    d = expand(x, n)
    if d.finite:
        raise DomainError(f"x is rational with only {d.n} digits; q_{n} undefined")
    return log_qn_digits(d)


def deriv_ratio(x: Real, n: int) -> float:
    """``|DT^n(x)| / q_n(x)^2``."""
    orb = orbit(x, n)
    d = expand(x, n)
    return float(mpmath.exp(orb.log_deriv - 2 * mpmath.log(convergents_last_q(d))))
