"""Exact tails of the distribution of ``(2/n) log q_n`` under Lebesgue measure.

Rank-n cylinders are enumerated depth first over digit prefixes. A prefix is
dropped as soon as its cheapest completion (all remaining digits equal to 1)
already reaches the threshold, which is valid because ``q_k`` increases with
every digit. The last level is never enumerated: for a depth ``n-1`` prefix
with continuants ``(p, q)`` the children ``a = 1..m`` have total length

    sum_a 1/((aq+p)((a+1)q+p)) = m / ((q+p)((m+1)q+p))

by telescoping.

Small queries are summed in exact rational arithmetic. Large ones go
through a compiled kernel that sums in floating point; every term is
positive, so the result is returned as a rigorous rational enclosure.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterator, Literal

import mpmath
import numba
import numpy as np

__all__ = [
    "BudgetExceeded",
    "AtomAlpha",
    "TailQuery",
    "TailResult",
    "BelowSum",
    "DEFAULT_BUDGET",
    "q_threshold",
    "q_floor",
    "enumerate_below",
    "measure_below",
    "exact_tail",
    "distribution",
    "render_decimal",
    "format_rational",
    "TAIL_FIELDS",
    "write_tail_csv",
]

DEFAULT_BUDGET = 10**9
EXACT_LIMIT = 20_000
_INT64_ROOM = 2**61
_U = 2.0**-53

Side = Literal["lower", "upper"]


class BudgetExceeded(RuntimeError):
    """The enumeration visited more prefixes than the configured budget."""


@dataclass(frozen=True)
class AtomAlpha:
    """``alpha = (2/n) log m`` held exactly; the atoms of the distribution."""

    n: int
    m: int

    def __float__(self) -> float:
        return 2.0 * math.log(self.m) / self.n

    def __repr__(self) -> str:
        return f"(2/{self.n})*log({self.m})"


def _as_rational(alpha) -> Fraction:
    if isinstance(alpha, str):
        return Fraction(alpha.strip())
    if isinstance(alpha, (Rational, float)):
        return Fraction(alpha)
    raise TypeError(f"unsupported alpha type {type(alpha).__name__}")


def _floor_raw(v: tuple) -> int:
    """Floor of a raw mpmath ``(sign, man, exp, bc)`` tuple, exactly."""
    sign, man, exp, _ = v
    man = -int(man) if sign else int(man)
    return man << exp if exp >= 0 else man >> -exp


def _exp_bracket(n: int, alpha: Fraction) -> tuple[int, int]:
    """``(floor, ceil)`` of ``exp(alpha n / 2)`` with certified rounding."""
    x = alpha * n / 2
    prec = 64 + int(abs(float(x)) * 1.5)
    iv = mpmath.iv
    saved = iv.prec
    for _ in range(30):
        try:
            iv.prec = prec
            y = iv.exp(iv.mpf(x.numerator) / x.denominator)
            # raw endpoints; converting them to mpf would round at mp.prec
            lo, hi = (_floor_raw(v) for v in y._mpi_)
        finally:
            iv.prec = saved
        if lo == hi:
            # exp of a nonzero rational is irrational, so floor < value < floor + 1
            return lo, lo + 1
        prec *= 2
    raise ArithmeticError(f"could not separate exp({x}) from an integer")


def q_threshold(n: int, alpha) -> int:
    """Smallest integer ``Q`` with ``(2/n) log Q >= alpha``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(alpha, AtomAlpha):
        # Q^n0 >= m^n  <=>  (2/n) log Q >= (2/n0) log m
        target = alpha.m**n
        q = max(1, int(math.exp(n * math.log(alpha.m) / alpha.n)))
        while q**alpha.n < target:
            q += 1
        while q > 1 and (q - 1) ** alpha.n >= target:
            q -= 1
        return q
    a = _as_rational(alpha)
    if a <= 0:
        raise ValueError("alpha must be > 0")
    return _exp_bracket(n, a)[1]


def q_floor(n: int, alpha) -> int:
    """Largest integer ``m`` with ``(2/n) log m <= alpha``."""
    if isinstance(alpha, AtomAlpha):
        q = q_threshold(n, alpha)
        return q if q**alpha.n == alpha.m**n else q - 1
    a = _as_rational(alpha)
    if a <= 0:
        raise ValueError("alpha must be > 0")
    return _exp_bracket(n, a)[0]


def _fib(m: int) -> list[int]:
    f = [0, 1]
    while len(f) < m + 2:
        f.append(f[-1] + f[-2])
    return f


def enumerate_below(
    n: int,
    Q: int,
    visitor: Callable[[tuple[int, ...], int, int], None] | None = None,
    *,
    budget: int = DEFAULT_BUDGET,
) -> Iterator[tuple[tuple[int, ...], int, int]] | int:
    """All rank-n cylinders with ``q_n < Q``, depth first, each once.

    Yields ``(digits, q_{n-1}, q_n)``. With a ``visitor`` the callback is
    invoked instead and the number of cylinders is returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = _dfs(n, Q, budget)
    if visitor is None:
        return gen
    count = 0
    for item in gen:
        visitor(*item)
        count += 1
    return count


def _dfs(n: int, Q: int, budget: int):
    fib = _fib(n + 1)
    nodes = 0
    prefix: list[int] = []

    def walk(p: int, q: int):
        nonlocal nodes
        k = len(prefix)
        rem = n - k - 1  # digits still to come after the child
        a = 1
        while True:
            qn = a * q + p
            if fib[rem + 1] * qn + fib[rem] * q >= Q:
                return
            nodes += 1
            if nodes > budget:
                raise BudgetExceeded(f"more than {budget} prefixes visited (n={n}, Q={Q})")
            prefix.append(a)
            if rem == 0:
                yield tuple(prefix), q, qn
            else:
                yield from walk(q, qn)
            prefix.pop()
            a += 1

    yield from walk(0, 1)


@dataclass(frozen=True)
class BelowSum:
    """Total length of the rank-n cylinders with ``q_n < Q``."""

    lo: Fraction
    hi: Fraction
    exact: Fraction | None
    cylinders: int
    nodes: int


def _leaf_groups(n: int, Q: int, budget: int, a1_range=(1, None)):
    """Depth ``n-1`` prefixes ``(p, q)`` with at least one child below ``Q``."""
    if n == 1:
        yield 0, 1
        return
    fib = _fib(n + 1)
    a1_lo, a1_hi = a1_range
    ps = [0] * n
    qs = [1] + [0] * (n - 1)
    nxt = [a1_lo] + [1] * (n - 1)
    k = 0
    nodes = 0
    while k >= 0:
        if k == n - 1:
            yield ps[k], qs[k]
            k -= 1
            continue
        a = nxt[k]
        if k == 0 and a1_hi is not None and a >= a1_hi:
            break
        p, q = ps[k], qs[k]
        qn = a * q + p
        rem = n - k - 1
        if fib[rem + 1] * qn + fib[rem] * q >= Q:
            k -= 1
            continue
        nxt[k] = a + 1
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded(f"more than {budget} prefixes visited (n={n}, Q={Q})")
        k += 1
        ps[k], qs[k], nxt[k] = q, qn, 1


class _PairwiseSum:
    """Exact running sum that adds Fractions in a balanced tree.

    Keeps one partial sum per binary level, so memory is logarithmic in the
    number of terms while denominators stay as small as a tree sum allows.
    """

    def __init__(self):
        self._levels: list[tuple[int, Fraction]] = []

    def add(self, x: Fraction) -> None:
        size = 1
        while self._levels and self._levels[-1][0] == size:
            x += self._levels.pop()[1]
            size *= 2
        self._levels.append((size, x))

    def total(self) -> Fraction:
        acc = Fraction(0)
        for _, v in reversed(self._levels):
            acc += v
        return acc


def _tree_sum(terms: list[Fraction]) -> Fraction:
    acc = _PairwiseSum()
    for t in terms:
        acc.add(t)
    return acc.total()


def _exact_below(n: int, Q: int, budget: int) -> BelowSum:
    acc = _PairwiseSum()
    cyl = 0
    nodes = 0
    for p, q in _leaf_groups(n, Q, budget):
        nodes += 1
        m = (Q - 1 - p) // q
        if m >= 1:
            acc.add(Fraction(m, (q + p) * ((m + 1) * q + p)))
            cyl += m
    s = acc.total()
    return BelowSum(s, s, s, cyl, nodes)


@numba.njit(cache=True)
def _kernel(n, Q, budget, a1_lo, a1_hi):
    fib = np.zeros(n + 3, np.int64)
    fib[1] = 1
    for i in range(2, n + 3):
        fib[i] = fib[i - 1] + fib[i - 2]
    ps = np.zeros(n + 1, np.int64)
    qs = np.zeros(n + 1, np.int64)
    nxt = np.zeros(n + 1, np.int64)
    fQ_hi = float(Q) * (1.0 + 1e-9)
    fQ_lo = float(Q) * (1.0 - 1e-9)
    ps[0] = 0
    qs[0] = 1
    nxt[0] = a1_lo
    k = 0
    s = 0.0
    comp = 0.0
    nodes = 0
    groups = 0
    cyl = 0
    while k >= 0:
        if k == n - 1:
            p = ps[k]
            q = qs[k]
            m = (Q - 1 - p) // q
            if m >= 1:
                t = m / (float(q + p) * float((m + 1) * q + p))
                tt = s + t
                if abs(s) >= abs(t):
                    comp += (s - tt) + t
                else:
                    comp += (t - tt) + s
                s = tt
                cyl += m
                groups += 1
            k -= 1
            continue
        a = nxt[k]
        if k == 0 and a1_hi > 0 and a >= a1_hi:
            k -= 1
            continue
        p = ps[k]
        q = qs[k]
        qn = a * q + p
        rem = n - k - 1
        # cheapest completion F_{rem+1} qn + F_rem q, screened in floating
        # point; the integer form only runs near Q, where it cannot overflow
        est = fib[rem + 1] * float(qn) + fib[rem] * float(q)
        if est > fQ_hi or (est >= fQ_lo and fib[rem + 1] * qn + fib[rem] * q >= Q):
            k -= 1
            continue
        nxt[k] = a + 1
        nodes += 1
        if nodes > budget:
            return s + comp, cyl, nodes, groups, False
        k += 1
        ps[k] = q
        qs[k] = qn
        nxt[k] = 1
    return s + comp, cyl, nodes, groups, True


def _kernel_chunk(args):
    n, Q, budget, lo, hi = args
    return _kernel(n, Q, budget, lo, hi)


def _float_enclosure(s: float, groups: int) -> tuple[Fraction, Fraction]:
    # each term is m / (fl(q+p) * fl((m+1)q+p)): two conversions, a product
    # and a division, so relative error <= 4u + O(u^2). Compensated summation
    # of positive terms adds at most 2u + O(N u^2). 4x margin on top.
    eps = 4 * (6 * _U + 8 * groups * _U * _U)
    fs = Fraction(s)
    return fs * (1 - Fraction(eps)), fs * (1 + Fraction(eps))


def _split_first_digit(n: int, Q: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous ``a_1`` ranges; work concentrates at small ``a_1`` so cuts grow quadratically."""
    fib = _fib(n + 1)
    a_max = max(1, (Q - 1 - fib[n - 1]) // fib[n])
    cuts = sorted({1 + (a_max * i * i) // (workers * workers) for i in range(workers)})
    return list(zip(cuts, cuts[1:] + [0]))


def measure_below(
    n: int,
    Q: int,
    *,
    budget: int = DEFAULT_BUDGET,
    exact_limit: int = EXACT_LIMIT,
    workers: int = 1,
) -> BelowSum:
    """Lebesgue measure of ``{q_n < Q}`` over rank-n cylinders.

    Exact when at most ``exact_limit`` depth ``n-1`` prefixes contribute;
    otherwise a rational enclosure ``[lo, hi]`` of relative width ~1e-15.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    fib = _fib(n + 1)
    if Q <= fib[n + 1]:
        zero = Fraction(0)
        return BelowSum(zero, zero, zero, 0, 0)
    if n > 1 and (Q - 1 - fib[n - 1]) // fib[n] > budget:
        # already more admissible first digits than the budget allows
        raise BudgetExceeded(f"more than {budget} prefixes visited (n={n}, Q={Q})")
    if Q >= _INT64_ROOM:
        return _exact_below(n, Q, budget)
    if workers > 1:
        chunks = _split_first_digit(n, Q, workers)
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_kernel_chunk, [(n, Q, budget, lo, hi) for lo, hi in chunks]))
        # budget applies per worker
        s = math.fsum(p[0] for p in parts)
        cyl = sum(p[1] for p in parts)
        nodes = sum(p[2] for p in parts)
        groups = sum(p[3] for p in parts)
        done = all(p[4] for p in parts)
    else:
        s, cyl, nodes, groups, done = _kernel(n, Q, budget, 1, 0)
    if not done:
        raise BudgetExceeded(f"more than {budget} prefixes visited (n={n}, Q={Q})")
    if groups <= exact_limit:
        return _exact_below(n, Q, budget)
    lo, hi = _float_enclosure(s, groups)
    return BelowSum(lo, hi, None, int(cyl), int(nodes))


@dataclass(frozen=True)
class TailQuery:
    n: int
    alpha: object
    side: Side = "upper"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if float(self.alpha) <= 0:
            raise ValueError("alpha must be > 0")
        if self.side not in ("lower", "upper"):
            raise ValueError(f"side must be 'lower' or 'upper', got {self.side!r}")


@dataclass(frozen=True)
class TailResult:
    """``cylinder_count`` counts the cylinders actually enumerated, i.e. those
    with ``q_n`` below the threshold; on the upper side they are the complement."""

    query: TailQuery
    lo: Fraction
    hi: Fraction
    measure: Fraction | None
    cylinder_count: int
    q_threshold: int
    elapsed: float

    @property
    def exact(self) -> bool:
        return self.measure is not None

    @property
    def value(self) -> float:
        return float(self.measure) if self.exact else float((self.lo + self.hi) / 2)


def exact_tail(
    query: TailQuery,
    *,
    budget: int = DEFAULT_BUDGET,
    exact_limit: int = EXACT_LIMIT,
    workers: int = 1,
) -> TailResult:
    """``lambda{(2/n) log q_n <= alpha}`` or ``lambda{(2/n) log q_n >= alpha}``."""
    t0 = time.perf_counter()
    n, alpha = query.n, query.alpha
    qt = q_threshold(n, alpha)
    if query.side == "lower":
        below = measure_below(n, q_floor(n, alpha) + 1, budget=budget, exact_limit=exact_limit, workers=workers)
        lo, hi, ex = below.lo, below.hi, below.exact
    else:
        below = measure_below(n, qt, budget=budget, exact_limit=exact_limit, workers=workers)
        lo, hi = 1 - below.hi, 1 - below.lo
        ex = None if below.exact is None else 1 - below.exact
    return TailResult(query, lo, hi, ex, below.cylinders, qt, time.perf_counter() - t0)


def distribution(n: int, qmax: int, *, budget: int = DEFAULT_BUDGET) -> list[tuple[int, Fraction]]:
    """Atoms of ``q_n`` up to ``qmax``: ``[(q, lambda{q_n = q}), ...]`` ascending.

    The mass above ``qmax`` is ``1 - measure_below(n, qmax + 1)``.
    """
    acc: dict[int, list[Fraction]] = {}
    for _, q_prev, q in _dfs(n, qmax + 1, budget):
        acc.setdefault(q, []).append(Fraction(1, q * (q + q_prev)))
    return [(q, _tree_sum(acc[q])) for q in sorted(acc)]


def format_rational(x) -> str:
    """Terminating decimals are printed exactly (``2.1972``), anything else as ``p/q``."""
    if isinstance(x, AtomAlpha):
        return repr(x)
    x = Fraction(x)
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return str(x)
    places = max(twos, fives)
    if places == 0:
        return str(x.numerator)
    scaled = abs(x.numerator) * 10**places // x.denominator
    digits = str(scaled).rjust(places + 1, "0")
    sign = "-" if x < 0 else ""
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def render_decimal(x: Fraction, digits: int = 30) -> str:
    if x == 0:
        return "0"
    with mpmath.workdps(digits + 10):
        v = mpmath.mpf(x.numerator) / x.denominator
        return mpmath.nstr(v, digits, min_fixed=-5, max_fixed=5)


TAIL_FIELDS = [
    "n",
    "alpha",
    "side",
    "measure_decimal",
    "measure_num",
    "measure_den",
    "cylinder_count",
    "q_threshold",
    "seconds",
    "exact",
    "measure_lo",
    "measure_hi",
]


def tail_row(res: TailResult, timing: bool = False) -> dict:
    m = res.measure if res.exact else (res.lo + res.hi) / 2
    return {
        "n": res.query.n,
        "alpha": format_rational(res.query.alpha),
        "side": res.query.side,
        "measure_decimal": render_decimal(m),
        "measure_num": m.numerator if res.exact else "",
        "measure_den": m.denominator if res.exact else "",
        "cylinder_count": res.cylinder_count,
        "q_threshold": res.q_threshold,
        "seconds": f"{res.elapsed:.3f}" if timing else "",
        "exact": int(res.exact),
        "measure_lo": render_decimal(res.lo),
        "measure_hi": render_decimal(res.hi),
    }


def write_tail_csv(results, fh, header_lines=(), timing: bool = False) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.DictWriter(fh, fieldnames=TAIL_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(tail_row(r, timing))
