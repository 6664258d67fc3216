"""Acceptance criteria, one test each.

Every test records a ``CRITERION k PASS|FAIL: ...`` line; pytest echoes them in
an "acceptance criteria" section at the end of the run. ``python
tests/test_acceptance.py`` runs them all and prints the same lines.
"""

import io
import math
import time
from fractions import Fraction

import numba
import numpy as np
import pytest

from cfldp import cli
from cfldp.cf_core import convergents, default_bits, expand, fold, golden, log_qn, orbit
from cfldp.cylinder_tail import TailQuery, enumerate_below, exact_tail, measure_below
from cfldp.mc_sampler import McConfig, estimate_tail, sample_log_qn
from cfldp.thermo_rate import (
    ALPHA_MIN,
    TWO_GAMMA,
    OperatorDiscretization,
    apply_operator,
    pressure,
    pressure_derivative,
    rate_point,
    spectrum,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover
    ACCEPTANCE_LINES = []


def record(k, ok, detail):
    line = f"CRITERION {k} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# 1 ---------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    disc = OperatorDiscretization()  # fresh: operator assembly is timed too
    h = 1.0 / (1.0 + disc.nodes)
    resid = float(np.max(np.abs(apply_operator(1.0, h, disc) - h)))
    p1 = pressure(1.0, disc).value
    elapsed = time.perf_counter() - t0
    ok = resid < 1e-12 and abs(p1) < 1e-10 and elapsed < 1.0
    return ok, f"|L_1 h - h| = {resid:.2e}, P(1) = {p1:.2e}, {elapsed:.2f} s"


# 2 ---------------------------------------------------------------------------


def criterion_2():
    target = math.pi**2 / (6 * math.log(2))
    dp = -pressure_derivative(1.0)
    rng = np.random.Generator(np.random.Philox(key=2024))
    mean = float(np.mean([sample_log_qn(rng, 500) for _ in range(10_000)]))
    ok = abs(dp - target) < 1e-6 and abs(mean - target) < 0.05
    return ok, f"-P'(1) - 2g = {dp - target:.1e}; MC mean at n=500 = {mean:.5f} (2g = {target:.5f})"


# 3 ---------------------------------------------------------------------------


def criterion_3():
    i0 = rate_point(TWO_GAMMA).I
    grid = [float(a) for a in cli.parse_grid(cli.DEFAULT_ALPHA_GRID)]
    I = np.array([r.I for r in spectrum(grid, refine=False)])
    d2 = float(np.min(I[:-2] - 2 * I[1:-1] + I[2:]))
    ip50 = rate_point(50.0).Iprime
    fig = cli._figure1_grid()
    near = min(fig, key=lambda a: abs(a - (ALPHA_MIN + 1e-3)))
    ip_near = rate_point(near).Iprime
    parts = {
        "I(2g)=0": abs(i0) < 1e-8,
        "convex": d2 >= -1e-8,
        "I'(50) in (0.45,0.5)": 0.45 < ip50 < 0.5,
        "I'<-10 near alpha_min": ip_near < -10,
    }
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    return ok, (
        f"I(2g) = {i0:.1e}, min second difference = {d2:.2e}, I'(50) = {ip50:.4f}, "
        f"I'(alpha_min+{near - ALPHA_MIN:.0e}) = {ip_near:.3f}" + (f"; failed: {', '.join(failed)}" if failed else "")
    )


# 4 ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _sweep_cylinders(qmax):
    # every digit string with q_n <= qmax, all depths; state (p', p, q', q)
    stack = np.zeros((64, 5), np.int64)  # p', p, q', q, next digit
    stack[0] = (1, 0, 0, 1, 1)
    top = 0
    count = 0
    bad = 0
    while top >= 0:
        pp, p, qp, q, a = stack[top]
        qn = a * q + qp
        if qn > qmax:
            top -= 1
            continue
        stack[top, 4] = a + 1
        pn = a * p + pp
        # endpoints pn/qn and (pn+p)/(qn+q): length D/E in lowest-term-free form
        d = abs(pn * (qn + q) - qn * (pn + p))
        e = qn * (qn + q)
        count += 1
        # 1/2 <= (D/E) qn^2 < 1, compared exactly in integers
        if not (2 * d * qn * qn >= e and d * qn * qn < e):
            bad += 1
        top += 1
        stack[top] = (p, pn, q, qn, 1)
    return count, bad


def _totient_count(qmax):
    phi = np.arange(qmax + 1)
    for i in range(2, qmax + 1):
        if phi[i] == i:
            phi[i::i] -= phi[i::i] // i
    # q = 1 only for [1]; each reduced p/q with q >= 2 has two expansions
    return 1 + 2 * int(phi[2:].sum())


def criterion_4():
    t0 = time.perf_counter()
    qmax = 10**4
    count, bad = _sweep_cylinders(qmax)
    elapsed = time.perf_counter() - t0
    # the library enumerator sees the same cylinders (checked per depth on a smaller range)
    small = 300
    lib = sum(1 for n in range(1, 14) for _ in enumerate_below(n, small + 1))
    ok = bad == 0 and count == _totient_count(qmax) and lib == _sweep_cylinders(small)[0] and elapsed < 60
    return ok, f"{count} cylinders with q_n <= 10^4, {bad} violations, count matches totient formula, {elapsed:.1f} s"


# 5 ---------------------------------------------------------------------------


def criterion_5():
    rng = np.random.default_rng(55)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        d = [int(min(1 / (1 - rng.random()), 10**6)) for _ in range(n)]

        def interior():
            tail = [int(rng.integers(1, 50)) for _ in range(int(rng.integers(0, 8)))]
            return fold(d + tail + [int(rng.integers(2, 50))])

        x, y = interior(), interior()
        diff = abs(float(orbit(x, n).log_deriv - orbit(y, n).log_deriv))
        worst = max(worst, diff)
    return worst <= 16, f"max |log|DT^n x| - log|DT^n y|| over 1000 cylinders = {worst:.4f} (bound 16)"


# 6 ---------------------------------------------------------------------------


def criterion_6():
    out = io.StringIO()
    args = cli.build_parser().parse_args(["verify-bound", "--window-only"])
    code = args.func(args, out)
    rows = [l.split(",") for l in out.getvalue().splitlines() if l and not l.startswith("#")]
    head, rows = rows[0], rows[1:]
    col = {k: i for i, k in enumerate(head)}
    certs = {}
    for r in rows:
        certs[r[col["certificate"]]] = certs.get(r[col["certificate"]], 0) + 1
    all_pass = all(r[col["pass"]] == "1" for r in rows)
    ok = code == 0 and all_pass and len(rows) > 0
    return ok, f"{len(rows)} in-window rows for n=5..18, exit {code}, certificates {dict(sorted(certs.items()))}"


# 7 ---------------------------------------------------------------------------

MC_SHARPNESS_SAMPLES = 2_000_000


def criterion_7():
    I = rate_point(3.0).I
    rates = {}
    for n in (200, 400, 800):
        est = estimate_tail(McConfig(n, MC_SHARPNESS_SAMPLES, seed=7, engine="markov"), 3.0, "upper")
        rates[n] = est.empirical_rate
    defined = all(r is not None for r in rates.values())
    ok = defined and all(I - 0.05 <= r <= I + 0.3 for r in rates.values())
    if defined:
        ex = [rates[n] - I for n in (200, 400, 800)]
        ok = ok and ex[0] >= ex[1] >= ex[2]
    shown = ", ".join(f"n={n}: {'no hits' if r is None else f'{r:.4f}'}" for n, r in rates.items())
    return ok, f"I(3) = {I:.4f}; empirical rates with {MC_SHARPNESS_SAMPLES:.0e} samples: {shown}"


# 8 ---------------------------------------------------------------------------


def _brute_below(n, Q):
    frontier = [(1, 0)]
    for _ in range(n):
        frontier = [(a * q + qp, q) for q, qp in frontier for a in range(1, (Q - 1 - qp) // q + 1)]
    return sum((Fraction(1, q * (q + qp)) for q, qp in frontier), Fraction(0)), len(frontier)


def criterion_8():
    notes = []
    # depth one, off atoms
    n1 = True
    for alpha in (Fraction(k, 7) for k in range(1, 120)):
        m = math.ceil(math.exp(float(alpha) / 2))
        if abs(math.exp(float(alpha) / 2) - round(math.exp(float(alpha) / 2))) < 1e-9:
            continue
        n1 &= exact_tail(TailQuery(1, alpha, "upper")).measure == Fraction(1, m)
    notes.append(f"n=1 closed form {'ok' if n1 else 'MISMATCH'}")
    # Monte Carlo against enumeration at n = 10
    mc_ok = True
    for alpha, side in ((Fraction("2.0"), "lower"), (Fraction("2.4"), "upper")):
        exact = exact_tail(TailQuery(10, alpha, side), budget=3 * 10**9).value
        est = estimate_tail(McConfig(10, 100_000, seed=10), alpha, side)
        z = abs(est.p_hat - exact) / est.stderr
        mc_ok &= z <= 4
        notes.append(f"n=10 {side} {float(alpha)}: exact {exact:.5f}, MC {est.p_hat:.5f} ({z:.1f} se)")
    # brute force
    bf = all(
        measure_below(n, Q).exact == _brute_below(n, Q)[0] and measure_below(n, Q).cylinders == _brute_below(n, Q)[1]
        for n in range(1, 6)
        for Q in range(2, 201)
    )
    notes.append(f"brute force n<=5, Q<=200 {'ok' if bf else 'MISMATCH'}")
    return n1 and mc_ok and bf, "; ".join(notes)


# 9 ---------------------------------------------------------------------------


def _fib(k):
    a, b = 0, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def criterion_9():
    n = 50
    g = golden(default_bits(n))
    d = expand(g, n)
    ones = set(d) == {1}
    fib_ok = [c.q for c in convergents(d)] == [_fib(k + 1) for k in range(1, n + 1)]
    val = 2 * log_qn(g, n) / n
    gap = abs(val - ALPHA_MIN)
    ok = ones and fib_ok and gap < 1e-6
    return ok, (
        f"digits all 1: {ones}, q_k = F(k+1): {fib_ok}, (2/50) log q_50 = {val:.7f}, "
        f"|. - 2 log phi| = {gap:.2e} (needs < 1e-6)"
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, detail = CRITERIA[k]()
    assert record(k, ok, detail), detail


if __name__ == "__main__":
    for k, fn in CRITERIA.items():
        record(k, *fn())
