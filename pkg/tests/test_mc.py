import io
import math
from fractions import Fraction

import numpy as np
import pytest

from cfldp.cf_core import default_bits, expand
from cfldp.cylinder_tail import AtomAlpha, TailQuery, exact_tail
from cfldp.mc_sampler import (
    McConfig,
    _sample_rng,
    draw_dyadic,
    dyadic_digits,
    estimate_tail,
    sample_batch,
    sample_log_qn,
    wilson_interval,
    write_mc_csv,
)
from cfldp.thermo_rate import ALPHA_MIN


def test_dyadic_digits_match_expand():
    rng = np.random.Generator(np.random.Philox(key=5))
    bits = default_bits(30)
    for _ in range(200):
        u = draw_dyadic(rng, bits)
        digits, q = dyadic_digits(u, bits, 30)
        assert tuple(digits) == expand(Fraction(u, 2**bits), 30).values


def test_forced_upper_half_gives_first_digit_one():
    bits = 128
    u = (1 << (bits - 1)) + 12345  # x in (1/2, 1)
    assert dyadic_digits(u, bits, 3)[0][0] == 1


def test_seed_determinism():
    def draws(seed):
        rng = np.random.Generator(np.random.Philox(key=seed))
        return [sample_log_qn(rng, 40) for _ in range(50)]

    assert draws(7) == draws(7)
    assert draws(7) != draws(8)
    cfg = McConfig(12, 3000, seed=3)
    assert estimate_tail(cfg, 2.5) == estimate_tail(cfg, 2.5)


def test_workers_do_not_change_result():
    cfg = McConfig(12, 4000, seed=11)
    a = estimate_tail(cfg, 2.6, workers=1)
    b = estimate_tail(cfg, 2.6, workers=3)
    assert a.hits == b.hits


def test_precision_doubling_keeps_digits():
    n, bits, same, total = 100, default_bits(100), 0, 2000
    for i in range(total):
        u1 = draw_dyadic(_sample_rng(9, i), bits)
        u2 = draw_dyadic(_sample_rng(9, i), 2 * bits)
        assert u2 >> bits == u1  # same leading bits
        same += dyadic_digits(u1, bits, n)[0] == dyadic_digits(u2, 2 * bits, n)[0]
    assert same / total >= 0.999


def test_precision_floor():
    with pytest.raises(ValueError):
        McConfig(100, 10, precision_bits=100)
    assert McConfig(100, 10).precision_bits == default_bits(100)


def test_impossible_lower_tail():
    for engine in ("dyadic", "markov"):
        est = estimate_tail(McConfig(20, 2000, engine=engine), ALPHA_MIN - 0.01, "lower")
        assert est.hits == 0 and est.degenerate
        assert est.empirical_rate is None
        assert est.upper_bound == pytest.approx(1 - 0.05 ** (1 / 2000))


def test_depth_one_atom():
    est = estimate_tail(McConfig(1, 20000, seed=2), AtomAlpha(1, 3), "upper")
    assert est.ci95[0] <= 1 / 3 <= est.ci95[1]


def test_wilson():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == 1.0


def test_markov_engine_law():
    # first digit: P(a_1 = k) = 1/(k(k+1)); second given a_1 = 1 differs from independence
    rng = np.random.Generator(np.random.Philox(key=1))
    x = sample_batch(rng, 1, 200_000)
    a1 = np.rint(np.exp(x / 2)).astype(int)
    for k in (1, 2, 5):
        p = 1 / (k * (k + 1))
        assert abs(np.mean(a1 == k) - p) < 4 * math.sqrt(p * (1 - p) / len(a1))


def test_agreement_with_exact_tails():
    # |p_hat - p| <= 4 stderr in at least 95% of cells
    cells = [
        (n, Fraction(a), side)
        for n in (4, 6, 8, 10)
        for a, side in (("1.8", "lower"), ("2.2", "lower"), ("2.0", "upper"), ("2.6", "upper"))
        if not (n == 10 and a == "2.6")
    ] + [(n, Fraction(a), "lower") for n in (12, 14) for a in ("1.4", "1.6")]
    ok = 0
    for i, (n, a, side) in enumerate(cells):
        exact = exact_tail(TailQuery(n, a, side)).value
        est = estimate_tail(McConfig(n, 200_000, seed=100 + i, engine="markov"), a, side)
        se = math.sqrt(exact * (1 - exact) / est.config.samples)
        ok += abs(est.p_hat - exact) <= 4 * max(se, 1e-12)
    assert ok >= 0.95 * len(cells)


def test_csv_row():
    est = estimate_tail(McConfig(5, 1000, seed=4), 2.0)
    buf = io.StringIO()
    write_mc_csv([est], buf)
    header, row = buf.getvalue().splitlines()
    assert header == "n,alpha,side,p_hat,stderr,ci_lo,ci_hi,hits,samples,seed,empirical_rate"
    f = row.split(",")
    assert int(f[7]) == est.hits and int(f[8]) == 1000 and int(f[9]) == 4
    assert float(f[3]) == est.hits / 1000
