"""Monte Carlo tails of ``(2/n) log q_n`` for Lebesgue-random x.

Two engines draw the same law:

``dyadic``
    x = u / 2^B with u uniform on B bits; digits come from the Euclidean
    algorithm on (u, 2^B) and ``q_n`` is an exact integer. Each sample has
    its own Philox counter, so results do not depend on how the sample
    range is split across workers.
``markov``
    Vectorized. Under Lebesgue measure the next digit, given the ratio
    ``r = q_{k-1}/q_k`` of the current prefix, satisfies
    ``P(a >= m) = (1 + r)/(m + r)`` (ratio of cylinder lengths), so
    ``a = floor((1 + r)/U - r)`` for U uniform on (0, 1]. Used for large
    sample counts; ``q_n`` is tracked through ``log``.
"""

from __future__ import annotations

import csv
import math
from statistics import NormalDist
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .cf_core import default_bits
from .cylinder_tail import q_floor, q_threshold

__all__ = [
    "McConfig",
    "McEstimate",
    "GENERATOR",
    "draw_dyadic",
    "dyadic_digits",
    "sample_log_qn",
    "sample_batch",
    "estimate_tail",
    "wilson_interval",
    "MC_FIELDS",
    "write_mc_csv",
]

GENERATOR = "numpy.random.Philox"
RETRY_CAP = 100
_PHILOX_STRIDE = 1 << 64  # counter words per sample; far more than any draw uses


@dataclass(frozen=True)
class McConfig:
    n: int
    samples: int
    seed: int = 0
    precision_bits: int | None = None
    engine: Literal["dyadic", "markov"] = "dyadic"
    batch: int = 1_000_000

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.engine not in ("dyadic", "markov"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.precision_bits is None:
            object.__setattr__(self, "precision_bits", default_bits(self.n))
        elif self.precision_bits < default_bits(self.n):
            raise ValueError(f"precision_bits must be >= {default_bits(self.n)} for n={self.n}")


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=index * _PHILOX_STRIDE))


def draw_dyadic(rng: np.random.Generator, bits: int) -> int:
    """Uniform integer on ``[0, 2^bits)``.

    Built from 64-bit words, most significant first, so a draw at ``2B`` bits
    extends the draw at ``B`` bits from the same generator state.
    """
    words = -(-bits // 64)
    u = 0
    for w in rng.integers(0, 2**64, size=words, dtype=np.uint64, endpoint=False):
        u = (u << 64) | int(w)
    return u >> (64 * words - bits)


def dyadic_digits(u: int, bits: int, n: int) -> tuple[list[int], int]:
    """First ``n`` digits of ``u / 2^bits`` (fewer if it terminates) and ``q`` of the last."""
    num, den = u, 1 << bits
    q_prev, q = 0, 1
    digits = []
    while num and len(digits) < n:
        a, r = divmod(den, num)
        digits.append(a)
        q_prev, q = q, a * q + q_prev
        den, num = num, r
    return digits, q


def _sample_q(seed: int, index: int, n: int, bits: int) -> int:
    rng = _sample_rng(seed, index)
    for _ in range(RETRY_CAP):
        digits, q = dyadic_digits(draw_dyadic(rng, bits), bits, n)
        if len(digits) == n:
            return q
    raise RuntimeError(f"{RETRY_CAP} draws in a row had fewer than {n} digits")


def sample_log_qn(rng: np.random.Generator, n: int, precision_bits: int | None = None) -> float:
    """One draw of ``(2/n) log q_n(x)`` with x uniform dyadic on ``precision_bits`` bits."""
    bits = precision_bits or default_bits(n)
    for _ in range(RETRY_CAP):
        digits, q = dyadic_digits(draw_dyadic(rng, bits), bits, n)
        if len(digits) == n:
            return 2.0 * math.log(q) / n
    raise RuntimeError(f"{RETRY_CAP} draws in a row had fewer than {n} digits")


def sample_batch(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """``(2/n) log q_n`` for ``size`` Lebesgue-random points via the digit chain."""
    r = np.zeros(size)
    log_q = np.zeros(size)
    for _ in range(n):
        u = 1.0 - rng.random(size)  # (0, 1]
        a = np.floor((1.0 + r) / u - r)
        r = 1.0 / (a + r)
        log_q -= np.log(r)
    return 2.0 * log_q / n


def wilson_interval(hits: int, samples: int, level: float = 0.95) -> tuple[float, float]:
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = hits / samples
    den = 1 + z * z / samples
    centre = (p + z * z / (2 * samples)) / den
    half = z * math.sqrt(p * (1 - p) / samples + z * z / (4 * samples * samples)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class McEstimate:
    config: McConfig
    alpha: float
    side: str
    hits: int
    p_hat: float
    stderr: float
    ci95: tuple[float, float]
    empirical_rate: float | None
    # one-sided 95% Clopper-Pearson bound, set only when hits == 0
    upper_bound: float | None = None
    workers: int = field(default=1)

    @property
    def degenerate(self) -> bool:
        return self.hits == 0


def _dyadic_hits(cfg: McConfig, threshold: int, side: str, lo: int, hi: int) -> int:
    bits = cfg.precision_bits
    hits = 0
    for i in range(lo, hi):
        q = _sample_q(cfg.seed, i, cfg.n, bits)
        hits += q >= threshold if side == "upper" else q <= threshold
    return hits


def _dyadic_chunk(args):
    return _dyadic_hits(*args)


def estimate_tail(cfg: McConfig, alpha, side: str = "upper", *, workers: int = 1) -> McEstimate:
    """Binomial estimate of ``lambda{(2/n) log q_n >= alpha}`` (or ``<=``)."""
    if side not in ("upper", "lower"):
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    n, N = cfg.n, cfg.samples
    if cfg.engine == "dyadic":
        # integer thresholds make the event test exact
        threshold = q_threshold(n, alpha) if side == "upper" else q_floor(n, alpha)
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor

            cuts = [N * i // workers for i in range(workers + 1)]
            jobs = [(cfg, threshold, side, cuts[i], cuts[i + 1]) for i in range(workers)]
            with ProcessPoolExecutor(workers) as ex:
                hits = sum(ex.map(_dyadic_chunk, jobs))
        else:
            hits = _dyadic_hits(cfg, threshold, side, 0, N)
    else:
        a = float(alpha)
        rng = np.random.Generator(np.random.Philox(key=cfg.seed))
        hits = 0
        done = 0
        while done < N:
            size = min(cfg.batch, N - done)
            x = sample_batch(rng, n, size)
            hits += int(np.count_nonzero(x >= a if side == "upper" else x <= a))
            done += size
    p = hits / N
    stderr = math.sqrt(p * (1 - p) / N)
    rate = -math.log(p) / n if hits else None
    ub = 1.0 - 0.05 ** (1.0 / N) if hits == 0 else None
    return McEstimate(cfg, float(alpha), side, hits, p, stderr, wilson_interval(hits, N), rate, ub, workers)


MC_FIELDS = [
    "n",
    "alpha",
    "side",
    "p_hat",
    "stderr",
    "ci_lo",
    "ci_hi",
    "hits",
    "samples",
    "seed",
    "empirical_rate",
]


def mc_row(est: McEstimate) -> dict:
    return {
        "n": est.config.n,
        "alpha": repr(est.alpha),
        "side": est.side,
        "p_hat": repr(est.p_hat),
        "stderr": repr(est.stderr),
        "ci_lo": repr(est.ci95[0]),
        "ci_hi": repr(est.ci95[1]),
        "hits": est.hits,
        "samples": est.config.samples,
        "seed": est.config.seed,
        "empirical_rate": "" if est.empirical_rate is None else repr(est.empirical_rate),
    }


def write_mc_csv(estimates, fh, header_lines=()) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.DictWriter(fh, fieldnames=MC_FIELDS, lineterminator="\n")
    w.writeheader()
    for est in estimates:
        w.writerow(mc_row(est))
