"""Pressure of ``-t log|T'|`` for the Gauss map and the associated rate function.

The weighted transfer operator

    (L_t f)(x) = sum_{k>=1} (k + x)^(-2t) f(1 / (k + x))

is discretized by Chebyshev-Lobatto collocation on [0, 1] after conjugating
by ``w_t(x) = (x + phi)^(-2t)``: the grid carries ``u = f / w_t``. This makes
the weight of the first branch the constant ``phi^(-2t)``; without it the
collocation matrix grows spurious eigenvalues larger than the Perron root
once t exceeds about 4. Branches ``k <= K`` are summed explicitly through
barycentric interpolation; the remaining branches are folded in with a
Taylor expansion at 0 against Hurwitz zeta values, exact up to
``O(K^-order)``.

``P(t) = log`` of the leading eigenvalue. The Lyapunov spectrum and the
rate function follow from the Legendre pairing ``-P'(t_a) = a``:

    b(a) = (P(t_a) + t_a a) / a,   I(a) = (1 - t_a) a - P(t_a),   I'(a) = 1 - t_a.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.special import zeta

__all__ = [
    "PHI",
    "ALPHA_MIN",
    "TWO_GAMMA",
    "T_MIN",
    "T_MAX",
    "DivergenceError",
    "ConvergenceError",
    "PositivityError",
    "OutOfDomainError",
    "OperatorDiscretization",
    "PressureResult",
    "RatePoint",
    "apply_operator",
    "pressure",
    "pressure_derivative",
    "rate_point",
    "spectrum",
    "write_spectrum_csv",
    "SPECTRUM_FIELDS",
    "spectrum_row",
    "DEFAULT_DISC",
]

# (2/n) log q_n -> 2 log((1+sqrt5)/2) along the golden-mean orbit
PHI = (1.0 + math.sqrt(5.0)) / 2.0
ALPHA_MIN = 2.0 * math.log(PHI)
TWO_GAMMA = math.pi**2 / (6.0 * math.log(2.0))
T_MIN, T_MAX = 0.51, 60.0


class DivergenceError(ValueError):
    """The operator sum diverges (t <= 1/2)."""


class ConvergenceError(RuntimeError):
    pass


class PositivityError(RuntimeError):
    """The leading eigenvector lost positivity; N or K is too small."""


class OutOfDomainError(ValueError):
    pass


@dataclass(frozen=True)
class OperatorDiscretization:
    """Collocation grid and branch truncation for ``L_t``.

    ``degree`` is the number of Chebyshev-Lobatto nodes (endpoints 0 and 1
    included), ``branch_cutoff`` the number of explicitly summed branches.
    """

    degree: int = 40
    branch_cutoff: int = 10_000
    tail_order: int = 5
    node_family: str = field(default="chebyshev-lobatto", init=False)

    def __post_init__(self):
        if self.degree < 8:
            raise ValueError("degree must be >= 8")
        if self.branch_cutoff < 50:
            raise ValueError("branch_cutoff must be >= 50")
        if self.tail_order < 0:
            raise ValueError("tail_order must be >= 0")

    def refined(self) -> "OperatorDiscretization":
        return OperatorDiscretization(self.degree + 8, 2 * self.branch_cutoff, self.tail_order)

    @cached_property
    def _cheb_nodes(self) -> np.ndarray:
        # ascending on [-1, 1]
        return -np.cos(np.pi * np.arange(self.degree) / (self.degree - 1))

    @cached_property
    def nodes(self) -> np.ndarray:
        return (self._cheb_nodes + 1.0) / 2.0

    @cached_property
    def _bary_weights(self) -> np.ndarray:
        w = (-1.0) ** np.arange(self.degree)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def interpolation_matrix(self, y: np.ndarray) -> np.ndarray:
        """Rows evaluate the nodal interpolant at the points ``y`` (barycentric form)."""
        y = np.asarray(y, dtype=float)
        diff = y[..., None] - self.nodes
        hit = diff == 0.0
        diff[hit] = 1.0
        out = self._bary_weights / diff
        out /= out.sum(axis=-1, keepdims=True)
        rows = hit.any(axis=-1)
        out[rows] = hit[rows]
        return out

    @cached_property
    def _branch_points(self) -> np.ndarray:
        k = np.arange(1, self.branch_cutoff + 1, dtype=float)
        return k[None, :] + self.nodes[:, None]

    @cached_property
    def _log_branch(self) -> np.ndarray:
        # log of (k + x) (phi + 1/(k+x)) / (phi + x), the conjugated branch weight base
        bp = self._branch_points
        return np.log((1.0 + PHI * bp) / (PHI + self.nodes[:, None]))

    @cached_property
    def _branch_interp(self) -> np.ndarray:
        # shape (N, K, N): node i, branch k, basis function j
        return self.interpolation_matrix(1.0 / self._branch_points)

    @cached_property
    def _taylor_at_zero(self) -> np.ndarray:
        """Row j maps nodal values to the j-th Taylor coefficient at x = 0."""
        n = self.degree
        coef = np.linalg.solve(cheb.chebvander(self._cheb_nodes, n - 1), np.eye(n))
        rows = [
            cheb.chebval(-1.0, cheb.chebder(coef, j, scl=2.0)) / math.factorial(j)
            for j in range(self.tail_order + 1)
        ]
        return np.array(rows)

    def weight(self, t: float, x=None) -> np.ndarray:
        """Conjugating function ``(x + phi)^(-2t)``, at the nodes by default."""
        x = self.nodes if x is None else np.asarray(x, dtype=float)
        return (x + PHI) ** (-2.0 * t)

    def matrix(self, t: float) -> np.ndarray:
        """Collocation matrix of ``w_t^-1 L_t w_t`` acting on nodal values of ``u``."""
        _check_t(t)
        e = 2.0 * t
        m = np.matmul(np.exp(-e * self._log_branch)[:, None, :], self._branch_interp)[:, 0, :]
        # tail k > K: Taylor coefficients of w_t u at 0 are a convolution
        order = self.tail_order
        w_taylor = [1.0]
        for i in range(order):
            w_taylor.append(w_taylor[-1] * (-e - i) / ((i + 1) * PHI))
        q = self.branch_cutoff + 1.0 + self.nodes
        scale = (1.0 + self.nodes / PHI) ** e
        d = self._taylor_at_zero
        for j in range(order + 1):
            z = zeta(e + j, q)
            if not np.any(z):
                break
            row = sum(w_taylor[j - l] * d[l] for l in range(j + 1))
            m += (z * scale)[:, None] * row[None, :]
        return m

    def metadata(self) -> dict:
        return {
            "degree": self.degree,
            "branch_cutoff": self.branch_cutoff,
            "tail_order": self.tail_order,
            "node_family": self.node_family,
            "conjugation": "(x+phi)^(-2t)",
        }


def _check_t(t: float) -> None:
    if not t > 0.5:
        raise DivergenceError(f"L_t needs t > 1/2 for summability, got t={t}")


DEFAULT_DISC = OperatorDiscretization()


def apply_operator(t: float, f: Sequence[float], disc: OperatorDiscretization = DEFAULT_DISC) -> np.ndarray:
    """``L_t f`` at the collocation nodes, ``f`` given by its nodal values."""
    w = disc.weight(t)
    return w * (disc.matrix(t) @ (np.asarray(f, dtype=float) / w))


@dataclass(frozen=True)
class PressureResult:
    t: float
    value: float
    eigenvalue: float
    # leading eigenfunction of L_t at the nodes, max-normalized
    eigvec: np.ndarray = field(repr=False)
    iterations: int
    refinement_delta: float | None = None


def _power_iteration(m: np.ndarray, v0=None, tol: float = 1e-14, max_iter: int = 10_000):
    v = np.ones(m.shape[0]) if v0 is None else np.array(v0, dtype=float)
    v /= np.abs(v).max()
    lam_old = math.inf
    for it in range(1, max_iter + 1):
        w = m @ v
        lam = float(v @ w) / float(v @ v)
        v = w / np.abs(w).max()
        if abs(lam - lam_old) <= tol * abs(lam):
            return lam, v, it
        lam_old = lam
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def pressure(
    t: float,
    disc: OperatorDiscretization = DEFAULT_DISC,
    *,
    refine: bool = False,
    v0=None,
    tol: float = 1e-14,
    max_iter: int = 10_000,
) -> PressureResult:
    """Log of the leading eigenvalue of the discretized ``L_t``.

    With ``refine=True`` the computation is repeated with 8 more nodes and
    the absolute change is stored as ``refinement_delta``.
    """
    lam, v, it = _power_iteration(disc.matrix(t), v0, tol, max_iter)
    if lam <= 0 or not np.all(v > 0):
        raise PositivityError(f"leading eigenvector not positive at t={t}")
    value = math.log(lam)
    h = disc.weight(t) * v
    h /= h.max()
    delta = None
    if refine:
        finer = OperatorDiscretization(disc.degree + 8, disc.branch_cutoff, disc.tail_order)
        lam2, _, _ = _power_iteration(finer.matrix(t), None, tol, max_iter)
        delta = abs(math.log(lam2) - value)
    return PressureResult(t, value, lam, h, it, delta)


def pressure_derivative(t: float, disc: OperatorDiscretization = DEFAULT_DISC, h: float = 1e-5) -> float:
    """``P'(t)`` by central differences with one Richardson step."""
    p = lambda s: pressure(s, disc).value  # noqa: E731
    d1 = (p(t + h) - p(t - h)) / (2 * h)
    d2 = (p(t + h / 2) - p(t - h / 2)) / h
    return (4 * d2 - d1) / 3


@dataclass(frozen=True)
class RatePoint:
    alpha: float
    t_alpha: float
    b: float
    I: float
    Iprime: float
    pressure: float
    iterations: int
    residual: float
    refinement_delta: float | None = None


def _second_derivative(t: float, disc, h: float = 1e-3) -> float:
    lo = max(t - h, 0.5 + h / 2)
    hi = lo + 2 * h
    mid = lo + h
    p = [pressure(s, disc).value for s in (lo, mid, hi)]
    return (p[0] - 2 * p[1] + p[2]) / h**2


def rate_point(
    alpha: float,
    disc: OperatorDiscretization = DEFAULT_DISC,
    *,
    margin: float = 1e-4,
    t_bounds: tuple[float, float] = (T_MIN, T_MAX),
    tol: float = 1e-10,
    max_iter: int = 100,
    refine: bool = False,
    t0: float | None = None,
) -> RatePoint:
    """Evaluate b, I and I' at ``alpha`` by solving ``-P'(t) = alpha``.

    Newton on ``g(t) = -P'(t) - alpha`` inside a bisection bracket. ``g`` is
    decreasing because P is convex.
    """
    if not alpha > ALPHA_MIN + margin:
        raise OutOfDomainError(f"alpha={alpha} is within {margin} of alpha_min={ALPHA_MIN}")
    g = lambda s: -pressure_derivative(s, disc) - alpha  # noqa: E731
    lo, hi = t_bounds
    t = t0 if t0 is not None else _initial_guess(alpha)
    t = min(max(t, lo), hi)
    g_lo = g_hi = None
    for it in range(1, max_iter + 1):
        gt = g(t)
        if gt > 0:
            lo, g_lo = t, gt
        else:
            hi, g_hi = t, gt
        if abs(gt) < tol or hi - lo < 1e-14:
            break
        slope = -_second_derivative(t, disc)
        step = t - gt / slope if slope < 0 else math.nan
        if not lo < step < hi:
            if g_lo is None:
                g_lo = g(lo)
                if g_lo < 0:
                    raise OutOfDomainError(f"alpha={alpha} needs t below {t_bounds[0]}")
            if g_hi is None:
                g_hi = g(hi)
                if g_hi > 0:
                    raise OutOfDomainError(f"alpha={alpha} needs t above {t_bounds[1]}")
            step = 0.5 * (lo + hi)
        t = step
    else:
        raise ConvergenceError(f"rate_point({alpha}) did not converge")
    res = pressure(t, disc, refine=refine)
    pt = res.value
    return RatePoint(
        alpha=alpha,
        t_alpha=t,
        b=(pt + t * alpha) / alpha,
        I=(1.0 - t) * alpha - pt,
        Iprime=1.0 - t,
        pressure=pt,
        iterations=it,
        residual=gt,
        refinement_delta=res.refinement_delta,
    )


def _initial_guess(alpha: float) -> float:
    if alpha > TWO_GAMMA:
        # near t = 1/2 the pressure behaves like -log(2t - 1)
        return min(1.0, 0.5 + 1.0 / alpha + 0.02)
    # the excess -P'(t) - alpha_min decays roughly like exp(-0.74 t)
    excess = max(alpha - ALPHA_MIN, 1e-12)
    return max(1.0, min(T_MAX, math.log(0.74 / excess) / 0.74))


SPECTRUM_FIELDS = [
    "alpha",
    "t_alpha",
    "b_alpha",
    "I_alpha",
    "I_prime",
    "pressure_at_t",
    "solver_iters",
    "refinement_delta",
]


def spectrum(
    alpha_grid: Iterable[float],
    disc: OperatorDiscretization = DEFAULT_DISC,
    *,
    refine: bool = True,
    margin: float = 1e-4,
) -> list[RatePoint | tuple[float, str]]:
    """Rate points along a grid; failed rows come back as ``(alpha, message)``."""
    rows: list[RatePoint | tuple[float, str]] = []
    t_prev = None
    for a in alpha_grid:
        try:
            rp = rate_point(float(a), disc, refine=refine, margin=margin, t0=t_prev)
        except (OutOfDomainError, ConvergenceError, PositivityError, DivergenceError) as exc:
            rows.append((float(a), str(exc)))
            continue
        t_prev = rp.t_alpha
        rows.append(rp)
    return rows


def spectrum_row(rp: RatePoint | tuple[float, str]) -> dict:
    if isinstance(rp, tuple):
        alpha, msg = rp
        return {"alpha": repr(alpha), "t_alpha": "failed: " + msg}
    return {
        "alpha": repr(rp.alpha),
        "t_alpha": repr(rp.t_alpha),
        "b_alpha": repr(rp.b),
        "I_alpha": repr(rp.I),
        "I_prime": repr(rp.Iprime),
        "pressure_at_t": repr(rp.pressure),
        "solver_iters": rp.iterations,
        "refinement_delta": "" if rp.refinement_delta is None else repr(rp.refinement_delta),
    }


def write_spectrum_csv(rows, fh, header_lines: Sequence[str] = ()) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.DictWriter(fh, fieldnames=SPECTRUM_FIELDS, lineterminator="\n")
    w.writeheader()
    for rp in rows:
        w.writerow(spectrum_row(rp))
