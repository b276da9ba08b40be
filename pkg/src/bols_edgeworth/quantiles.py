"""Quantiles from tail functions, order statistics and the normal baseline."""

from dataclasses import dataclass
from math import ceil, floor, sqrt

import numpy as np
from scipy.special import ndtri

from .errors import BracketError, ParameterDomainError

WIDTH = 1e-4
MAX_BRACKET = 32.0
SLOPE_STEP = 0.05


@dataclass(frozen=True)
class QuantileResult:
    """Quantile estimate at level ``alpha``.

    ``stderr_or_bracket`` holds a dict with a standard error and, for
    bisection results, the final bracket.
    """

    alpha: float
    x_hat: float
    method: str
    stderr_or_bracket: dict

    @property
    def stderr(self):
        return self.stderr_or_bracket.get("stderr", float("nan"))


def normal_quantile(alpha):
    """Standard-normal inverse CDF.

    The smaller tail mass is rounded to 15 significant digits before the
    inversion so that ``alpha`` and ``1 - alpha`` map to the same tail and the
    result is exactly antisymmetric.

    >>> round(normal_quantile(0.975), 5)
    1.95996
    """
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ParameterDomainError(f"alpha={alpha} outside (0, 1)")
    if alpha == 0.5:
        return 0.0
    tail = float(f"{min(alpha, 1 - alpha):.15g}")
    x = -float(ndtri(tail))
    return x if alpha > 0.5 else -x


class _Cached:
    """Memoize a CRN tail function; bisection for several levels revisits points."""

    def __init__(self, fn):
        self.fn = fn
        self.cache = {}

    def __call__(self, x):
        x = float(x)
        if x not in self.cache:
            self.cache[x] = self.fn(x)
        return self.cache[x]


def _value(est):
    return float(getattr(est, "value", est))


def _stderr(est):
    return float(getattr(est, "stderr", 0.0))


def quantile(tail_fn, alpha, bracket=(-8.0, 8.0), width=WIDTH, slope=True):
    """Invert a monotone tail function ``x -> P[T >= x]`` at level ``alpha``.

    Finds ``x`` with ``tail_fn(x) ~ 1 - alpha`` by bisection until the bracket
    is at most ``width`` wide.  The bracket is doubled (up to ``[-32, 32]``)
    if it does not straddle the level.

    Returns
    -------
    QuantileResult
        ``method="ae"``; ``stderr_or_bracket`` carries the bracket, the tail
        standard error at ``x_hat`` and a delta-method quantile standard error.
    """
    if not 0 < alpha < 1:
        raise ParameterDomainError(f"alpha={alpha} outside (0, 1)")
    f = tail_fn if isinstance(tail_fn, _Cached) else _Cached(tail_fn)
    target = 1.0 - alpha
    lo, hi = (float(b) for b in bracket)
    while True:
        f_lo, f_hi = _value(f(lo)), _value(f(hi))
        if f_lo >= target >= f_hi:
            break
        if max(abs(lo), abs(hi)) >= MAX_BRACKET:
            raise BracketError(
                f"level {target:g} not bracketed: tail({lo:g})={f_lo:.6g}, tail({hi:g})={f_hi:.6g}",
                lo, hi, f_lo, f_hi,
            )
        lo, hi = max(2 * lo, -MAX_BRACKET), min(2 * hi, MAX_BRACKET)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if _value(f(mid)) >= target:
            lo = mid
        else:
            hi = mid
    x_hat = 0.5 * (lo + hi)
    est = f(x_hat)
    info = {"bracket": (lo, hi), "tail_stderr": _stderr(est)}
    if slope:
        dens = (_value(f(x_hat - SLOPE_STEP)) - _value(f(x_hat + SLOPE_STEP))) / (2 * SLOPE_STEP)
        info["stderr"] = _stderr(est) / dens if dens > 0 else float("inf")
    return QuantileResult(float(alpha), x_hat, "ae", info)


def quantiles(tail_fn, alphas, **kw):
    """:func:`quantile` for several levels sharing one evaluation cache."""
    f = _Cached(tail_fn)
    return [quantile(f, a, **kw) for a in alphas]


def order_statistic_quantiles(stats, alphas, z=1.959964):
    """Empirical quantiles from the order statistics of ``stats``.

    The estimate is the order statistic ``X_(ceil(alpha R))``.  Its standard
    error comes from the binomial confidence band of order statistics
    ``X_(k -/+ z sqrt(R alpha (1 - alpha)))`` divided by ``2 z``.
    """
    x = np.sort(np.asarray(stats, dtype=float))
    R = x.size
    if R == 0:
        raise ParameterDomainError("no replications")
    out = []
    for a in alphas:
        if not 0 < a < 1:
            raise ParameterDomainError(f"alpha={a} outside (0, 1)")
        k = min(max(ceil(a * R), 1), R)
        half = z * sqrt(R * a * (1 - a))
        lo = min(max(floor(k - half), 1), R)
        hi = min(max(ceil(k + half), 1), R)
        se = (x[hi - 1] - x[lo - 1]) / (2 * z)
        out.append(QuantileResult(float(a), float(x[k - 1]), "mc", {"stderr": float(se), "order": k}))
    return out


def normal_quantiles(alphas):
    return [QuantileResult(float(a), normal_quantile(a), "normal", {"stderr": 0.0}) for a in alphas]
