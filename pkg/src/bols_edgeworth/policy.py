"""Assignment policies and the clamped-binomial arm-count law."""

from dataclasses import dataclass, field
from math import erf, sqrt

import numpy as np
from scipy.stats import binom

from .errors import InfeasibleDesignError, ParameterDomainError

KINDS = ("fixed", "eps_greedy", "threshold")


@dataclass(frozen=True)
class Policy:
    """Stage assignment strategy.

    ``fixed`` ignores the decision statistic. ``eps_greedy`` favors arm 1 with
    probability ``1 - clip`` when the statistic is non-negative and arm 2
    otherwise. ``threshold`` is the three-regime kernel
    ``h <= lower -> probs_low``, ``lower < h <= upper -> probs_mid``,
    ``h > upper -> probs_high``.
    """

    kind: str = "fixed"
    probs: tuple = (0.5, 0.5)
    clip: float = None
    lower: float = None
    upper: float = None
    probs_low: tuple = None
    probs_mid: tuple = None
    probs_high: tuple = None

    def __post_init__(self):
        if self.kind == "fixed":
            _check_probs(self.probs)
        elif self.kind == "eps_greedy":
            if self.clip is None or not 0 < self.clip < 0.5:
                raise ParameterDomainError("eps_greedy clip must lie in (0, 0.5)")
        elif self.kind == "threshold":
            if self.lower is None or self.upper is None or self.lower > self.upper:
                raise ParameterDomainError("threshold policy needs lower <= upper")
            for p in (self.probs_low, self.probs_mid, self.probs_high):
                _check_probs(p)
        else:
            raise ParameterDomainError(f"unknown policy kind {self.kind!r}")

    @classmethod
    def fixed(cls, probs):
        return cls("fixed", probs=tuple(float(p) for p in probs))

    @classmethod
    def eps_greedy(cls, clip):
        return cls("eps_greedy", probs=None, clip=float(clip))

    @classmethod
    def threshold(cls, lower, upper, probs_low, probs_mid, probs_high):
        return cls(
            "threshold",
            probs=None,
            lower=float(lower),
            upper=float(upper),
            probs_low=tuple(probs_low),
            probs_mid=tuple(probs_mid),
            probs_high=tuple(probs_high),
        )

    @classmethod
    def from_dict(cls, d):
        kind = d.get("type")
        if kind == "fixed":
            return cls.fixed(d["probs"])
        if kind == "eps_greedy":
            return cls.eps_greedy(d["clip"])
        if kind == "threshold":
            return cls.threshold(
                d["lower"], d["upper"], d["probs_low"], d["probs_mid"], d["probs_high"]
            )
        raise ParameterDomainError(f"unknown policy type {kind!r}")

    def to_dict(self):
        if self.kind == "fixed":
            return {"type": "fixed", "probs": list(self.probs)}
        if self.kind == "eps_greedy":
            return {"type": "eps_greedy", "clip": self.clip}
        return {
            "type": "threshold",
            "lower": self.lower,
            "upper": self.upper,
            "probs_low": list(self.probs_low),
            "probs_mid": list(self.probs_mid),
            "probs_high": list(self.probs_high),
        }

    def labels(self):
        """Finite list of ``(label, probs)`` the policy can select."""
        if self.kind == "fixed":
            return [("fixed", self.probs)]
        if self.kind == "eps_greedy":
            c = self.clip
            return [("arm1", (1 - c, c)), ("arm2", (c, 1 - c))]
        return [("low", self.probs_low), ("mid", self.probs_mid), ("high", self.probs_high)]

    def label_index(self, h):
        """Vectorized index into :meth:`labels` for decision statistics ``h``."""
        h = np.asarray(h, dtype=float)
        if self.kind == "fixed":
            return np.zeros(h.shape, dtype=np.int64)
        if self.kind == "eps_greedy":
            # h == 0 goes to arm 1
            return np.where(h >= 0, 0, 1).astype(np.int64)
        return np.where(h <= self.lower, 0, np.where(h <= self.upper, 1, 2)).astype(np.int64)

    def label_probabilities(self, h_sd):
        """Approximate selection probabilities when ``h ~ N(0, h_sd**2)``."""
        if self.kind == "fixed":
            return np.array([1.0])
        if self.kind == "eps_greedy":
            return np.array([0.5, 0.5])

        def cdf(t):
            return 0.5 * (1 + erf(t / (h_sd * sqrt(2))))

        lo, hi = cdf(self.lower), cdf(self.upper)
        return np.array([lo, hi - lo, 1 - hi])


def _check_probs(probs):
    if probs is None or len(probs) != 2:
        raise ParameterDomainError("two-arm probabilities required")
    if any(not 0 < p < 1 for p in probs) or abs(sum(probs) - 1) > 1e-12:
        raise ParameterDomainError(f"arm probabilities {probs} must lie in (0,1) and sum to 1")


def stage2_strategy(h, policy):
    """Map the previous stage's decision statistic to ``(label, probs)``.

    >>> stage2_strategy(1.3, Policy.eps_greedy(0.2))
    ('arm1', (0.8, 0.2))
    """
    label, probs = policy.labels()[int(policy.label_index(h))]
    return label, tuple(probs)


@dataclass(frozen=True)
class CountLaw:
    """Law of the arm-1 count on ``[n_min, n - n_min]``."""

    n: int
    support: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def mean(self):
        return float(np.dot(self.support, self.weights))

    def pruned(self, tol=1e-10):
        """Drop the smallest atoms whose total mass is at most ``tol``."""
        order = np.argsort(self.weights, kind="stable")
        cum = np.cumsum(self.weights[order])
        drop = order[cum <= tol]
        keep = np.setdiff1d(np.arange(self.support.size), drop)
        return CountLaw(self.n, self.support[keep], self.weights[keep])

    def sample(self, rng, size):
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return self.support[np.minimum(idx, self.support.size - 1)]


def clamped_binomial(n, p, n_min):
    """Binomial(n, p) arm-1 count with tail mass folded onto the floor.

    Mass below ``n_min`` is moved to ``n_min`` and mass above ``n - n_min``
    to ``n - n_min``; total mass is preserved exactly.
    """
    n, n_min = int(n), int(n_min)
    if n_min < 1:
        raise ParameterDomainError("n_min must be >= 1")
    if n < 2 * n_min or n < 2:
        raise InfeasibleDesignError(f"batch size {n} cannot give each arm {n_min} subjects")
    if not 0 < p < 1:
        raise ParameterDomainError("assignment probability must lie in (0, 1)")
    lo, hi = n_min, n - n_min
    support = np.arange(lo, hi + 1)
    if lo == hi:
        return CountLaw(n, support, np.ones(1))
    w = binom.pmf(support, n, p)
    w[0] = binom.cdf(lo, n, p)
    w[-1] = binom.sf(hi - 1, n, p)
    w = w / w.sum()
    return CountLaw(n, support, w)
