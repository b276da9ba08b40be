"""Standardized noise families and their moments.

All families are mapped to mean 0 and variance 1 analytically, using the
exact population mean and standard deviation of the raw law.
"""

from dataclasses import dataclass
from math import comb, factorial, sqrt

import numpy as np

from .errors import ParameterDomainError

FAMILIES = ("normal", "gamma", "mixture")


@dataclass(frozen=True)
class MomentSet:
    """Raw moments ``E[e^r]`` of a standardized noise variable."""

    sigma2: float
    mu3: float
    mu4: float
    mu5: float
    mu6: float

    def as_tuple(self):
        return (self.mu3, self.mu4, self.mu5, self.mu6)


@dataclass(frozen=True)
class NoiseModel:
    """A noise family, always standardized to mean 0 and unit variance.

    Parameters
    ----------
    family : {"normal", "gamma", "mixture"}
    shape, scale : float
        Gamma shape ``k`` and scale ``theta``.  Only the shape survives
        standardization; the scale is kept so configs can mirror the raw law.
    weight, mean1, var1, mean2, var2 : float
        Two-component normal mixture ``w N(mean1, var1) + (1-w) N(mean2, var2)``.
    """

    family: str = "normal"
    shape: float = None
    scale: float = None
    weight: float = None
    mean1: float = None
    var1: float = None
    mean2: float = None
    var2: float = None
    standardize: bool = True

    def __post_init__(self):
        validate(self)

    @classmethod
    def normal(cls):
        return cls("normal")

    @classmethod
    def gamma(cls, shape, scale=1.0):
        return cls("gamma", shape=float(shape), scale=float(scale))

    @classmethod
    def mixture(cls, weight, mean1, var1, mean2, var2):
        return cls(
            "mixture",
            weight=float(weight),
            mean1=float(mean1),
            var1=float(var1),
            mean2=float(mean2),
            var2=float(var2),
        )

    @classmethod
    def from_dict(cls, d):
        fam = d.get("family")
        if fam == "normal":
            return cls.normal()
        if fam == "gamma":
            return cls.gamma(d["shape"], d.get("scale", 1.0))
        if fam == "mixture":
            return cls.mixture(d["weight"], d["mean1"], d["var1"], d["mean2"], d["var2"])
        raise ParameterDomainError(f"unknown noise family {fam!r}")

    def to_dict(self):
        if self.family == "normal":
            return {"family": "normal"}
        if self.family == "gamma":
            return {"family": "gamma", "shape": self.shape, "scale": self.scale}
        return {
            "family": "mixture",
            "weight": self.weight,
            "mean1": self.mean1,
            "var1": self.var1,
            "mean2": self.mean2,
            "var2": self.var2,
        }

    def raw_mean_var(self):
        """Mean and variance of the law before standardization."""
        if self.family == "normal":
            return 0.0, 1.0
        if self.family == "gamma":
            return self.shape * self.scale, self.shape * self.scale**2
        w = self.weight
        m = w * self.mean1 + (1 - w) * self.mean2
        second = w * (self.var1 + self.mean1**2) + (1 - w) * (self.var2 + self.mean2**2)
        return m, second - m * m


def validate(model):
    if not model.standardize:
        raise ParameterDomainError("only standardized noise models are supported")
    if model.family == "normal":
        return
    if model.family == "gamma":
        if model.shape is None or not model.shape > 0:
            raise ParameterDomainError("gamma shape must be > 0")
        if model.scale is None or not model.scale > 0:
            raise ParameterDomainError("gamma scale must be > 0")
        return
    if model.family == "mixture":
        w = model.weight
        if w is None or not 0 < w < 1:
            raise ParameterDomainError("mixture weight must lie in (0, 1)")
        for name in ("var1", "var2"):
            v = getattr(model, name)
            if v is None or not v > 0:
                raise ParameterDomainError(f"mixture {name} must be > 0")
        for name in ("mean1", "mean2"):
            if getattr(model, name) is None:
                raise ParameterDomainError(f"mixture {name} is required")
        return
    raise ParameterDomainError(f"unknown noise family {model.family!r}")


def _normal_moment(j):
    # E[Z^j] for standard normal Z
    if j % 2:
        return 0.0
    return float(factorial(j) // (2 ** (j // 2) * factorial(j // 2)))


def _cumulants_to_raw(k):
    """Raw moments 3..6 from cumulants of a mean-0, variance-1 variable."""
    k3, k4, k5, k6 = k
    m3 = k3
    m4 = k4 + 3.0
    m5 = k5 + 10.0 * k3
    m6 = k6 + 15.0 * k4 + 10.0 * k3 * k3 + 15.0
    return m3, m4, m5, m6


def standardized_moments(model):
    """Exact moments ``E[e^r]``, r = 3..6, of the standardized noise.

    >>> standardized_moments(NoiseModel.normal()).as_tuple()
    (0.0, 3.0, 0.0, 15.0)
    """
    validate(model)
    if model.family == "normal":
        return MomentSet(1.0, 0.0, 3.0, 0.0, 15.0)
    if model.family == "gamma":
        k = model.shape
        # standardized gamma: kappa_r = (r-1)! k^(1 - r/2)
        cum = [factorial(r - 1) * k ** (1 - r / 2) for r in (3, 4, 5, 6)]
        return MomentSet(1.0, *_cumulants_to_raw(cum))

    m, var = model.raw_mean_var()
    s = sqrt(var)
    out = []
    for r in (3, 4, 5, 6):
        total = 0.0
        for w, mu, v in (
            (model.weight, model.mean1, model.var1),
            (1 - model.weight, model.mean2, model.var2),
        ):
            shift = (mu - m) / s
            sd = sqrt(v) / s
            total += w * sum(
                comb(r, j) * shift ** (r - j) * sd**j * _normal_moment(j) for j in range(r + 1)
            )
        out.append(total)
    return MomentSet(1.0, *out)


def sample(model, rng, count):
    """Draw ``count`` i.i.d. standardized noise values from generator ``rng``."""
    validate(model)
    count = int(count)
    if count < 1:
        raise ParameterDomainError("count must be >= 1")
    if model.family == "normal":
        return rng.standard_normal(count)
    if model.family == "gamma":
        k = model.shape
        # standardize the unit-scale draw; theta cancels exactly
        g = rng.standard_gamma(k, count)
        return (g - k) / sqrt(k)
    m, var = model.raw_mean_var()
    s = sqrt(var)
    pick = rng.random(count) < model.weight
    z = rng.standard_normal(count)
    x = np.where(
        pick,
        model.mean1 + sqrt(model.var1) * z,
        model.mean2 + sqrt(model.var2) * z,
    )
    return (x - m) / s
