"""Distribution functions and samplers.

Covers the generalized Pareto distribution (GPD), the refined GPD (RGPD)
used for second-order corrections, the cdf of ``U + e`` with ``U`` uniform
on (0, 1) and ``e`` Laplace noise, and the data-generating families of the
simulation studies (Pareto, Frechet, Hall-Welsh, Student t).

The Laplace noise is parameterised by its *rate* ``b``: the density is
``(b/2) exp(-b|x|)`` and the variance ``2/b**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .exceptions import DomainError, InvalidRgpdParams, NumericError

__all__ = [
    "GpdParams",
    "RgpdParams",
    "NoiseRate",
    "Uniform",
    "DistributionSpec",
    "gpd_cdf",
    "gpd_sf",
    "gpd_quantile",
    "gpd_quantile_from_sf",
    "rgpd_cdf",
    "rgpd_sf",
    "rgpd_quantile",
    "rgpd_quantile_from_sf",
    "noise_shift_cdf",
    "noise_shift_sf",
    "noise_shift_quantile",
    "sample",
    "true_tail_params",
    "hall_welsh_invert",
]

# Smallest survival probability handed to a quantile function; equivalent
# to clamping a cdf value at 1 - ulp(1).
SF_FLOOR = 2.0**-53


@dataclass(frozen=True)
class GpdParams:
    """GPD shape ``gamma`` and scale ``beta``."""

    gamma: float
    beta: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise DomainError(f"GPD shape must be positive, got {self.gamma}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"GPD scale must be positive, got {self.beta}")


def _rgpd_bracket_m1(y, delta, tau):
    """(1+y)(1 + delta - delta (1+y)^tau) - 1, free of cancellation near y = 0."""
    return (1.0 + delta) * y - delta * np.expm1((1.0 + tau) * np.log1p(y))


_SCAN_GRID = np.logspace(-8, 8, 400)


def rgpd_is_valid(gamma_d, delta, tau):
    """True when (gamma_d, delta, tau) gives a strictly increasing RGPD cdf."""
    if not all(math.isfinite(v) for v in (gamma_d, delta, tau)):
        return False
    if gamma_d <= 0 or tau >= 0:
        return False
    if delta <= max(-1.0, 1.0 / tau):
        return False
    with np.errstate(over="ignore", invalid="ignore"):
        gm1 = _rgpd_bracket_m1(_SCAN_GRID, delta, tau)
    return bool(np.all(gm1 > 0) and np.all(np.diff(gm1) > 0))


@dataclass(frozen=True)
class RgpdParams:
    """RGPD shape ``gamma_d``, perturbation coefficient ``delta`` and exponent ``tau``."""

    gamma_d: float
    delta: float
    tau: float

    def __post_init__(self):
        if not rgpd_is_valid(self.gamma_d, self.delta, self.tau):
            raise InvalidRgpdParams(
                f"invalid RGPD parameters gamma_d={self.gamma_d}, "
                f"delta={self.delta}, tau={self.tau}"
            )

    @classmethod
    def from_gpd(cls, gamma, beta):
        """The RGPD member equal to GPD(gamma, beta): tau = -1, delta = gamma/beta - 1."""
        return cls(gamma, gamma / beta - 1.0, -1.0)


@dataclass(frozen=True)
class NoiseRate:
    """Laplace rate ``b``; the noise has density (b/2) exp(-b|x|)."""

    b: float

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise DomainError(f"Laplace rate must be positive, got {self.b}")

    @property
    def scale(self):
        return 1.0 / self.b

    @property
    def variance(self):
        return 2.0 / self.b**2


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0


_FAMILIES = ("pareto", "frechet", "hall_welsh", "student_t")


@dataclass(frozen=True)
class DistributionSpec:
    """One of the study data-generating families and its parameter.

    ``param`` is alpha for Pareto and Frechet, gamma for Hall-Welsh and the
    degrees of freedom nu for Student t.
    """

    family: str
    param: float
    true_gamma: float = field(init=False)
    true_rho: float = field(init=False)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise DomainError(f"unsupported family {self.family!r}")
        if not (self.param > 0 and math.isfinite(self.param)):
            raise DomainError(f"{self.family} parameter must be positive")
        if self.family in ("pareto", "frechet"):
            gamma = 1.0 / self.param
            rho = -math.inf if self.family == "pareto" else -1.0
        elif self.family == "hall_welsh":
            gamma, rho = float(self.param), -0.5
        else:
            gamma, rho = 1.0 / self.param, -2.0 / self.param
        object.__setattr__(self, "true_gamma", gamma)
        object.__setattr__(self, "true_rho", rho)

    @classmethod
    def pareto(cls, alpha):
        return cls("pareto", alpha)

    @classmethod
    def frechet(cls, alpha):
        return cls("frechet", alpha)

    @classmethod
    def hall_welsh(cls, gamma):
        return cls("hall_welsh", gamma)

    @classmethod
    def student_t(cls, nu):
        return cls("student_t", nu)

    @property
    def label(self):
        return f"{self.family}({self.param:g})"

    def cdf(self, x):
        """Closed-form cdf, used by goodness-of-fit tests of the samplers."""
        x = np.asarray(x, dtype=float)
        a = self.param
        if self.family == "pareto":
            return np.where(x > 1, 1.0 - np.power(np.maximum(x, 1.0), -a), 0.0)
        if self.family == "frechet":
            with np.errstate(divide="ignore"):
                return np.where(x > 0, np.exp(-np.power(np.where(x > 0, x, 1.0), -a)), 0.0)
        if self.family == "hall_welsh":
            xs = np.maximum(x, 1.0)
            sf = np.power(xs, -1.0 / a) * (1.0 + np.power(xs, -0.5 / a)) / 2.0
            return np.where(x > 1, 1.0 - sf, 0.0)
        from scipy.special import stdtr

        return stdtr(a, x)


def true_tail_params(spec):
    """Return ``(gamma, rho)`` for a study distribution."""
    return spec.true_gamma, spec.true_rho


# --------------------------------------------------------------------------
# GPD


def _gpd_sf(y, gamma, beta):
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    if gamma == 0:
        return np.exp(-y / beta)
    return np.exp(-np.log1p(gamma * y / beta) / gamma)


def gpd_sf(y, p):
    return _gpd_sf(y, p.gamma, p.beta)


def gpd_cdf(y, p):
    """GPD cdf ``1 - (1 + gamma y / beta)^(-1/gamma)``; values below 0 map to 0."""
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    if p.gamma == 0:
        return -np.expm1(-y / p.beta)
    return -np.expm1(-np.log1p(p.gamma * y / p.beta) / p.gamma)


def gpd_quantile_from_sf(s, p):
    """GPD quantile at survival probability ``s`` in (0, 1]."""
    s = np.asarray(s, dtype=float)
    if p.gamma == 0:
        return -p.beta * np.log(s)
    return p.beta / p.gamma * np.expm1(-p.gamma * np.log(s))


def gpd_quantile(q, p):
    """GPD quantile function on [0, 1); ``q = 1`` raises (infinite quantile)."""
    q = np.asarray(q, dtype=float)
    if np.any(q == 1.0):
        raise DomainError("infinite quantile at probability 1")
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise DomainError("probability outside [0, 1)")
    if p.gamma == 0:
        return -p.beta * np.log1p(-q)
    return p.beta / p.gamma * np.expm1(-p.gamma * np.log1p(-q))


# --------------------------------------------------------------------------
# RGPD


def _rgpd_log_bracket(x, delta, tau):
    logx = np.log(x)
    return logx + np.log1p(-delta * np.expm1(tau * logx))


def rgpd_sf(y, par):
    y = np.asarray(y, dtype=float)
    x = 1.0 + np.maximum(y, 0.0)
    return np.exp(-_rgpd_log_bracket(x, par.delta, par.tau) / par.gamma_d)


def rgpd_cdf(y, par):
    """RGPD cdf ``1 - {(1+y)(1 + delta - delta (1+y)^tau)}^(-1/gamma_d)`` for y > 0, else 0."""
    y = np.asarray(y, dtype=float)
    x = 1.0 + np.maximum(y, 0.0)
    return -np.expm1(-_rgpd_log_bracket(x, par.delta, par.tau) / par.gamma_d)


def _safeguarded_newton(f, fprime, target, lo, hi, x0, xtol, ftol, maxiter):
    """Vectorised Newton iteration kept inside a shrinking bracket.

    Solves ``f(x) = target`` elementwise for increasing ``f`` with
    ``f(lo) <= target <= f(hi)``. Newton steps leaving the bracket are
    replaced by bisection. ``ftol`` is relative to ``max(1, |target|)``.
    """
    target = np.asarray(target, dtype=float)
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    x = np.clip(np.array(x0, dtype=float), lo, hi)
    fscale = ftol * np.maximum(1.0, np.abs(target))
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(maxiter):
        fx = f(x) - target
        pos = fx > 0
        hi = np.where(pos, x, hi)
        lo = np.where(pos, lo, x)
        done = (np.abs(fx) <= fscale) | (hi - lo <= xtol * np.maximum(1.0, np.abs(x)))
        if np.all(done):
            return x
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - fx / fprime(x)
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        done |= new == x
        x = np.where(done, x, new)
    if np.all(done):
        return x
    raise NumericError(
        f"root search did not converge for {int(np.sum(~done))} of {x.size} values"
    )


def rgpd_quantile_from_sf(s, par):
    """RGPD quantile at survival probability ``s`` in (0, 1].

    Solves ``log g(e^u) = -gamma_d log s`` for ``u = log(1+y)``, where g is
    the RGPD bracket. The log term lies between 0 and log(1 + delta) for
    y >= 0, which gives an exact starting bracket.
    """
    s = np.asarray(s, dtype=float)
    target = -par.gamma_d * np.log(s)
    delta, tau = par.delta, par.tau
    ld = math.log1p(delta)

    def h(u):
        return u + np.log1p(-delta * np.expm1(tau * u))

    def dh(u):
        e = np.exp(tau * u)
        return 1.0 - delta * tau * e / (1.0 + delta - delta * e)

    lo = np.maximum(target - max(0.0, ld), 0.0)
    hi = target - min(0.0, ld)
    u = _safeguarded_newton(
        h, dh, target, lo, hi, 0.5 * (lo + hi), xtol=1e-15, ftol=4e-16, maxiter=200
    )
    return np.expm1(u)


def rgpd_quantile(q, par):
    """The unique y >= 0 with ``rgpd_cdf(y) = q``, for q in [0, 1)."""
    q = np.asarray(q, dtype=float)
    if np.any(q == 1.0):
        raise DomainError("infinite quantile at probability 1")
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise DomainError("probability outside [0, 1)")
    return rgpd_quantile_from_sf(1.0 - q, par)


# --------------------------------------------------------------------------
# U + Laplace noise


def _rate(b):
    return b.b if isinstance(b, NoiseRate) else float(b)


def noise_shift_cdf(x, b):
    """cdf of ``U + e`` with ``U ~ U(0, 1)`` and ``e ~ Laplace(rate b)``."""
    b = _rate(b)
    x = np.asarray(x, dtype=float)
    c = -np.expm1(-b) / (2.0 * b)
    with np.errstate(over="ignore"):
        left = c * np.exp(b * np.minimum(x, 0.0))
        right = 1.0 - c * np.exp(-b * (np.maximum(x, 1.0) - 1.0))
        xm = np.clip(x, 0.0, 1.0)
        mid = xm + (np.exp(-b * xm) - np.exp(-b * (1.0 - xm))) / (2.0 * b)
    return np.where(x <= 0, left, np.where(x >= 1, right, mid))


def noise_shift_sf(x, b):
    """Survival function of ``U + e``; by symmetry about 1/2 it is R(1 - x)."""
    return noise_shift_cdf(1.0 - np.asarray(x, dtype=float), b)


def noise_shift_quantile(q, b):
    """Inverse of :func:`noise_shift_cdf` on (0, 1).

    Both Laplace tails invert in closed form; the middle piece uses
    safeguarded Newton iteration.
    """
    rate = _rate(b)
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)) or np.any(np.isnan(q)):
        raise DomainError("probability must lie in (0, 1)")
    c = -np.expm1(-rate) / (2.0 * rate)
    out = np.full(q.shape, np.nan)
    left, right = q <= c, q >= 1.0 - c
    out[left] = np.log(q[left] / c) / rate
    out[right] = 1.0 - np.log((1.0 - q[right]) / c) / rate
    mid = ~(left | right)
    if np.any(mid):
        out[mid] = _safeguarded_newton(
            lambda x: noise_shift_cdf(x, rate),
            lambda x: 1.0 - 0.5 * (np.exp(-rate * x) + np.exp(-rate * (1.0 - x))),
            q[mid],
            np.zeros(mid.sum()),
            np.ones(mid.sum()),
            q[mid],
            xtol=1e-15,
            ftol=1e-15,
            maxiter=200,
        )
    return out


# --------------------------------------------------------------------------
# Sampling


def hall_welsh_invert(v, tol=1e-12, maxiter=100):
    """Solve ``s^3 + s^2 - 2v = 0`` for s in (0, 1].

    ``v`` is the survival probability ``1 - F(x)`` of the Hall-Welsh law with
    ``s = x^(-1/(2 gamma))``, so the draw is ``x = s^(-2 gamma)``.
    """
    v = np.asarray(v, dtype=float)
    x0 = np.clip(np.sqrt(2.0 * v), 1e-300, 1.0)
    return _safeguarded_newton(
        lambda s: s**3 + s**2,
        lambda s: 3.0 * s**2 + 2.0 * s,
        2.0 * v,
        np.zeros_like(v),
        np.ones_like(v),
        x0,
        xtol=tol,
        ftol=0.0,
        maxiter=maxiter,
    )


Samplable = Union[DistributionSpec, GpdParams, NoiseRate, Uniform]


def _open_uniform(rng, count):
    # strictly inside (0, 1): no log(0), no 0 ** negative
    return (np.floor(rng.random(count) * 2.0**53) + 0.5) / 2.0**53


def sample(spec: Samplable, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. values from ``spec`` using ``rng``."""
    if count < 1:
        raise DomainError("count must be at least 1")
    if isinstance(spec, GpdParams):
        return gpd_quantile_from_sf(_open_uniform(rng, count), spec)
    if isinstance(spec, NoiseRate):
        return rng.laplace(0.0, spec.scale, count)
    if isinstance(spec, Uniform):
        return rng.uniform(spec.low, spec.high, count)
    if not isinstance(spec, DistributionSpec):
        raise DomainError(f"cannot sample from {type(spec).__name__}")
    a = spec.param
    if spec.family == "pareto":
        return np.power(_open_uniform(rng, count), -1.0 / a)
    if spec.family == "frechet":
        return np.power(-np.log(_open_uniform(rng, count)), -1.0 / a)
    if spec.family == "hall_welsh":
        s = hall_welsh_invert(_open_uniform(rng, count))
        return np.power(s, -2.0 * a)
    return rng.standard_t(a, count)
