"""Order statistics, the Hill estimator, GPD/RGPD fitting and fit diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .distributions import GpdParams, RgpdParams, rgpd_is_valid
from .exceptions import DomainError, RgpdFitError

__all__ = [
    "Sample",
    "ExceedanceSet",
    "CvmStatistic",
    "as_sample",
    "exceedances",
    "hill",
    "hill_from_excesses",
    "gpd_theta_hat",
    "rgpd_loglik",
    "rgpd_fit",
    "RgpdFit",
    "cvm",
    "mix_weight",
]


@dataclass(frozen=True, eq=False)
class Sample:
    """Observations in input order together with their ascending order statistics."""

    raw: np.ndarray
    sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        raw = np.array(self.raw, dtype=float).ravel()
        if raw.size < 2:
            raise DomainError("a sample needs at least two observations")
        if not np.all(np.isfinite(raw)):
            raise DomainError("sample contains non-finite values")
        srt = np.sort(raw, kind="stable")
        raw.flags.writeable = False
        srt.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "sorted", srt)

    @property
    def n(self):
        return self.raw.size

    def scaled(self, c):
        return Sample(self.raw * c)


def as_sample(data):
    return data if isinstance(data, Sample) else Sample(data)


@dataclass(frozen=True, eq=False)
class ExceedanceSet:
    """Threshold ``t = Y_{n-k,n}`` and the k excesses over it, ascending."""

    threshold: float
    excesses: np.ndarray

    @property
    def k(self):
        return self.excesses.size

    @property
    def relative(self):
        """Relative excesses ``Z / t``."""
        return self.excesses / self.threshold


def _check_k(n, k):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n - 1:
        raise DomainError(f"k must be an integer in [1, {n - 1}], got {k!r}")


def exceedances(s, k):
    s = as_sample(s)
    _check_k(s.n, k)
    t = float(s.sorted[s.n - k - 1])
    if not t > 0:
        raise DomainError(f"threshold must be positive, got Y_(n-k,n) = {t}")
    z = s.sorted[s.n - k :] - t
    z.flags.writeable = False
    return ExceedanceSet(t, z)


def hill(s, k):
    """Hill estimator ``k^-1 sum_{i<k} log(Y_{n-i,n} / Y_{n-k,n})``."""
    s = as_sample(s)
    _check_k(s.n, k)
    t = s.sorted[s.n - k - 1]
    if not t > 0:
        raise DomainError(f"threshold must be positive, got Y_(n-k,n) = {t}")
    return float(np.mean(np.log(s.sorted[s.n - k :] / t)))


def hill_from_excesses(z, t, axis=-1):
    """Hill estimate from excesses ``z`` over threshold ``t`` (vectorised over ``axis``)."""
    return np.mean(np.log1p(np.asarray(z) / t), axis=axis)


def gpd_theta_hat(s, k):
    """Plug-in GPD parameters ``(gamma_hat, gamma_hat * Y_{n-k,n})``."""
    s = as_sample(s)
    g = hill(s, k)
    t = float(s.sorted[s.n - k - 1])
    return GpdParams(g, g * t)


# --------------------------------------------------------------------------
# RGPD maximum likelihood


def _loglik_arrays(logx, gamma, delta, tau):
    xt = np.exp(tau * logx)
    log_g = logx + np.log1p(-delta * np.expm1(tau * logx))
    dg = (1.0 + delta) - delta * (1.0 + tau) * xt
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = -math.log(gamma) - (1.0 / gamma + 1.0) * log_g + np.log(dg)
    return float(np.sum(ll))


def rgpd_loglik(y, par):
    """Log-likelihood of relative excesses ``y`` under ``RGPD(par)``."""
    logx = np.log1p(np.asarray(y, dtype=float))
    return _loglik_arrays(logx, par.gamma_d, par.delta, par.tau)


def _delta_floor(tau):
    return max(-1.0, 1.0 / tau)


@dataclass(frozen=True)
class RgpdFit:
    params: RgpdParams
    loglik: float
    converged: bool
    starts: int


_TAU_STARTS = (-0.25, -0.5, -1.0, -2.0)
# search box for log(gamma) and for eta = log(delta - max(-1, 1/tau))
_LOG_GAMMA_BOX = (math.log(1e-3), math.log(20.0))
_ETA_BOX = (-20.0, 20.0)


def rgpd_fit(e, tau_bounds=(-10.0, -0.05), fixed_tau=None, full_output=False, maxiter=2000):
    """Maximise the RGPD likelihood of the relative excesses ``Z / t``.

    Nelder-Mead runs from the GPD plug-in (the Hill estimate with
    ``delta = 0``) for several values of tau and the best optimum is kept.
    The search works on ``(log gamma, tau, eta)`` with
    ``delta = max(-1, 1/tau) + exp(eta)``, so every visited point satisfies
    the monotonicity constraint. All three coordinates are boxed: with small
    k the likelihood can drift towards gamma -> 0, delta -> -1. With
    ``fixed_tau`` only gamma and delta are fitted.

    Returns an :class:`RgpdParams`, or an :class:`RgpdFit` when
    ``full_output`` is true. Raises :class:`RgpdFitError` (carrying the best
    point) if no start converges.
    """
    if e.k < 10:
        raise DomainError(f"RGPD fit needs at least 10 excesses, got k={e.k}")
    lo, hi = tau_bounds
    if not lo < hi < 0:
        raise DomainError(f"tau bounds must satisfy lo < hi < 0, got {tau_bounds}")
    logx = np.log1p(e.relative)
    gamma0 = float(np.mean(logx))
    if not gamma0 > 0:
        raise DomainError("relative excesses are all zero; cannot fit")

    def unpack(theta, tau=None):
        if tau is None:
            lg, tau, eta = theta
        else:
            lg, eta = theta
        tau = min(max(tau, lo), hi)
        return math.exp(lg), _delta_floor(tau) + math.exp(eta), tau

    def objective(theta, tau=None):
        with np.errstate(over="ignore"):
            try:
                gamma, delta, tau_ = unpack(theta, tau)
            except OverflowError:
                return np.inf
        if not (math.isfinite(gamma) and math.isfinite(delta)):
            return np.inf
        ll = _loglik_arrays(logx, gamma, delta, tau_)
        return -ll if math.isfinite(ll) else np.inf

    if fixed_tau is not None:
        tau_starts = (float(fixed_tau),)
        if not fixed_tau < 0:
            raise DomainError("fixed tau must be negative")
    else:
        tau_starts = tuple(min(max(t, lo), hi) for t in _TAU_STARTS)

    best = None
    any_converged = False
    for tau0 in tau_starts:
        eta0 = math.log(0.0 - _delta_floor(tau0))
        if fixed_tau is None:
            x0 = np.array([math.log(gamma0), tau0, eta0])
            res = minimize(
                objective,
                x0,
                method="Nelder-Mead",
                bounds=[_LOG_GAMMA_BOX, (lo, hi), _ETA_BOX],
                options={"maxiter": maxiter, "xatol": 1e-8, "fatol": 1e-10},
            )
            gamma, delta, tau = unpack(res.x)
        else:
            x0 = np.array([math.log(gamma0), eta0])
            res = minimize(
                objective,
                x0,
                args=(tau0,),
                method="Nelder-Mead",
                bounds=[_LOG_GAMMA_BOX, _ETA_BOX],
                options={"maxiter": maxiter, "xatol": 1e-8, "fatol": 1e-10},
            )
            gamma, delta, tau = unpack(res.x, tau0)
        any_converged |= bool(res.success)
        if not rgpd_is_valid(gamma, delta, tau):
            continue
        ll = -float(res.fun)
        if best is None or ll > best[0]:
            best = (ll, gamma, delta, tau)

    if best is None:
        raise RgpdFitError("RGPD fit produced no valid parameter set")
    params = RgpdParams(float(best[1]), float(best[2]), float(best[3]))
    if not any_converged:
        raise RgpdFitError("RGPD likelihood maximisation did not converge", params, best[0])
    if full_output:
        return RgpdFit(params, best[0], any_converged, len(tau_starts))
    return params


# --------------------------------------------------------------------------
# Goodness of fit


@dataclass(frozen=True)
class CvmStatistic:
    w2: float

    def __float__(self):
        return self.w2


def cvm(e, fitted_cdf):
    """Cramer-von Mises statistic of the excesses against ``fitted_cdf``.

    ``W^2 = sum_i [F(Z_(i)) - (2i-1)/(2k)]^2 + 1/(12k)`` with the excesses
    in ascending order.
    """
    z = np.sort(np.asarray(e.excesses if isinstance(e, ExceedanceSet) else e, dtype=float))
    k = z.size
    u = np.asarray(fitted_cdf(z), dtype=float)
    plotting = (2.0 * np.arange(1, k + 1) - 1.0) / (2.0 * k)
    return CvmStatistic(float(np.sum((u - plotting) ** 2) + 1.0 / (12.0 * k)))


def mix_weight(w2_gpd, w2_rgpd):
    """Weight on the GPD pivot: ``(1/W2_gpd) / (1/W2_gpd + 1/W2_rgpd)``.

    Computed as ``W2_rgpd / (W2_gpd + W2_rgpd)``; the branch keeps
    ``mix_weight(a, b) + mix_weight(b, a) == 1`` exact in floating point.
    """
    a, b = float(w2_gpd), float(w2_rgpd)
    if not (a > 0 and b > 0):
        raise DomainError("Cramer-von Mises statistics must be positive")
    if math.isinf(a) or math.isinf(b):
        if math.isinf(a) and math.isinf(b):
            return 0.5
        return 0.0 if math.isinf(a) else 1.0
    total = a + b
    if b >= a:
        return b / total
    return 1.0 - a / total
