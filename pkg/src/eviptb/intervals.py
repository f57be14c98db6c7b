"""Confidence intervals for the extreme value index.

All pivot-based intervals invert ``T = sqrt(k) (gamma_hat - gamma) / gamma_hat``
using percentiles of simulated pivots; ``ci_an`` uses its N(0, 1) limit and
``ci_boot`` takes percentiles of bootstrap Hill estimates directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .distributions import NoiseRate, gpd_cdf, gpd_quantile_from_sf, rgpd_cdf
from .exceptions import DomainError, NumericError
from .perturbation import PivotalDraws, as_rng, perturb_scale, ptb_pivotal, rptb_pivotal
from .tail_estimators import (
    as_sample,
    cvm,
    exceedances,
    gpd_theta_hat,
    hill,
    mix_weight,
    rgpd_fit,
)

__all__ = [
    "ConfidenceInterval",
    "pivot",
    "empirical_quantile",
    "ci_pivotal",
    "ci_ptb",
    "ci_rptb",
    "ci_an",
    "ci_para",
    "ci_boot",
    "METHODS",
]


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    method: str
    k: int
    gamma_hat: float
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise NumericError(f"non-finite interval [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise NumericError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")
        if not 0 < self.level < 1:
            raise DomainError("level must lie in (0, 1)")

    @property
    def length(self):
        return self.hi - self.lo

    def covers(self, gamma):
        return self.lo <= gamma <= self.hi


def pivot(gamma_ref, gamma_hat, k):
    """``sqrt(k) (gamma_hat - gamma_ref) / gamma_hat``."""
    if np.any(np.asarray(gamma_hat) == 0):
        raise DomainError("pivot undefined for gamma_hat = 0")
    return np.sqrt(k) * (np.asarray(gamma_hat) - gamma_ref) / np.asarray(gamma_hat)


def empirical_quantile(draws, q):
    """Order-statistic quantile with linear interpolation at position ``1 + (m-1) q``."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise DomainError("empirical quantile of an empty sample")
    if np.any((np.asarray(q) < 0) | (np.asarray(q) > 1)):
        raise DomainError("quantile level outside [0, 1]")
    return np.quantile(draws, q, method="linear")


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def ci_pivotal(d, alpha=0.05, method=None, extras=None):
    """Invert simulated pivots into an interval centred on ``d.center``."""
    _check_alpha(alpha)
    q_lo, q_hi = empirical_quantile(d.draws, [alpha / 2, 1 - alpha / 2])
    root_k = math.sqrt(d.k)
    g = d.center
    lo = (1.0 - q_hi / root_k) * g
    hi = (1.0 - q_lo / root_k) * g
    return ConfidenceInterval(
        float(lo), float(hi), 1 - alpha, method or d.mechanism, d.k, g, extras or {}
    )


def ci_ptb(s, k, c1=2.5, m=1000, alpha=0.05, rng=None, privacy_split=False):
    """Perturbation interval under the GPD approximation."""
    b = perturb_scale(k, c1)
    d = ptb_pivotal(s, k, b, m, rng, privacy_split=privacy_split)
    extras = {"b": b.b, "saturated": d.diagnostics["saturated"]}
    return ci_pivotal(d, alpha, "ptb", extras)


def ci_rptb(
    s,
    k,
    c1=2.5,
    m=1000,
    alpha=0.05,
    rng=None,
    center="hill",
    gpd_standardize=False,
    fixed_tau=None,
    weight=None,
    coupled=True,
):
    """Weighted GPD/RGPD perturbation interval.

    GPD pivots use ``b1 = c1 k^-0.51`` and RGPD pivots ``b2 = 2 b1``. The
    weight on the GPD pivots is the inverse-W^2 share of the two
    Cramer-von Mises fits unless ``weight`` fixes it.

    Replicate i of both pivot sets is driven by the same rate-1 Laplace
    draws (scaled by 1/b1 and 1/b2), so the pairing in the weighted pivot is
    a coupling. ``coupled=False`` draws the two sets independently, which
    shrinks the spread of the mixture by ``sqrt(w^2 + (1-w)^2)``.
    """
    s = as_sample(s)
    rng = as_rng(rng)
    b1 = perturb_scale(k, c1)
    b2 = NoiseRate(2.0 * b1.b)
    e = exceedances(s, k)
    rpar = rgpd_fit(e, fixed_tau=fixed_tau)
    unit = rng.laplace(0.0, 1.0, (m, k)) if coupled else None
    d_gpd = ptb_pivotal(s, k, b1, m, rng, unit_noise=unit)
    d_rgpd = rptb_pivotal(
        s,
        k,
        b2,
        m,
        rng,
        rpar=rpar,
        center=center,
        gpd_standardize=gpd_standardize,
        unit_noise=unit,
    )
    theta = gpd_theta_hat(s, k)
    t = e.threshold
    w2_gpd = cvm(e, lambda z: gpd_cdf(z, theta))
    w2_rgpd = cvm(e, lambda z: rgpd_cdf(z / t, rpar))
    w = mix_weight(w2_gpd, w2_rgpd) if weight is None else float(weight)
    if not 0 <= w <= 1:
        raise DomainError("weight must lie in [0, 1]")
    mixed = PivotalDraws(w * d_gpd.draws + (1 - w) * d_rgpd.draws, d_gpd.center, k, "RGPD")
    extras = {
        "b": b1.b,
        "b2": b2.b,
        "w": w,
        "w2_gpd": w2_gpd.w2,
        "w2_rgpd": w2_rgpd.w2,
        "rpar": rpar,
        "saturated": d_gpd.diagnostics["saturated"] + d_rgpd.diagnostics["saturated"],
    }
    return ci_pivotal(mixed, alpha, "rptb", extras)


def ci_an(s, k, alpha=0.05):
    """Normal-approximation interval ``gamma_hat (1 -+ z_{1-alpha/2} / sqrt(k))``."""
    _check_alpha(alpha)
    g = hill(s, k)
    z = float(norm.ppf(1 - alpha / 2))
    half = z / math.sqrt(k)
    return ConfidenceInterval(g * (1 - half), g * (1 + half), 1 - alpha, "an", k, g)


def ci_para(s, k, m=1000, alpha=0.05, rng=None):
    """Parametric bootstrap: pivots from k i.i.d. GPD(theta_hat) excesses, no noise."""
    s = as_sample(s)
    rng = as_rng(rng)
    theta = gpd_theta_hat(s, k)
    t = float(s.sorted[s.n - k - 1])
    u = 1.0 - rng.random((m, k))
    z = gpd_quantile_from_sf(u, theta)
    gstar = np.mean(np.log1p(z / t), axis=1)
    d = PivotalDraws(pivot(theta.gamma, gstar, k), theta.gamma, k, "GPD")
    return ci_pivotal(d, alpha, "para")


def _bootstrap_hill(raw, k, n_boot, rng, max_redraws):
    n = raw.size
    out = np.empty(n_boot)
    todo = np.arange(n_boot)
    redraws = 0
    while todo.size:
        idx = rng.integers(0, n, (todo.size, n))
        part = np.partition(raw[idx], n - k - 1, axis=1)
        t = part[:, n - k - 1]
        ok = t > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            est = np.mean(np.log(part[:, n - k :] / t[:, None]), axis=1)
        out[todo[ok]] = est[ok]
        todo = todo[~ok]
        redraws += todo.size
        if redraws > max_redraws:
            raise NumericError("too many bootstrap resamples with a non-positive threshold")
    return out, redraws


def ci_boot(s, k, n_boot=1000, alpha=0.05, rng=None):
    """Full-sample bootstrap percentile interval of the Hill estimator at fixed k."""
    _check_alpha(alpha)
    s = as_sample(s)
    rng = as_rng(rng)
    g = hill(s, k)
    est, redraws = _bootstrap_hill(s.raw, k, n_boot, rng, max_redraws=n_boot)
    lo, hi = empirical_quantile(est, [alpha / 2, 1 - alpha / 2])
    return ConfidenceInterval(float(lo), float(hi), 1 - alpha, "boot", k, g, {"redraws": redraws})


METHODS = ("ptb", "rptb", "an", "para", "boot")
