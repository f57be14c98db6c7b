"""Perturbation of threshold exceedances with Laplace noise.

An exceedance ``Z`` is standardised through a fitted cdf, Laplace noise is
added, and the sum is mapped back through the exact cdf of ``U + e`` and
the fitted quantile function. When the exceedances really follow the
fitted law the perturbed values follow it too, exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    SF_FLOOR,
    GpdParams,
    NoiseRate,
    RgpdParams,
    gpd_cdf,
    gpd_quantile_from_sf,
    noise_shift_quantile,
    noise_shift_sf,
    rgpd_cdf,
    rgpd_quantile_from_sf,
)
from .exceptions import DomainError, NumericError
from .tail_estimators import as_sample, exceedances, gpd_theta_hat, hill, rgpd_fit

log = logging.getLogger(__name__)

__all__ = [
    "PivotalDraws",
    "PerturbConfig",
    "as_rng",
    "perturb_scale",
    "rate_condition_bound",
    "ptb_exceedances",
    "ptb_pivotal",
    "rptb_exceedances",
    "rptb_pivotal",
    "dp_density_ratio",
    "dp_empirical_ratio",
]

_SF_CEIL = 1.0 - 2.0**-53


@dataclass(frozen=True, eq=False)
class PivotalDraws:
    """Perturbed pivots ``T*_1..T*_m`` and the estimate they are centred on."""

    draws: np.ndarray
    center: float
    k: int
    mechanism: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise DomainError("need at least two pivot draws")
        if not np.all(np.isfinite(d)):
            raise NumericError("non-finite pivot draw")
        object.__setattr__(self, "draws", d)

    @property
    def m(self):
        return self.draws.size


@dataclass(frozen=True)
class PerturbConfig:
    c1: float = 2.5
    m: int = 1000
    privacy_split: bool = False
    seed: int | None = None
    # RPtb variants: standardise with the GPD plug-in instead of the
    # fitted RGPD, and centre the RGPD pivots on gamma_d instead of Hill
    gpd_standardize: bool = False
    center: str = "hill"
    fixed_tau: float | None = None

    def __post_init__(self):
        if not self.c1 > 0:
            raise DomainError("c1 must be positive")
        if self.m < 2:
            raise DomainError("m must be at least 2")
        if self.center not in ("hill", "rgpd"):
            raise DomainError("center must be 'hill' or 'rgpd'")


def as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def perturb_scale(k, c1=2.5):
    """Laplace rate ``b = c1 * k^-0.51``."""
    if k < 1 or not c1 > 0:
        raise DomainError("need k >= 1 and c1 > 0")
    return NoiseRate(c1 * k**-0.51)


def rate_condition_bound(k, n, rho):
    """Upper bound ``min(k^-1 (k/n)^rho, k^-1/2)`` on b from the consistency theory.

    Diagnostic only: the c1 rule is what the procedures use.
    """
    if rho == -math.inf:
        first = math.inf
    else:
        first = (k / n) ** rho / k
    return min(first, k**-0.5)


def _noise(rng, b, shape, noise):
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != shape:
            raise DomainError(f"noise has shape {noise.shape}, expected {shape}")
        return noise
    return rng.laplace(0.0, 1.0, shape) / b.b


def _shift_to_sf(u, e, b):
    """Survival probability ``1 - R(u + e)``, clamped away from 0 and 1."""
    s = noise_shift_sf(u + e, b)
    saturated = int(np.count_nonzero((s < SF_FLOOR) | (s > _SF_CEIL)))
    return np.clip(s, SF_FLOOR, _SF_CEIL), saturated


def _ptb_gpd(z, theta, b, e):
    s, saturated = _shift_to_sf(gpd_cdf(z, theta), e, b)
    return gpd_quantile_from_sf(s, theta), saturated


def ptb_exceedances(e, theta, b, rng=None, m=None, noise=None):
    """Perturbed exceedances ``G^-1(R(G(Z_j) + e_j))`` under GPD(theta).

    Returns a length-k vector, or an ``(m, k)`` array when ``m`` is given.
    ``noise`` replaces the Laplace draws (useful for shared-noise checks).
    """
    shape = (e.k,) if m is None else (m, e.k)
    eps = _noise(as_rng(rng) if noise is None else None, b, shape, noise)
    zstar, _ = _ptb_gpd(e.excesses, theta, b, eps)
    return zstar


def _first_pass(unit_noise, m, k, b):
    if unit_noise is None:
        return []
    unit_noise = np.asarray(unit_noise, dtype=float)
    if unit_noise.shape != (m, k):
        raise DomainError(f"unit_noise has shape {unit_noise.shape}, expected {(m, k)}")
    return [unit_noise / b.b]


def _pivots(gstar, center, k):
    return math.sqrt(k) * (gstar - center) / gstar


def _replicates(generate, m, t, center, k_pivot):
    """Run ``generate(rows)`` and redraw replicates whose Hill estimate is zero."""
    zstar, saturated = generate(m)
    gstar = np.mean(np.log1p(zstar / t), axis=1)
    rejected = 0
    while True:
        bad = np.flatnonzero(gstar <= 0)
        if bad.size == 0:
            break
        rejected += bad.size
        if rejected > m:
            raise NumericError(f"more than {m} perturbed replicates had a zero Hill estimate")
        z_new, sat_new = generate(bad.size)
        saturated += sat_new
        gstar[bad] = np.mean(np.log1p(z_new / t), axis=1)
    return _pivots(gstar, center, k_pivot), gstar, saturated, rejected


def ptb_pivotal(s, k, b, m=1000, rng=None, privacy_split=False, unit_noise=None):
    """Perturbed pivots under the GPD approximation.

    ``unit_noise`` is an optional ``(m, k)`` array of rate-1 Laplace draws to
    use (scaled by ``1/b``) instead of fresh draws for the first pass. With
    ``privacy_split`` the GPD parameters are estimated from a random
    half of the exceedances and only the other half is perturbed; the
    pivots then use that half's size.
    """
    s = as_sample(s)
    rng = as_rng(rng)
    if not isinstance(b, NoiseRate):
        b = NoiseRate(b)
    gamma_hat = hill(s, k)
    e = exceedances(s, k)
    t = e.threshold
    if privacy_split:
        if k < 2:
            raise DomainError("privacy split needs k >= 2")
        perm = rng.permutation(k)
        fit_idx, rel_idx = perm[: k // 2], perm[k // 2 :]
        g_fit = float(np.mean(np.log1p(e.excesses[fit_idx] / t)))
        if not g_fit > 0:
            raise DomainError("fitting half has zero Hill estimate")
        theta = GpdParams(g_fit, g_fit * t)
        z = e.excesses[np.sort(rel_idx)]
    else:
        theta = gpd_theta_hat(s, k)
        z = e.excesses

    first = _first_pass(unit_noise, m, z.size, b)

    def generate(rows):
        eps = first.pop() if first else rng.laplace(0.0, 1.0, (rows, z.size)) / b.b
        return _ptb_gpd(z, theta, b, eps)

    draws, gstar, saturated, rejected = _replicates(generate, m, t, gamma_hat, z.size)
    return PivotalDraws(
        draws,
        gamma_hat,
        k,
        "GPD",
        {
            "theta": theta,
            "b": b.b,
            "threshold": t,
            "saturated": saturated,
            "rejected": rejected,
            "gamma_star": gstar,
            "privacy_split": privacy_split,
        },
    )


def _ptb_rgpd(z, t, rpar, b, e, theta=None):
    if theta is None:
        u = rgpd_cdf(z / t, rpar)
    else:
        u = gpd_cdf(z, theta)
    s, saturated = _shift_to_sf(u, e, b)
    return t * rgpd_quantile_from_sf(s, rpar), saturated


def rptb_exceedances(e, rpar, b, rng=None, m=None, noise=None, gpd_theta=None):
    """Perturbed exceedances under the fitted RGPD on the relative scale ``Z / t``.

    The exceedances are standardised with ``rgpd_cdf`` (or with the GPD cdf
    of ``gpd_theta`` when given), shifted by Laplace noise, mapped through
    ``R`` and inverted with the RGPD quantile function.
    """
    if not isinstance(rpar, RgpdParams):
        raise DomainError("rpar must be RgpdParams")
    shape = (e.k,) if m is None else (m, e.k)
    eps = _noise(as_rng(rng) if noise is None else None, b, shape, noise)
    zstar, _ = _ptb_rgpd(e.excesses, e.threshold, rpar, b, eps, gpd_theta)
    return zstar


def rptb_pivotal(
    s,
    k,
    b,
    m=1000,
    rng=None,
    rpar=None,
    center="hill",
    gpd_standardize=False,
    fixed_tau=None,
    unit_noise=None,
):
    """Perturbed pivots under the refined GPD.

    ``rpar`` skips the likelihood fit when already available; ``unit_noise``
    works as in :func:`ptb_pivotal`. ``center``
    selects the pivot centre: the Hill estimate (default) or the fitted
    RGPD shape.
    """
    s = as_sample(s)
    rng = as_rng(rng)
    if not isinstance(b, NoiseRate):
        b = NoiseRate(b)
    gamma_hat = hill(s, k)
    e = exceedances(s, k)
    if rpar is None:
        rpar = rgpd_fit(e, fixed_tau=fixed_tau)
    theta = gpd_theta_hat(s, k) if gpd_standardize else None
    if center == "hill":
        c = gamma_hat
    elif center == "rgpd":
        c = rpar.gamma_d
    else:
        raise DomainError("center must be 'hill' or 'rgpd'")

    first = _first_pass(unit_noise, m, k, b)

    def generate(rows):
        eps = first.pop() if first else rng.laplace(0.0, 1.0, (rows, k)) / b.b
        return _ptb_rgpd(e.excesses, e.threshold, rpar, b, eps, theta)

    draws, gstar, saturated, rejected = _replicates(generate, m, e.threshold, c, k)
    return PivotalDraws(
        draws,
        gamma_hat,
        k,
        "RGPD",
        {
            "rpar": rpar,
            "b": b.b,
            "threshold": e.threshold,
            "saturated": saturated,
            "rejected": rejected,
            "gamma_star": gstar,
            "pivot_center": c,
        },
    )


# --------------------------------------------------------------------------
# Differential-privacy audit


def dp_density_ratio(z, z_prime, theta, b, grid=None):
    """Largest ratio of the mechanism's output densities for inputs ``z`` and ``z'``.

    The output ``H(G(z) + e)`` is a fixed monotone map of ``V = G(z) + e``,
    so the Jacobians cancel and the density ratio at an output point equals
    the Laplace density ratio at the corresponding ``V``. ``grid`` holds
    output values; by default the output quantiles at 4001 levels are used.
    """
    if not isinstance(b, NoiseRate):
        b = NoiseRate(b)
    gz = float(gpd_cdf(z, theta))
    gzp = float(gpd_cdf(z_prime, theta))
    if grid is None:
        v = noise_shift_quantile(np.linspace(1e-6, 1 - 1e-6, 4001), b)
    else:
        v = noise_shift_quantile(np.clip(gpd_cdf(np.asarray(grid, float), theta), 1e-300, _SF_CEIL), b)
    log_ratio = b.b * (np.abs(v - gzp) - np.abs(v - gz))
    return float(np.exp(np.max(log_ratio)))


def dp_empirical_ratio(z, z_prime, theta, b, n_draws=10**7, rng=None, chunk=10**6):
    """Monte Carlo estimate of the worst-case probability ratio.

    Runs the mechanism ``n_draws`` times on each input and compares the
    probabilities of the output region below ``H(min(G(z), G(z')))``, where
    the analytic density ratio attains its supremum ``exp(b |G(z) - G(z')|)``.

    Returns ``(ratio, standard_error, analytic)``.
    """
    if not isinstance(b, NoiseRate):
        b = NoiseRate(b)
    rng = as_rng(rng)
    gz = float(gpd_cdf(z, theta))
    gzp = float(gpd_cdf(z_prime, theta))
    lo_g, hi_g = min(gz, gzp), max(gz, gzp)
    edge = gpd_quantile_from_sf(np.clip(noise_shift_sf(lo_g, b), SF_FLOOR, _SF_CEIL), theta)
    counts = []
    for g in (lo_g, hi_g):
        hits = 0
        left = n_draws
        while left > 0:
            size = min(chunk, left)
            eps = rng.laplace(0.0, 1.0 / b.b, size)
            s, _ = _shift_to_sf(np.full(size, g), eps, b)
            out = gpd_quantile_from_sf(s, theta)
            hits += int(np.count_nonzero(out <= edge))
            left -= size
        counts.append(hits)
    p1, p2 = counts[0] / n_draws, counts[1] / n_draws
    if counts[1] == 0:
        return math.inf, math.inf, math.exp(b.b * (hi_g - lo_g))
    ratio = p1 / p2
    se = ratio * math.sqrt((1 - p1) / counts[0] + (1 - p2) / counts[1])
    return ratio, se, math.exp(b.b * (hi_g - lo_g))

