"""Scalar and bivariate distribution kernels.

Lognormal marginals, the bivariate-normal CDF/survival machinery used by the
lognormal gap model, the conditional lognormal law, the Gumbel copula with its
partial derivative, and the Kendall's-tau maps for both dependence
parameterizations.

All kernels broadcast over numpy arrays and are pure functions, safe for
data-parallel evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri, owens_t

__all__ = [
    "LognormalMarginal",
    "CholeskyCovariance",
    "GumbelParam",
    "std_normal_cdf",
    "std_normal_logcdf",
    "std_normal_ppf",
    "bvn_cdf",
    "bvn_sf",
    "mln_joint_sf",
    "conditional_lognormal",
    "lognormal_logpdf",
    "lognormal_pdf",
    "lognormal_cdf",
    "lognormal_sf",
    "lognormal_ppf",
    "gumbel_cdf",
    "gumbel_partial",
    "gumbel_logpdf",
    "kendall_tau_mln",
    "kendall_tau_gumbel",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# univariate normal / lognormal
# ---------------------------------------------------------------------------

def std_normal_cdf(z):
    """Standard normal CDF, vectorized; +/-inf map to 1/0."""
    return ndtr(z)


def std_normal_logcdf(z):
    """log of the standard normal CDF, stable in the deep lower tail."""
    return log_ndtr(z)


def std_normal_ppf(q):
    """Standard normal quantile function."""
    return ndtri(q)


def lognormal_logpdf(v, mu, sigma):
    """Log-density of a lognormal with log-scale location mu and scale sigma.

    Returns -inf at v <= 0 (the density vanishes there in the limit).
    """
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    out = np.full(np.broadcast(v, mu).shape, -np.inf)
    pos = v > 0
    if np.any(pos):
        logv = np.log(np.where(pos, v, 1.0))
        with np.errstate(over="ignore"):  # z^2 overflow is a legitimate -inf
            z = (logv - mu) / sigma
            val = -logv - math.log(sigma) - _LOG_SQRT_2PI - 0.5 * z * z
        out = np.where(pos, val, -np.inf)
    return out if out.ndim else float(out)


def lognormal_pdf(v, mu, sigma):
    return np.exp(lognormal_logpdf(v, mu, sigma))


def lognormal_cdf(v, mu, sigma):
    """Lognormal CDF; 0 at v <= 0."""
    v = np.asarray(v, dtype=float)
    pos = v > 0
    z = np.where(pos, (np.log(np.where(pos, v, 1.0)) - mu) / sigma, -np.inf)
    out = ndtr(z)
    return out if out.ndim else float(out)


def lognormal_sf(v, mu, sigma):
    """Lognormal survival function; 1 at v <= 0."""
    v = np.asarray(v, dtype=float)
    pos = v > 0
    z = np.where(pos, (np.log(np.where(pos, v, 1.0)) - mu) / sigma, -np.inf)
    out = ndtr(-z)
    return out if out.ndim else float(out)


def lognormal_ppf(q, mu, sigma):
    return np.exp(mu + sigma * ndtri(q))


@dataclass(frozen=True)
class LognormalMarginal:
    """Lognormal gap-time marginal: location mu (log-hours) and scale sigma."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def logpdf(self, v):
        return lognormal_logpdf(v, self.mu, self.sigma)

    def pdf(self, v):
        return lognormal_pdf(v, self.mu, self.sigma)

    def cdf(self, v):
        return lognormal_cdf(v, self.mu, self.sigma)

    def sf(self, v):
        return lognormal_sf(v, self.mu, self.sigma)

    def ppf(self, q):
        return lognormal_ppf(q, self.mu, self.sigma)


# ---------------------------------------------------------------------------
# bivariate normal
# ---------------------------------------------------------------------------

def bvn_cdf(z1, z2, rho):
    """Bivariate standard normal CDF Pr(Z1 <= z1, Z2 <= z2) at correlation rho.

    Evaluated through Owen's T function, which is accurate to well below
    1e-10 absolute error over the whole |rho| < 1 range; infinite arguments
    reduce to the marginal CDF. Raises for |rho| >= 1 (callers handle the
    degenerate limit themselves).
    """
    rho = float(rho)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie strictly inside (-1, 1), got {rho}")
    h = np.asarray(z1, dtype=float)
    k = np.asarray(z2, dtype=float)
    if rho == 0.0:
        out = ndtr(h) * ndtr(k)
        return out if out.ndim else float(out)

    h, k = np.broadcast_arrays(h, k)
    out = np.empty(h.shape, dtype=float)

    neg_inf = np.isneginf(h) | np.isneginf(k)
    h_inf = np.isposinf(h)
    k_inf = np.isposinf(k)
    finite = ~(neg_inf | h_inf | k_inf)

    out[neg_inf] = 0.0
    out[h_inf & ~neg_inf] = ndtr(k[h_inf & ~neg_inf])
    out[k_inf & ~neg_inf & ~h_inf] = ndtr(h[k_inf & ~neg_inf & ~h_inf])

    if np.any(finite):
        hf = h[finite].copy()
        kf = k[finite].copy()
        # Owen's formula divides by h and k; nudging near-zeros costs
        # < 1e-13 absolute error, below the accuracy target.
        hf[np.abs(hf) < 1e-13] = 1e-13
        kf[np.abs(kf) < 1e-13] = 1e-13
        s = math.sqrt((1.0 - rho) * (1.0 + rho))
        ah = (kf - rho * hf) / (hf * s)
        ak = (hf - rho * kf) / (kf * s)
        val = 0.5 * (ndtr(hf) + ndtr(kf)) - owens_t(hf, ah) - owens_t(kf, ak)
        val -= np.where(hf * kf < 0.0, 0.5, 0.0)
        out[finite] = np.clip(val, 0.0, 1.0)

    return out if out.ndim else float(out)


def bvn_sf(z1, z2, rho):
    """Upper-orthant probability Pr(Z1 > z1, Z2 > z2) at correlation rho."""
    return bvn_cdf(np.negative(z1), np.negative(z2), rho)


# ---------------------------------------------------------------------------
# bivariate lognormal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CholeskyCovariance:
    """Covariance of the log-gap vector through its Cholesky factor.

    The factor is lower triangular with rows (sigma1, 0) and (eta, sigma2),
    so the implied covariance sigma_matrix = C C' is positive definite for
    any sigma1, sigma2 > 0 and real eta.
    """

    sigma1: float
    eta: float
    sigma2: float

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("sigma1 and sigma2 must be positive")

    @property
    def sigma_matrix(self) -> np.ndarray:
        s1, e, s2 = self.sigma1, self.eta, self.sigma2
        return np.array([[s1 * s1, s1 * e], [s1 * e, e * e + s2 * s2]])

    @property
    def marginal_sds(self) -> tuple[float, float]:
        return self.sigma1, math.hypot(self.eta, self.sigma2)

    @property
    def rho(self) -> float:
        return self.eta / math.hypot(self.eta, self.sigma2)


def mln_joint_sf(v, mu, chol: CholeskyCovariance):
    """Joint survival Pr(W1 > v1, W2 > v2) of a bivariate lognormal gap vector.

    v may be a pair or an (n, 2) array; mu likewise broadcasts. Zero
    components impose no constraint (the gap is almost surely positive), so
    the value continues to the marginal survival there; negative components
    raise.
    """
    v_in = np.asarray(v, dtype=float)
    scalar = v_in.ndim == 1
    v2 = np.atleast_2d(v_in)
    mu2 = np.atleast_2d(np.asarray(mu, dtype=float))
    if np.any(v2 < 0):
        raise ValueError("gap evaluation points must be nonnegative")
    sd1, sd2 = chol.marginal_sds
    z1 = np.where(v2[:, 0] > 0, (np.log(np.maximum(v2[:, 0], 1e-300)) - mu2[:, 0]) / sd1, -np.inf)
    z2 = np.where(v2[:, 1] > 0, (np.log(np.maximum(v2[:, 1], 1e-300)) - mu2[:, 1]) / sd2, -np.inf)
    out = bvn_sf(z1, z2, chol.rho)
    return float(out[0]) if scalar else out


def conditional_lognormal(mu, sigma, observed_index: int, observed_value: float):
    """Conditional normal law of one log component given the other.

    For a bivariate lognormal with log-scale mean mu and covariance sigma,
    conditioning on component ``observed_index`` (1 or 2) taking the positive
    value ``observed_value`` leaves the other log component normal with

        mu_c  = mu_other + s12 / s_obs,obs * (log y - mu_obs)
        var_c = s_other,other - s12^2 / s_obs,obs

    Returns (mu_c, var_c).
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (2, 2):
        raise ValueError("sigma must be 2x2")
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    if sigma[0, 0] <= 0 or sigma[1, 1] <= 0 or det <= 0:
        raise ValueError("sigma must be symmetric positive definite")
    if observed_index not in (1, 2):
        raise ValueError("observed_index must be 1 or 2")
    if np.any(np.asarray(observed_value) <= 0):
        raise ValueError("observed_value must be positive")
    j = observed_index - 1
    o = 1 - j
    s12 = sigma[0, 1]
    mu_c = mu[o] + s12 / sigma[j, j] * (np.log(observed_value) - mu[j])
    var_c = sigma[o, o] - s12 * s12 / sigma[j, j]
    return mu_c, var_c


# ---------------------------------------------------------------------------
# Gumbel copula
# ---------------------------------------------------------------------------

def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if alpha < 1.0:
        raise ValueError(f"Gumbel parameter must be >= 1, got {alpha}")
    return alpha


@dataclass(frozen=True)
class GumbelParam:
    """Gumbel copula dependence parameter; alpha = 1 is independence."""

    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)


def _gumbel_amix(x1, x2, alpha):
    """Stable pieces of A = x1^alpha + x2^alpha for positive x.

    Returns (log_m, log1p_s) with m = max(x1, x2) and s = (min/max)^alpha,
    so that A^(1/alpha) = m * exp(log1p_s / alpha) and
    log A = alpha * log_m + log1p_s. Stable for alpha up to ~1e6.
    """
    m = np.maximum(x1, x2)
    r = np.minimum(x1, x2) / m
    log1p_s = np.log1p(np.power(r, alpha))
    return np.log(m), log1p_s


def gumbel_cdf(u1, u2, alpha):
    """Gumbel copula C(u1, u2) = exp(-[(-ln u1)^a + (-ln u2)^a]^(1/a)).

    alpha = 1 is the independence copula; boundary arguments follow the
    copula laws C(u, 0) = 0 and C(u, 1) = u exactly.
    """
    alpha = _check_alpha(alpha)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if np.any((u1 < 0) | (u1 > 1) | (u2 < 0) | (u2 > 1)):
        raise ValueError("copula arguments must lie in [0, 1]")
    if alpha == 1.0:
        out = u1 * u2
        return out if out.ndim else float(out)

    u1, u2 = np.broadcast_arrays(u1, u2)
    out = np.zeros(u1.shape, dtype=float)
    zero = (u1 == 0) | (u2 == 0)
    both_one = (u1 == 1) & (u2 == 1)
    interior = ~zero & ~both_one
    out[both_one] = 1.0
    if np.any(interior):
        x1 = -np.log(u1[interior])
        x2 = -np.log(u2[interior])
        log_m, log1p_s = _gumbel_amix(x1, x2, alpha)
        out[interior] = np.exp(-np.exp(log_m + log1p_s / alpha))
    return out if out.ndim else float(out)


def gumbel_partial(u1, u2, alpha):
    """Partial derivative dC/du1 of the Gumbel copula.

    Equals the conditional distribution Pr(U2 <= u2 | U1 = u1), so the value
    lies in [0, 1]; alpha = 1 reduces it to u2. Arguments must be strictly
    inside (0, 1) — callers take boundary limits themselves.
    """
    alpha = _check_alpha(alpha)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if np.any((u1 <= 0) | (u1 >= 1) | (u2 <= 0) | (u2 >= 1)):
        raise ValueError("gumbel_partial needs arguments strictly inside (0, 1)")
    if alpha == 1.0:
        out = u2 * np.ones_like(u1)
        return out if out.ndim else float(out)
    out = _gumbel_partial_interior(u1, u2, alpha)
    return out if out.ndim else float(out)


def _gumbel_log_partial_interior(u1, u2, alpha):
    """log dC/du1 on interior points (mathematically <= 0)."""
    x1 = -np.log(u1)
    x2 = -np.log(u2)
    log_m, log1p_s = _gumbel_amix(x1, x2, alpha)
    log_a_pow = log_m + log1p_s / alpha          # log A^(1/alpha)
    log_a = alpha * log_m + log1p_s              # log A
    return (
        -np.exp(log_a_pow)
        + (1.0 / alpha - 1.0) * log_a
        + (alpha - 1.0) * np.log(x1)
        - np.log(u1)
    )


def _gumbel_partial_interior(u1, u2, alpha):
    """dC/du1 on interior points, computed in log space."""
    return np.exp(np.minimum(_gumbel_log_partial_interior(u1, u2, alpha), 0.0))


def _gumbel_log_partial_complement(u1, u2, alpha):
    """log(1 - dC/du1), stable where the partial approaches 1.

    The complement is the conditional survival Pr(U2 > u2 | U1 = u1); going
    through expm1 of the log-partial avoids the catastrophic cancellation of
    1 - exp(g) for g near zero. The value is floored around -41 (complement
    1e-18) so the likelihood surface stays finite and continuous.
    """
    g = np.minimum(_gumbel_log_partial_interior(u1, u2, alpha), -1e-18)
    return np.log(-np.expm1(g))


def gumbel_logpdf(u1, u2, alpha):
    """Log-density of the Gumbel copula on (0, 1)^2.

    c = C * (x1 x2)^(a-1) / (u1 u2) * A^(2/a - 2) * [1 + (a-1) A^(-1/a)]
    with x = -ln u and A = x1^a + x2^a.
    """
    alpha = _check_alpha(alpha)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if alpha == 1.0:
        out = np.zeros(np.broadcast(u1, u2).shape)
        return out if out.ndim else 0.0
    x1 = -np.log(u1)
    x2 = -np.log(u2)
    log_m, log1p_s = _gumbel_amix(x1, x2, alpha)
    log_a_pow = log_m + log1p_s / alpha
    log_a = alpha * log_m + log1p_s
    out = (
        -np.exp(log_a_pow)
        + (alpha - 1.0) * (np.log(x1) + np.log(x2))
        - np.log(u1)
        - np.log(u2)
        + (2.0 / alpha - 2.0) * log_a
        + np.log1p((alpha - 1.0) * np.exp(-log_a_pow))
    )
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Kendall's tau
# ---------------------------------------------------------------------------

def kendall_tau_mln(chol: CholeskyCovariance) -> float:
    """Kendall's tau under Gaussian log-scale dependence: (2/pi) asin(rho)."""
    return 2.0 / math.pi * math.asin(chol.rho)


def kendall_tau_gumbel(alpha: float) -> float:
    """Kendall's tau of the Gumbel copula: 1 - 1/alpha."""
    alpha = _check_alpha(alpha)
    return 1.0 - 1.0 / alpha
