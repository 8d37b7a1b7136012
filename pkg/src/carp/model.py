"""The two model variants for covariate-adjusted bivariate gap times.

Both variants put lognormal marginals on the per-type gap times and shift the
log-scale locations linearly in the covariates, mu(x) = mu0 + B x. They
differ in the dependence structure:

* ``MlnModel`` — the log-gap vector is bivariate normal with covariance
  Sigma = C C', C lower-triangular with entries (sigma1; eta, sigma2).
* ``GumbelCopulaModel`` — the marginals are joined by a Gumbel copula with
  parameter alpha >= 1 (alpha = 1 is independence).

The likelihood building blocks live here: the joint survival S(v), its
negative partial derivatives D_j(v) = -dS/dv_j (the cause-specific density of
"type j fires at the ages v"), the age-conditioned gap density, and the
sub-intensity h_j(t) = D_j(a-(t)) / S(a-(t)) with its cumulative integral.

Evaluation points v, ages a and covariates x accept single pairs or (n, 2)
arrays and broadcast together; the type argument j is a scalar in {1, 2}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .distributions import (
    CholeskyCovariance,
    LognormalMarginal,
    _gumbel_log_partial_complement,
    bvn_sf,
    gumbel_cdf,
    gumbel_logpdf,
    lognormal_logpdf,
)
from .events import EventHistory, snapshot_after_last

__all__ = [
    "MlnModel",
    "GumbelCopulaModel",
    "CarpModel",
    "make_model",
    "sub_intensity",
    "cumulative_intensity",
    "PARAM_NAMES",
]

ALPHA_MAX = 1e6
RHO_MAX = 1.0 - 1e-12
_TINY = 1e-300

#: Natural parameter order shared by both variants; index 4 is the dependence
#: parameter (eta for the lognormal variant, alpha for the copula variant).
PARAM_NAMES = ("mu1", "mu2", "sigma1", "sigma2", "dep", "b11", "b12", "b21", "b22")


def _as_rows(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    return out[None, :] if out.ndim == 1 else out


def _scalar_in(*arrays) -> bool:
    return all(np.asarray(a).ndim == 1 for a in arrays)


@dataclass(frozen=True)
class _CarpBase:
    mu0: tuple[float, float]
    b: tuple[tuple[float, float], tuple[float, float]]

    @property
    def b_matrix(self) -> np.ndarray:
        return np.asarray(self.b, dtype=float)

    def location_adjust(self, x) -> np.ndarray:
        """Covariate-shifted locations mu(x) = mu0 + B x, rowwise for (n, 2) x."""
        x = _as_rows(x)
        mu = np.asarray(self.mu0, dtype=float) + x @ self.b_matrix.T
        return mu

    # -- spec'd conveniences -------------------------------------------------

    def joint_sf(self, v, x):
        """Joint survival Pr(W1 > v1, W2 > v2) under covariates x."""
        scalar = _scalar_in(v)
        out = self._log_sf(_as_rows(v), _as_rows(x))
        out = np.exp(out)
        return float(out[0]) if scalar else out

    def survival_partial(self, j: int, v, x):
        """D_j(v) = -dS/dv_j, the rate of a type-j event at ages v."""
        scalar = _scalar_in(v)
        out = np.exp(self.log_survival_partial(j, v, x))
        return float(out[0]) if scalar else out

    def log_joint_sf(self, v, x):
        scalar = _scalar_in(v)
        out = self._log_sf(_as_rows(v), _as_rows(x))
        return float(out[0]) if scalar else out

    def conditional_gap_density(self, v, a, x):
        """Joint gap density given the age state a: f_W(v | a, x) = f(v)/S(a).

        Defined on v >= a (elementwise) with v > 0; raises outside that
        region. With a = (0, 0) this is the unconditional joint density.
        """
        scalar = _scalar_in(v)
        v, a, x = _as_rows(v), _as_rows(a), _as_rows(x)
        if np.any(v <= 0):
            raise ValueError("density evaluation needs v > 0")
        if np.any(v < a):
            raise ValueError("conditional gap density is supported on v >= a")
        out = np.exp(self._log_pdf(v, x) - self._log_sf(a, x))
        return float(out[0]) if scalar else out

    def kendall_tau(self) -> float:
        raise NotImplementedError

    def to_vector(self) -> np.ndarray:
        raise NotImplementedError

    def marginal_sd(self, j: int) -> float:
        raise NotImplementedError

    def log_marginal_sf(self, j: int, v, x):
        """log Pr(W_j > v) under covariates x; exact 0 at v <= 0."""
        v = np.asarray(v, dtype=float)
        mu = self.location_adjust(x)[:, j - 1]
        sd = self.marginal_sd(j)
        z = np.where(v > 0, (np.log(np.maximum(v, _TINY)) - mu) / sd, -np.inf)
        return log_ndtr(-z)


@dataclass(frozen=True)
class MlnModel(_CarpBase):
    """Bivariate-lognormal gap law with Cholesky-parameterized covariance."""

    chol: CholeskyCovariance

    variant = "mln"

    @property
    def dep(self) -> float:
        return self.chol.eta

    def to_vector(self) -> np.ndarray:
        c = self.chol
        return np.array([*self.mu0, c.sigma1, c.sigma2, c.eta,
                         self.b[0][0], self.b[0][1], self.b[1][0], self.b[1][1]])

    def kendall_tau(self) -> float:
        from .distributions import kendall_tau_mln

        return kendall_tau_mln(self.chol)

    def marginal_sd(self, j: int) -> float:
        return self.chol.marginal_sds[j - 1]

    def _log_sf(self, v, x):
        if np.any(v < 0):
            raise ValueError("survival evaluation needs v >= 0")
        mu = self.location_adjust(x)
        sd1, sd2 = self.chol.marginal_sds
        rho = max(-RHO_MAX, min(RHO_MAX, self.chol.rho))
        z1 = np.where(v[:, 0] > 0, (np.log(np.maximum(v[:, 0], _TINY)) - mu[:, 0]) / sd1, -np.inf)
        z2 = np.where(v[:, 1] > 0, (np.log(np.maximum(v[:, 1], _TINY)) - mu[:, 1]) / sd2, -np.inf)
        # zero components impose no constraint: reduce to the other marginal
        # through log_ndtr, which stays accurate deep in the tail
        out = np.where(
            v[:, 0] > 0,
            np.where(v[:, 1] > 0, 0.0, log_ndtr(-z1)),
            np.where(v[:, 1] > 0, log_ndtr(-z2), 0.0),
        )
        both = (v[:, 0] > 0) & (v[:, 1] > 0)
        if np.any(both):
            sf = bvn_sf(z1[both], z2[both], rho)
            out[both] = np.where(sf >= _TINY, np.log(np.maximum(sf, _TINY)), -np.inf)
        return out

    def log_survival_partial(self, j: int, v, x):
        """log D_j via the marginal density times the conditional survival.

        D_j(v) = f_j(v_j) * Pr(W_other > v_other | W_j = v_j), the conditional
        being normal on the log scale. Zero in the j component gives the true
        limit D_j = 0 (-inf here); zero in the other component drops the
        conditional factor.
        """
        if j not in (1, 2):
            raise ValueError("event type must be 1 or 2")
        v, x = _as_rows(v), _as_rows(x)
        if np.any(v < 0):
            raise ValueError("ages must be nonnegative")
        mu = self.location_adjust(x)
        sig = self.chol.sigma_matrix
        ji, oi = j - 1, 2 - j
        sd_j = math.sqrt(sig[ji, ji])
        vj, vo = v[:, ji], v[:, oi]
        out = np.full(vj.shape, -np.inf)
        ok = vj > 0
        if not np.any(ok):
            return out
        log_f = lognormal_logpdf(vj, mu[:, ji], sd_j)
        var_c = sig[oi, oi] - sig[0, 1] ** 2 / sig[ji, ji]
        mu_c = mu[:, oi] + sig[0, 1] / sig[ji, ji] * (np.log(np.maximum(vj, _TINY)) - mu[:, ji])
        cond = np.where(
            vo > 0,
            log_ndtr(-(np.log(np.maximum(vo, _TINY)) - mu_c) / math.sqrt(var_c)),
            0.0,
        )
        return np.where(ok, log_f + cond, -np.inf)

    def _log_pdf(self, v, x):
        mu = self.location_adjust(x)
        sig = self.chol.sigma_matrix
        det = sig[0, 0] * sig[1, 1] - sig[0, 1] ** 2
        d = np.log(v) - mu
        quad = (
            sig[1, 1] * d[:, 0] ** 2 - 2 * sig[0, 1] * d[:, 0] * d[:, 1] + sig[0, 0] * d[:, 1] ** 2
        ) / det
        return -math.log(2 * math.pi) - 0.5 * math.log(det) - 0.5 * quad - np.log(v).sum(axis=1)


@dataclass(frozen=True)
class GumbelCopulaModel(_CarpBase):
    """Lognormal marginals joined by a Gumbel copula."""

    sigma: tuple[float, float]
    alpha: float

    variant = "copula"

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValueError("Gumbel parameter must be >= 1")
        if self.alpha > ALPHA_MAX:
            warnings.warn(f"alpha clamped at {ALPHA_MAX:.0e}", stacklevel=3)
            object.__setattr__(self, "alpha", ALPHA_MAX)
        if not (self.sigma[0] > 0 and self.sigma[1] > 0):
            raise ValueError("marginal scales must be positive")

    @property
    def dep(self) -> float:
        return self.alpha

    def marginal(self, j: int) -> LognormalMarginal:
        """Baseline marginal of type j (covariates at zero)."""
        return LognormalMarginal(self.mu0[j - 1], self.sigma[j - 1])

    def to_vector(self) -> np.ndarray:
        return np.array([*self.mu0, *self.sigma, self.alpha,
                         self.b[0][0], self.b[0][1], self.b[1][0], self.b[1][1]])

    def kendall_tau(self) -> float:
        from .distributions import kendall_tau_gumbel

        return kendall_tau_gumbel(self.alpha)

    def marginal_sd(self, j: int) -> float:
        return self.sigma[j - 1]

    def _margins(self, v, x):
        """Marginal CDF values of both components, exact 0 at v = 0."""
        mu = self.location_adjust(x)
        u = np.empty_like(v)
        for c in (0, 1):
            pos = v[:, c] > 0
            z = (np.log(np.maximum(v[:, c], _TINY)) - mu[:, c]) / self.sigma[c]
            u[:, c] = np.where(pos, ndtr(z), 0.0)
        return u, mu

    def _log_sf(self, v, x):
        if np.any(v < 0):
            raise ValueError("survival evaluation needs v >= 0")
        u, mu = self._margins(v, x)
        z1 = np.where(v[:, 0] > 0,
                      (np.log(np.maximum(v[:, 0], _TINY)) - mu[:, 0]) / self.sigma[0], -np.inf)
        z2 = np.where(v[:, 1] > 0,
                      (np.log(np.maximum(v[:, 1], _TINY)) - mu[:, 1]) / self.sigma[1], -np.inf)
        # zero components drop out of the inclusion-exclusion identity and
        # leave the other marginal survival, evaluated tail-stably
        out = np.where(
            v[:, 0] > 0,
            np.where(v[:, 1] > 0, 0.0, log_ndtr(-z1)),
            np.where(v[:, 1] > 0, log_ndtr(-z2), 0.0),
        )
        both = (v[:, 0] > 0) & (v[:, 1] > 0)
        if np.any(both):
            c = gumbel_cdf(u[both][:, 0], u[both][:, 1], self.alpha)
            s = 1.0 - u[both][:, 0] - u[both][:, 1] + c
            out[both] = np.where(s >= _TINY, np.log(np.maximum(s, _TINY)), -np.inf)
        return out

    def log_survival_partial(self, j: int, v, x):
        """log D_j = log f_j(v_j) + log[1 - dC/du_j at the marginal CDFs]."""
        if j not in (1, 2):
            raise ValueError("event type must be 1 or 2")
        v, x = _as_rows(v), _as_rows(x)
        if np.any(v < 0):
            raise ValueError("ages must be nonnegative")
        ji, oi = j - 1, 2 - j
        u, mu = self._margins(v, x)
        log_f = lognormal_logpdf(v[:, ji], mu[:, ji], self.sigma[ji])

        # dC/du_j -> 0 as the other u -> 0, so those rows keep the bare density.
        out = log_f.copy()
        if self.alpha == 1.0:
            # independence: the complement is exactly the other marginal sf
            z = np.where(
                v[:, oi] > 0,
                (np.log(np.maximum(v[:, oi], _TINY)) - mu[:, oi]) / self.sigma[oi],
                -np.inf,
            )
            out += log_ndtr(-z)
            return np.where(v[:, ji] > 0, out, -np.inf)
        act = (u[:, oi] > 0) & (v[:, ji] > 0)
        if np.any(act):
            uj = np.clip(u[act][:, ji], 1e-300, 1.0 - 1e-16)
            uo = np.clip(u[act][:, oi], 1e-300, 1.0 - 1e-16)
            out[act] += _gumbel_log_partial_complement(uj, uo, self.alpha)
        return np.where(v[:, ji] > 0, out, -np.inf)

    def _log_pdf(self, v, x):
        u, mu = self._margins(v, x)
        u1 = np.clip(u[:, 0], 1e-300, 1.0 - 1e-16)
        u2 = np.clip(u[:, 1], 1e-300, 1.0 - 1e-16)
        return (
            gumbel_logpdf(u1, u2, self.alpha)
            + lognormal_logpdf(v[:, 0], mu[:, 0], self.sigma[0])
            + lognormal_logpdf(v[:, 1], mu[:, 1], self.sigma[1])
        )


CarpModel = MlnModel | GumbelCopulaModel


def make_model(variant: str, vector) -> CarpModel:
    """Build a model from the natural 9-parameter vector (see PARAM_NAMES)."""
    p = np.asarray(vector, dtype=float)
    if p.shape != (9,):
        raise ValueError("parameter vector must have length 9")
    mu0 = (p[0], p[1])
    b = ((p[5], p[6]), (p[7], p[8]))
    if variant == "mln":
        return MlnModel(mu0=mu0, b=b, chol=CholeskyCovariance(p[2], p[4], p[3]))
    if variant == "copula":
        return GumbelCopulaModel(mu0=mu0, b=b, sigma=(p[2], p[3]), alpha=p[4])
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# intensity functions
# ---------------------------------------------------------------------------

def _state_before(history: EventHistory, t: float):
    """(post-age vector, covariates, last event time) in force just before t."""
    times = history.times()
    idx = int(np.searchsorted(times, t, side="left"))
    post = np.zeros(2)
    prev_time = 0.0
    for e in history.events[:idx]:
        post += e.time - prev_time
        post[e.event_type - 1] = 0.0
        prev_time = e.time
    if idx < history.n:
        x = np.asarray(history.events[idx].covariates, dtype=float)
    else:
        x = np.asarray(snapshot_after_last(history), dtype=float)
    return post, x, prev_time


def sub_intensity(model: CarpModel, j: int, t: float, history: EventHistory) -> float:
    """Cause-specific intensity h_j(t) = D_j(a-(t)) / S(a-(t)).

    Uses the left-limit age vector and the covariate snapshot in force at t
    (covariates update only at events). t must lie in (0, termination].
    """
    if not 0.0 < t <= history.termination:
        raise ValueError("t must lie in (0, termination]")
    post, x, prev_time = _state_before(history, t)
    a_pre = post + (t - prev_time)
    log_d = model.log_survival_partial(j, a_pre[None, :], x[None, :])[0]
    log_s = model.log_joint_sf(a_pre[None, :], x[None, :])[0]
    return float(np.exp(log_d - log_s))


def cumulative_intensity(model: CarpModel, j: int, history: EventHistory,
                         grid_step: float | None = None):
    """Step-sampled cumulative intensity H_j(t) = integral of h_j over [0, t].

    Integrates with the composite trapezoid rule on a uniform grid inside
    each inter-event interval (ages reset at events); each interval gets 64
    substeps by default, or ceil(length / grid_step) when a step is given.
    Returns (times, values) arrays starting at (0, 0).
    """
    if grid_step is not None and not grid_step > 0:
        raise ValueError("grid_step must be positive")
    bounds = [0.0] + [e.time for e in history.events]
    if history.termination > bounds[-1]:
        bounds.append(history.termination)
    t_out = [0.0]
    h_out = [0.0]
    post = np.zeros(2)
    prev_time = 0.0
    for i in range(1, len(bounds)):
        lo, hi = bounds[i - 1], bounds[i]
        length = hi - lo
        if length > 0:
            m = 64 if grid_step is None else max(1, int(math.ceil(length / grid_step)))
            s = np.linspace(lo, hi, m + 1)
            if i - 1 < history.n:
                x = np.asarray(history.events[i - 1].covariates, dtype=float)
            else:
                x = np.asarray(snapshot_after_last(history), dtype=float)
            a_pre = post[None, :] + (s - lo)[:, None]
            xs = np.broadcast_to(x, (m + 1, 2))
            h = np.exp(
                model.log_survival_partial(j, a_pre, xs) - model.log_joint_sf(a_pre, xs)
            )
            incr = 0.5 * (h[1:] + h[:-1]) * np.diff(s)
            base = h_out[-1]
            t_out.extend(s[1:].tolist())
            h_out.extend((base + np.cumsum(incr)).tolist())
        if i - 1 < history.n:
            e = history.events[i - 1]
            post += e.time - prev_time
            post[e.event_type - 1] = 0.0
            prev_time = e.time
    return np.asarray(t_out), np.asarray(h_out)
