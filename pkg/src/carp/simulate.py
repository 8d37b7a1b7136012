"""Process simulation and the simulation-study harness.

Histories are generated by the competing-clocks renewal mechanism the
likelihood assumes: after each event the joint gap vector is redrawn from its
law conditioned on exceeding the current age vector, the next event fires
when the first residual clock expires, and the fired type's new eruption
duration updates the covariate snapshot.

The study harness sweeps scenario grids (truth model, sample size, covariate
law), fits requested variants to each replicate, and aggregates mean AIC,
per-parameter MSE, and optional CI coverage. Replicate RNG streams are
counter-based (Philox) and split per (scenario, replicate), so results do not
depend on execution order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .events import EventHistory, EventRecord
from .likelihood import FitError, OptimizerConfig, fit, param_names
from .model import CarpModel, GumbelCopulaModel, MlnModel

__all__ = [
    "CovariateLaw",
    "SimConfig",
    "SimulationError",
    "simulate_history",
    "sample_conditional_gap",
    "sample_gaps",
    "Scenario",
    "FitSpec",
    "StudyRow",
    "StudyResult",
    "run_study",
]

DEEP_TAIL_SF = 1e-12


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CovariateLaw:
    """Law of the per-eruption durations feeding the covariate process.

    ``lognormal`` draws each fired type's duration from its own lognormal;
    ``none`` keeps all durations (hence covariates) at zero.
    """

    kind: str = "lognormal"
    mu: tuple[float, float] = (-0.66, -0.66)
    sigma: tuple[float, float] = (0.40, 0.40)

    def __post_init__(self):
        if self.kind not in ("lognormal", "none"):
            raise ValueError("covariate law kind must be 'lognormal' or 'none'")
        if self.kind == "lognormal" and not all(s > 0 for s in self.sigma):
            raise ValueError("duration scales must be positive")

    def draw(self, event_type: int, rng: np.random.Generator) -> float:
        if self.kind == "none":
            return 0.0
        j = event_type - 1
        return float(np.exp(self.mu[j] + self.sigma[j] * rng.standard_normal()))


@dataclass(frozen=True)
class SimConfig:
    model: CarpModel
    n_events: int
    covariate_law: CovariateLaw = CovariateLaw()
    seed: int = 0

    def __post_init__(self):
        if self.n_events < 1:
            raise ValueError("n_events must be >= 1")


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _gumbel_partial_scalar(u1: float, t: float, alpha: float) -> float:
    """dC/du1 at (u1, t); equals the conditional CDF of U2 given U1 = u1."""
    x1 = -math.log(u1)
    x2 = -math.log(t)
    m = max(x1, x2)
    r = min(x1, x2) / m
    log1p_s = math.log1p(r ** alpha)
    log_m = math.log(m)
    apow = math.exp(log_m + log1p_s / alpha)
    log_a = alpha * log_m + log1p_s
    val = -apow + (1.0 / alpha - 1.0) * log_a + (alpha - 1.0) * math.log(x1) - math.log(u1)
    return math.exp(min(0.0, val))


def _invert_increasing(fn, target: float, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Bisection solve of fn(t) = target for increasing fn on [lo, hi]."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def sample_conditional_gap(model: CarpModel, a, x, rng: np.random.Generator):
    """One exact draw of the joint gap vector conditioned on W >= a.

    For the lognormal variant the aged component's log is drawn from a
    truncated normal and the other from the conditional normal; for the
    copula variant the aged component uses the truncated-marginal inverse CDF
    and the other inverts the conditional copula by bisection. Raises
    SimulationError when the conditioning survival drops below 1e-12
    (deep-tail conditioning).
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("ages must be nonnegative")
    mu = model.location_adjust(np.asarray(x, dtype=float))[0]
    aged = [k for k in (0, 1) if a[k] > 0]
    if len(aged) == 2:
        return _sample_double_aged(model, a, x, mu, rng)

    if isinstance(model, MlnModel):
        sig = model.chol.sigma_matrix
        logw = np.empty(2)
        if not aged:
            eps = rng.standard_normal(2)
            c = model.chol
            logw[0] = mu[0] + c.sigma1 * eps[0]
            logw[1] = mu[1] + c.eta * eps[0] + c.sigma2 * eps[1]
        else:
            k = aged[0]
            o = 1 - k
            sd_k = math.sqrt(sig[k, k])
            p_lo = _phi((math.log(a[k]) - mu[k]) / sd_k)
            if 1.0 - p_lo < DEEP_TAIL_SF:
                raise SimulationError(f"deep-tail conditioning: sf(age={a[k]:.3g}) < 1e-12")
            u = p_lo + rng.uniform() * (1.0 - p_lo)
            logw[k] = mu[k] + sd_k * float(ndtri(u))
            mu_c = mu[o] + sig[0, 1] / sig[k, k] * (logw[k] - mu[k])
            var_c = sig[o, o] - sig[0, 1] ** 2 / sig[k, k]
            logw[o] = mu_c + math.sqrt(var_c) * rng.standard_normal()
        return float(math.exp(logw[0])), float(math.exp(logw[1]))

    # copula variant
    alpha = model.alpha
    sigma = model.sigma
    k = aged[0] if aged else 0
    o = 1 - k
    p_lo = _phi((math.log(a[k]) - mu[k]) / sigma[k]) if a[k] > 0 else 0.0
    if 1.0 - p_lo < DEEP_TAIL_SF:
        raise SimulationError(f"deep-tail conditioning: sf(age={a[k]:.3g}) < 1e-12")
    u_k = p_lo + rng.uniform() * (1.0 - p_lo)
    u_k = min(max(u_k, 1e-15), 1.0 - 1e-15)
    q = rng.uniform()
    if alpha == 1.0:
        u_o = q
    else:
        u_o = _invert_increasing(lambda t: _gumbel_partial_scalar(u_k, t, alpha),
                                 q, 1e-15, 1.0 - 1e-15)
    w = np.empty(2)
    w[k] = math.exp(mu[k] + sigma[k] * float(ndtri(u_k)))
    w[o] = math.exp(mu[o] + sigma[o] * float(ndtri(min(max(u_o, 1e-15), 1.0 - 1e-15))))
    return float(w[0]), float(w[1])


def _sample_double_aged(model: CarpModel, a, x, mu, rng: np.random.Generator):
    """Exact draw with both components aged: numeric inversion through the
    joint survival for the first component, then the truncated conditional."""
    s_a = model.joint_sf((a[0], a[1]), x)
    if s_a < DEEP_TAIL_SF:
        raise SimulationError("deep-tail conditioning: joint sf(ages) < 1e-12")
    q = rng.uniform()

    def cond_cdf(w1: float) -> float:
        return (s_a - model.joint_sf((w1, a[1]), x)) / s_a

    hi = float(a[0])
    while cond_cdf(hi) < q and hi < a[0] * 1e6 + 1e6:
        hi = 2.0 * hi + 1.0
    w1 = _invert_increasing(cond_cdf, q, float(a[0]), hi, tol=1e-12 * max(1.0, hi))

    if isinstance(model, MlnModel):
        sig = model.chol.sigma_matrix
        mu_c = mu[1] + sig[0, 1] / sig[0, 0] * (math.log(w1) - mu[0])
        var_c = sig[1, 1] - sig[0, 1] ** 2 / sig[0, 0]
        sd_c = math.sqrt(var_c)
        p_lo = _phi((math.log(a[1]) - mu_c) / sd_c)
        if 1.0 - p_lo < DEEP_TAIL_SF:
            raise SimulationError("deep-tail conditioning in conditional draw")
        u = p_lo + rng.uniform() * (1.0 - p_lo)
        w2 = math.exp(mu_c + sd_c * float(ndtri(u)))
        return float(w1), float(w2)

    alpha = model.alpha
    u1 = min(max(_phi((math.log(w1) - mu[0]) / model.sigma[0]), 1e-15), 1.0 - 1e-15)
    u_lo = _phi((math.log(a[1]) - mu[1]) / model.sigma[1])
    if alpha == 1.0:
        u2 = u_lo + rng.uniform() * (1.0 - u_lo)
    else:
        p_lo = _gumbel_partial_scalar(u1, u_lo, alpha) if u_lo > 0 else 0.0
        q2 = p_lo + rng.uniform() * (1.0 - p_lo)
        u2 = _invert_increasing(lambda t: _gumbel_partial_scalar(u1, t, alpha),
                                q2, max(u_lo, 1e-15), 1.0 - 1e-15)
    w2 = math.exp(mu[1] + model.sigma[1] * float(ndtri(min(max(u2, 1e-15), 1.0 - 1e-15))))
    return float(w1), float(w2)


def simulate_history(config: SimConfig) -> EventHistory:
    """Generate a history with exactly n_events events; kappa = last time.

    Deterministic in the seed (counter-based Philox stream).
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    model = config.model
    t = 0.0
    age = np.zeros(2)
    x = np.zeros(2)
    records = []
    for i in range(config.n_events):
        try:
            w = sample_conditional_gap(model, age, x, rng)
        except SimulationError as exc:
            raise SimulationError(
                f"event {i + 1}: {exc} (t={t:.4g}, ages={age.tolist()})") from exc
        resid = np.asarray(w) - age
        j = int(np.argmin(resid))
        dt = float(resid[j])
        t += dt
        duration = config.covariate_law.draw(j + 1, rng)
        records.append(EventRecord(time=t, event_type=j + 1,
                                   covariates=(x[0], x[1]), duration=duration))
        age += dt
        age[j] = 0.0
        x[j] = duration
    return EventHistory(events=tuple(records), termination=t)


def sample_gaps(model: CarpModel, x, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, 2) unconditional joint gap draws at a fixed covariate vector.

    Vectorized; the copula conditional is inverted by fixed-depth bisection.
    Used by distributional tests and Monte-Carlo oracles.
    """
    mu = model.location_adjust(np.asarray(x, dtype=float))[0]
    if isinstance(model, MlnModel):
        c = model.chol
        eps = rng.standard_normal((n, 2))
        l1 = mu[0] + c.sigma1 * eps[:, 0]
        l2 = mu[1] + c.eta * eps[:, 0] + c.sigma2 * eps[:, 1]
        return np.exp(np.column_stack([l1, l2]))
    alpha = model.alpha
    u1 = rng.uniform(size=n)
    q = rng.uniform(size=n)
    if alpha == 1.0:
        u2 = q
    else:
        from .distributions import _gumbel_partial_interior

        u1c = np.clip(u1, 1e-12, 1 - 1e-12)
        lo = np.full(n, 1e-12)
        hi = np.full(n, 1.0 - 1e-12)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = _gumbel_partial_interior(u1c, mid, alpha) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        u2 = 0.5 * (lo + hi)
    w1 = np.exp(mu[0] + model.sigma[0] * ndtri(np.clip(u1, 1e-15, 1 - 1e-15)))
    w2 = np.exp(mu[1] + model.sigma[1] * ndtri(np.clip(u2, 1e-15, 1 - 1e-15)))
    return np.column_stack([w1, w2])


# ---------------------------------------------------------------------------
# study harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    label: str
    truth: CarpModel
    n_events: int
    covariate_law: CovariateLaw = CovariateLaw()


@dataclass(frozen=True)
class FitSpec:
    variant: str
    zero_b: bool = False

    @property
    def key(self) -> str:
        return self.variant + ("-zeroB" if self.zero_b else "")


@dataclass
class StudyRow:
    scenario: str
    truth_variant: str
    n_events: int
    tau_true: float
    fitted_variant: str
    zero_b: bool
    n_ok: int
    n_failed: int
    mean_aic: float
    mse: dict[str, float]
    coverage: dict[str, int] = field(default_factory=dict)


@dataclass
class StudyResult:
    rows: list[StudyRow]
    replicates: int
    master_seed: int
    covariate_law: CovariateLaw

    def to_csv(self) -> str:
        names = ("mu1", "mu2", "sigma1", "sigma2", "dep", "b11", "b12", "b21", "b22")
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(
            ["scenario", "truth_variant", "n_events", "tau_true", "fitted_variant",
             "zero_b", "n_ok", "n_failed", "mean_aic"]
            + [f"mse_{n}" for n in names]
            + ["replicates", "master_seed", "cov_law", "cov_mu1", "cov_mu2",
               "cov_sigma1", "cov_sigma2"]
        )
        law = self.covariate_law
        for r in self.rows:
            w.writerow(
                [r.scenario, r.truth_variant, r.n_events, f"{r.tau_true:.6g}",
                 r.fitted_variant, int(r.zero_b), r.n_ok, r.n_failed, f"{r.mean_aic:.4f}"]
                + [f"{r.mse[n]:.8g}" if n in r.mse else "" for n in names]
                + [self.replicates, self.master_seed, law.kind, law.mu[0], law.mu[1],
                   law.sigma[0], law.sigma[1]]
            )
        return buf.getvalue()


def _replicate_seed(master_seed: int, scenario_idx: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(scenario_idx, rep))


def run_study(scenarios, replicates: int, fit_specs, master_seed: int = 0,
              optimizer: OptimizerConfig | None = None,
              compute_coverage: bool = False) -> StudyResult:
    """Simulate each scenario `replicates` times and fit every requested spec.

    Per-replicate fit failures are recorded and excluded from the aggregates.
    The default optimizer here is the fast quasi-Newton path (two starts, no
    simplex stage); pass an explicit OptimizerConfig to override.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    scenarios = list(scenarios)
    fit_specs = list(fit_specs)
    base_opt = optimizer or OptimizerConfig(n_starts=2, use_nelder_mead=False,
                                            compute_hessian=compute_coverage)
    rows: list[StudyRow] = []
    for si, sc in enumerate(scenarios):
        truth_vec = sc.truth.to_vector()
        truth_names = param_names(sc.truth.variant)
        acc = {fs.key: {"aic": [], "err2": {}, "cover": {}, "failed": 0} for fs in fit_specs}
        for rep in range(replicates):
            ss = _replicate_seed(master_seed, si, rep)
            sim_seed = int(ss.generate_state(1)[0])
            history = simulate_history(SimConfig(model=sc.truth, n_events=sc.n_events,
                                                 covariate_law=sc.covariate_law,
                                                 seed=sim_seed))
            for fs in fit_specs:
                opt = OptimizerConfig(
                    n_starts=base_opt.n_starts, jitter=base_opt.jitter,
                    use_nelder_mead=base_opt.use_nelder_mead,
                    nm_maxiter=base_opt.nm_maxiter, qn_maxiter=base_opt.qn_maxiter,
                    freeze_b=fs.zero_b, seed=sim_seed + 1,
                    compute_hessian=base_opt.compute_hessian,
                    min_events_warn=0,
                )
                try:
                    res = fit(fs.variant, history, opt)
                except FitError:
                    acc[fs.key]["failed"] += 1
                    continue
                slot = acc[fs.key]
                slot["aic"].append(res.aic)
                fitted_names = param_names(fs.variant)
                for nm in fitted_names:
                    if nm not in truth_names or (fs.zero_b and nm.startswith("b")):
                        continue
                    true_val = truth_vec[truth_names.index(nm)]
                    err = res.estimates[nm] - true_val
                    slot["err2"].setdefault(nm, []).append(err * err)
                    if compute_coverage:
                        lo, hi = res.ci95[nm]
                        slot["cover"][nm] = slot["cover"].get(nm, 0) + int(lo <= true_val <= hi)
        for fs in fit_specs:
            slot = acc[fs.key]
            mse = {("dep" if nm in ("eta", "alpha") else nm): float(np.mean(v))
                   for nm, v in slot["err2"].items()}
            cover = {("dep" if nm in ("eta", "alpha") else nm): c
                     for nm, c in slot["cover"].items()}
            rows.append(StudyRow(
                scenario=sc.label, truth_variant=sc.truth.variant, n_events=sc.n_events,
                tau_true=sc.truth.kendall_tau(), fitted_variant=fs.variant,
                zero_b=fs.zero_b, n_ok=len(slot["aic"]), n_failed=slot["failed"],
                mean_aic=float(np.mean(slot["aic"])) if slot["aic"] else math.nan,
                mse=mse, coverage=cover,
            ))
    law = scenarios[0].covariate_law if scenarios else CovariateLaw()
    return StudyResult(rows=rows, replicates=replicates, master_seed=master_seed,
                       covariate_law=law)
