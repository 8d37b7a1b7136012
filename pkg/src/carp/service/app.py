"""HTTP service exposing ingestion, fitting, simulation, studies, and
diagnostics over the core package. All endpoints are pure compute on the
request payload; file handling stays client-side."""

from __future__ import annotations

import hashlib
import json

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..events import EventHistory, EventRecord
from ..io import DEFAULT_MAPPING, IngestError, ingest_csv_text, serialize_history_csv, summarize
from ..likelihood import FitError, FitResult, OptimizerConfig, fit
from ..model import cumulative_intensity, make_model
from ..simulate import (
    CovariateLaw,
    FitSpec,
    Scenario,
    SimConfig,
    SimulationError,
    run_study,
    simulate_history,
)
from . import schemas as S

app = FastAPI(
    title="carp",
    version=__version__,
    description="Covariate-adjusted bivariate recurrent-event process modeling service.",
)


def config_hash(payload) -> str:
    blob = json.dumps(payload.model_dump(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def history_from_payload(p: S.HistoryPayload) -> EventHistory:
    events = tuple(
        EventRecord(time=e.time, event_type=e.event_type,
                    covariates=tuple(e.covariates), duration=e.duration)
        for e in p.events
    )
    return EventHistory(events=events, termination=p.termination, origin=p.origin)


def history_to_payload(h: EventHistory) -> S.HistoryPayload:
    return S.HistoryPayload(
        events=[S.EventIn(time=e.time, event_type=e.event_type,
                          covariates=e.covariates, duration=e.duration)
                for e in h.events],
        termination=h.termination,
        origin=h.origin,
    )


def _law(p: S.CovariateLawPayload) -> CovariateLaw:
    return CovariateLaw(kind=p.kind, mu=tuple(p.mu), sigma=tuple(p.sigma))


@app.exception_handler(IngestError)
@app.exception_handler(FitError)
@app.exception_handler(SimulationError)
@app.exception_handler(ValueError)
async def _domain_error(request: Request, exc: Exception):
    return JSONResponse(
        status_code=422,
        content={"error": type(exc).__name__, "message": str(exc)},
    )


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/ingest", response_model=S.HistoryPayload)
def ingest(req: S.IngestRequest):
    history = ingest_csv_text(req.csv_text, req.mapping, req.date_min, req.date_max)
    return history_to_payload(history)


@app.post("/summarize", response_model=S.SummaryResponse)
def summarize_endpoint(req: S.SummaryRequest):
    stats = summarize(history_from_payload(req.history))
    return S.SummaryResponse(
        n=stats["n"], termination=stats["termination"],
        per_type={str(j): S.TypeSummary(**stats["per_type"][j]) for j in (1, 2)},
    )


@app.post("/fit", response_model=S.FitResponse)
def fit_endpoint(req: S.FitRequest):
    history = history_from_payload(req.history)
    opt = req.optimizer
    config = OptimizerConfig(
        n_starts=opt.n_starts, jitter=opt.jitter, use_nelder_mead=opt.use_nelder_mead,
        nm_maxiter=opt.nm_maxiter, qn_maxiter=opt.qn_maxiter, freeze_b=opt.freeze_b,
        seed=req.seed,
    )
    result = fit(req.variant, history, config)
    return fit_result_to_response(result, config_hash(req))


def fit_result_to_response(result: FitResult, conf_hash: str) -> S.FitResponse:
    return S.FitResponse(
        variant=result.variant,
        estimates=result.estimates,
        se=result.se,
        ci95=result.ci95,
        loglik=result.loglik,
        k=result.k,
        aic=result.aic,
        tau=result.tau,
        tau_se=result.tau_se,
        tau_ci95=result.tau_ci95,
        convergence={"converged": result.converged, "starts": result.starts},
        flags=result.flags,
        n_events=result.n_events,
        seed=result.seed,
        config_hash=conf_hash,
    )


@app.post("/simulate", response_model=S.SimulateResponse)
def simulate_endpoint(req: S.SimulateRequest):
    model = make_model(req.variant, req.params.as_vector())
    history = simulate_history(SimConfig(model=model, n_events=req.n_events,
                                         covariate_law=_law(req.covariate_law),
                                         seed=req.seed))
    csv_text = serialize_history_csv(history, req.mapping or DEFAULT_MAPPING)
    return S.SimulateResponse(history=history_to_payload(history), csv_text=csv_text,
                              seed=req.seed, config_hash=config_hash(req))


@app.post("/study", response_model=S.StudyResponse)
def study_endpoint(req: S.StudyRequest):
    law = _law(req.covariate_law)
    scenarios = [
        Scenario(label=sc.label, truth=make_model(sc.variant, sc.params.as_vector()),
                 n_events=sc.n_events, covariate_law=law)
        for sc in req.scenarios
    ]
    fits = [FitSpec(variant=f.variant, zero_b=f.zero_b) for f in req.fits]
    optimizer = None
    if req.optimizer is not None:
        o = req.optimizer
        optimizer = OptimizerConfig(
            n_starts=o.n_starts, jitter=o.jitter, use_nelder_mead=o.use_nelder_mead,
            nm_maxiter=o.nm_maxiter, qn_maxiter=o.qn_maxiter,
            compute_hessian=req.compute_coverage,
        )
    result = run_study(scenarios, req.replicates, fits, master_seed=req.master_seed,
                       optimizer=optimizer, compute_coverage=req.compute_coverage)
    rows = [
        S.StudyRowPayload(
            scenario=r.scenario, truth_variant=r.truth_variant, n_events=r.n_events,
            tau_true=r.tau_true, fitted_variant=r.fitted_variant, zero_b=r.zero_b,
            n_ok=r.n_ok, n_failed=r.n_failed,
            mean_aic=r.mean_aic if np.isfinite(r.mean_aic) else float("nan"),
            mse=r.mse, coverage=r.coverage,
        )
        for r in result.rows
    ]
    return S.StudyResponse(rows=rows, replicates=result.replicates,
                           master_seed=result.master_seed, csv_text=result.to_csv(),
                           config_hash=config_hash(req))


@app.post("/diagnose", response_model=S.DiagnoseResponse)
def diagnose_endpoint(req: S.DiagnoseRequest):
    history = history_from_payload(req.history)
    model = make_model(req.variant, req.params.as_vector())
    series = {}
    for j in (1, 2):
        t, est = cumulative_intensity(model, j, history, grid_step=req.grid_step)
        observed = history.counting_process(j, t)
        # H_j integrates over (0, t], so an event pinned at the time origin
        # (the conditioning point of ingested data) is excluded from N_j
        observed = observed - history.counting_process(j, 0.0)
        series[str(j)] = S.IntensitySeries(t=t.tolist(), estimated=est.tolist(),
                                           observed=observed.tolist())
    return S.DiagnoseResponse(series=series, config_hash=config_hash(req))
