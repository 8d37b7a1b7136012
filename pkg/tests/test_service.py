import numpy as np
import pytest
from fastapi.testclient import TestClient

from carp.service import app
from carp.service.schemas import RunConfig


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def sample_history(client, sample_csv_path):
    resp = client.post("/ingest", json={"csv_text": sample_csv_path.read_text()})
    assert resp.status_code == 200
    return resp.json()


@pytest.fixture(scope="module")
def sim400(client):
    resp = client.post("/simulate", json={"variant": "copula", "n_events": 400,
                                          "seed": 3, "params": {"dep": 1.5}})
    assert resp.status_code == 200
    return resp.json()


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestIngestEndpoint:
    def test_sample(self, sample_history):
        assert len(sample_history["events"]) == 10
        assert sample_history["events"][0]["time"] == 0.0

    def test_bad_csv_structured_error(self, client):
        resp = client.post("/ingest", json={"csv_text": "time,duration,geyser\nbogus,1,Grotto\n"})
        assert resp.status_code == 422
        body = resp.json()
        assert body["error"] == "IngestError"
        assert "line" in body["message"]


class TestSummarizeEndpoint:
    def test_counts(self, client, sample_history):
        body = client.post("/summarize", json={"history": sample_history}).json()
        assert body["n"] == 10
        assert body["per_type"]["1"]["count"] == 4
        assert body["per_type"]["2"]["count"] == 6


class TestSimulateEndpoint:
    def test_deterministic_csv(self, client):
        req = {"variant": "mln", "n_events": 40, "seed": 11, "params": {"dep": 0.1}}
        a = client.post("/simulate", json=req).json()
        b = client.post("/simulate", json=req).json()
        assert a["csv_text"] == b["csv_text"]
        assert a["config_hash"] == b["config_hash"]

    def test_csv_ingestible(self, client, sim400):
        resp = client.post("/ingest", json={"csv_text": sim400["csv_text"]})
        assert resp.status_code == 200
        assert len(resp.json()["events"]) == 400


@pytest.fixture(scope="module")
def fit_body(client, sim400):
    resp = client.post("/fit", json={
        "history": sim400["history"], "variant": "copula",
        "optimizer": {"n_starts": 1, "use_nelder_mead": False}, "seed": 5})
    assert resp.status_code == 200
    return resp.json()


class TestFitEndpoint:
    def test_schema_fields(self, fit_body):
        for key in ("variant", "estimates", "ci95", "loglik", "aic", "tau",
                    "tau_ci95", "convergence", "seed", "config_hash",
                    "schema_version", "se", "k", "flags"):
            assert key in fit_body

    def test_aic_identity(self, fit_body):
        assert fit_body["aic"] == pytest.approx(18 - 2 * fit_body["loglik"])

    def test_ci_contains_estimate(self, fit_body):
        for name, (lo, hi) in fit_body["ci95"].items():
            assert lo <= fit_body["estimates"][name] <= hi

    def test_estimates_near_truth(self, fit_body):
        est = fit_body["estimates"]
        assert est["mu1"] == pytest.approx(1.0, abs=0.3)
        assert est["alpha"] == pytest.approx(1.5, abs=0.5)

    def test_unknown_field_rejected(self, client, sim400):
        resp = client.post("/fit", json={"history": sim400["history"],
                                         "variant": "copula", "bogus": 1})
        assert resp.status_code == 422


class TestDiagnoseEndpoint:
    def test_martingale_consistency(self, client):
        # independence truth, fitted-truth params: terminal H_j ~ N_j
        sim = client.post("/simulate", json={
            "variant": "copula", "n_events": 600, "seed": 21,
            "params": {"dep": 1.0, "b11": 0.0, "b22": 0.0},
            "covariate_law": {"kind": "none"}}).json()
        resp = client.post("/diagnose", json={
            "history": sim["history"], "variant": "copula",
            "params": {"dep": 1.0, "b11": 0.0, "b22": 0.0}})
        assert resp.status_code == 200
        series = resp.json()["series"]
        for j in ("1", "2"):
            est = series[j]["estimated"][-1]
            obs = series[j]["observed"][-1]
            assert est == pytest.approx(obs, rel=0.10)

    def test_monotone_and_aligned(self, client, sample_history):
        resp = client.post("/diagnose", json={
            "history": sample_history, "variant": "mln",
            "params": {"mu1": 1.9, "mu2": 2.1, "sigma1": 0.4, "sigma2": 0.5,
                       "dep": -0.05, "b11": 0.9, "b12": 0.0, "b21": 0.0, "b22": 0.06},
            "grid_step": 0.25})
        body = resp.json()
        for j in ("1", "2"):
            s = body["series"][j]
            assert len(s["t"]) == len(s["estimated"]) == len(s["observed"])
            assert np.all(np.diff(s["estimated"]) >= -1e-12)
            assert s["observed"][0] == 0

    def test_invalid_params_rejected(self, client, sample_history):
        resp = client.post("/diagnose", json={
            "history": sample_history, "variant": "copula",
            "params": {"dep": 0.5}})  # alpha < 1
        assert resp.status_code == 422


class TestStudyEndpoint:
    def test_small_grid(self, client):
        resp = client.post("/study", json={
            "scenarios": [{"label": "demo", "variant": "copula", "n_events": 120,
                           "params": {"dep": 1.5}}],
            "fits": [{"variant": "copula"}, {"variant": "copula", "zero_b": True}],
            "replicates": 2,
            "optimizer": {"n_starts": 1, "use_nelder_mead": False},
            "master_seed": 31})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["rows"]) == 2
        assert body["csv_text"].startswith("scenario,")
        zb = [r for r in body["rows"] if r["zero_b"]][0]
        assert zb["n_ok"] + zb["n_failed"] == 2


class TestRunConfigSchema:
    def test_unknown_keys_rejected(self):
        with pytest.raises(Exception):
            RunConfig.model_validate({"variant": "mln", "bogus": 1})

    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.variant == "mln"
        assert cfg.optimizer.n_starts == 8
