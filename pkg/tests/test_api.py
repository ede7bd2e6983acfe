"""
tests/test_api.py – Integration tests via FastAPI TestClient.
Every endpoint returns the right status and schema.
"""
import pytest
from fastapi.testclient import TestClient


@pytest.fixture(scope="module")
def client():
    from confound_bench.main import app
    with TestClient(app) as c:
        yield c


# ── /health, /presets ──────────────────────────────────────────────────────────

class TestSystem:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_presets(self, client):
        r = client.get("/presets")
        assert r.status_code == 200
        assert "fig2_top_W" in r.json()["presets"]


# ── /table ─────────────────────────────────────────────────────────────────────

class TestTable:
    def test_default_table(self, client):
        r = client.post("/table", json={})
        assert r.status_code == 200
        body = r.json()
        assert len(body["cells"]) == 24
        iv_w = next(c for c in body["cells"]
                    if (c["method"], c["scenario"], c["regime"]) == ("IV", "W_only", "m_infty_fixed_n"))
        assert iv_w["value"] == pytest.approx(0.113924, abs=1e-6)
        assert body["sigma_chie2"] > 0

    def test_cluster_size_one(self, client):
        r = client.post("/table", json={"base": {"n": 1}})
        assert r.status_code == 200
        assert r.json()["sigma_de2"] == 0.0

    def test_invalid_covariance(self, client):
        payload = {"base": {"alpha_w": [1, 1], "beta_w": [1, 1], "mean_w": [0, 0], "V_w": [[1, 2], [2, 1]]}}
        assert client.post("/table", json=payload).status_code == 422

    def test_unknown_field(self, client):
        assert client.post("/table", json={"base": {"gamma": 1}}).status_code == 422


# ── /experiments ───────────────────────────────────────────────────────────────

class TestExperiments:
    def test_analytic_experiment(self, client):
        payload = {"name": "api", "axis": "beta_1w", "values": [0, 1], "methods": ["IV", "FE"], "analytic_only": True,
                   "base": {"confounder_mode": "W_only"}}
        r = client.post("/experiments", json=payload)
        assert r.status_code == 200
        body = r.json()
        assert body["all_agree"] and body["analytic_only"]
        assert len(body["rows"]) == 4
        assert body["rows"][3]["analytic_bias"] == pytest.approx(0.6 / 1.36)

    def test_empirical_experiment(self, client):
        payload = {"name": "api_mc", "axis": "n", "values": [3], "reps": 4, "base": {"m": 20, "n": 3}}
        r = client.post("/experiments", json=payload)
        assert r.status_code == 200
        assert all(row["reps"] == 4 for row in r.json()["rows"])

    def test_empty_values(self, client):
        r = client.post("/experiments", json={"name": "x", "axis": "n", "values": []})
        assert r.status_code == 400
        assert "values" in r.json()["detail"]

    def test_unknown_preset(self, client):
        assert client.post("/experiments/preset/fig7").status_code == 404

    def test_preset(self, client):
        r = client.post("/experiments/preset/fig2_top_W_m10", params={"reps": 2})
        assert r.status_code == 200
        body = r.json()
        assert len(body["rows"]) == 36
        assert body["grid_note"]

    def test_preset_reps_lower_bound(self, client):
        assert client.post("/experiments/preset/fig2_top_W", params={"reps": 1}).status_code == 422
