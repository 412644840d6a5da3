import pytest
from fastapi.testclient import TestClient

from app.main import app


@pytest.fixture
def client():
    return TestClient(app)


def test_root_and_health(client):
    root = client.get("/")
    assert root.status_code == 200
    assert root.json()["modes"] == ["classical", "nonrecursive", "hybrid"]
    response = client.get("/api/v1/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["oracle_limit"] == 20


def test_solve(client, fixture_path):
    response = client.post("/api/v1/solve", json={"graph": fixture_path("k4").read_text(), "oracle_check": True})
    assert response.status_code == 200
    assert "X-Process-Time" in response.headers
    body = response.json()
    assert body["verdict"] is True
    assert body["stats"]["oracle"] is True
    assert body["schema_version"] == "1.0"


def test_solve_nonrecursive(client, fixture_path):
    response = client.post("/api/v1/solve", json={"graph": fixture_path("petersen").read_text(), "mode": "nonrecursive"})
    assert response.status_code == 200
    assert response.json()["verdict"] is False


def test_solver_errors_are_422(client):
    response = client.post("/api/v1/solve", json={"graph": "p 2 1\ne 2 2\n"})
    assert response.status_code == 422
    assert response.json()["error"] == "SelfLoop"


def test_hybrid_needs_c(client, fixture_path):
    response = client.post("/api/v1/solve", json={"graph": fixture_path("k4").read_text(), "mode": "hybrid"})
    assert response.status_code == 422
    assert response.json()["error"] == "ValueError"


def test_request_validation(client):
    response = client.post("/api/v1/solve", json={"graph": "p 1 0\n", "mode": "quantum"})
    assert response.status_code == 422
    assert response.json()["error"] == "RequestValidationError"


def test_analyze(client):
    response = client.get("/api/v1/analyze", params={"c_grid": "0.1,0.2", "ns": [64, 1024]})
    assert response.status_code == 200
    assert len(response.json()["rows"]) == 4
    assert client.get("/api/v1/analyze", params={"c_grid": "bad"}).status_code == 422
