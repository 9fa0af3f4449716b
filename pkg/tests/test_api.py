import pytest
from fastapi.testclient import TestClient

from app.main import app

UNIFORM_DIMER = {"type": "dimer_hopping", "c_ev": 1.2, "lambda_ev": 0.4, "c_od": 1.0}


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def test_health(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_nu_endpoint(client):
    response = client.post("/nu", json={"model": UNIFORM_DIMER})
    assert response.status_code == 200
    body = response.json()
    assert body["nu"] == pytest.approx(9.71, abs=0.01)
    assert body["hypotheses"]["nonzero_root"]


def test_no_root_maps_to_bad_request(client):
    deterministic = {"type": "dimer_hopping", "c_ev": 2.0, "lambda_ev": 0.0, "c_od": 1.0}
    response = client.post("/nu", json={"model": deterministic})
    assert response.status_code == 400
    assert response.json()["error"] == "NoRootError"


def test_missing_seed_is_unprocessable(client):
    response = client.post("/ids", json={"model": UNIFORM_DIMER, "n_sites": 200})
    assert response.status_code == 422
    assert response.json()["error"] == "ConfigurationError"


def test_ids_endpoint(client):
    response = client.post("/ids", json={"model": UNIFORM_DIMER, "n_sites": 200, "energies": [0.0, 3.0], "seed": 1})
    assert response.status_code == 200
    body = response.json()
    assert body["energies"] == [0.0, 3.0]
    assert body["values"][1] == 1.0


def test_invalid_body_is_rejected(client):
    response = client.post("/nu", json={"model": {"type": "dimer_hopping", "c_ev": -1.0, "lambda_ev": 0.0, "c_od": 1.0}})
    assert response.status_code == 422
