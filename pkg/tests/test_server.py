import json
import math

import pytest
from fastapi.testclient import TestClient

from fracostro.server import app

client = TestClient(app)


def _config(config_path, name):
    with open(config_path(name)) as f:
        return json.load(f)


def test_health():
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_derive(config_path):
    response = client.post("/api/derive", json=_config(config_path, "pu.json"))
    assert response.status_code == 200
    body = response.json()
    assert body["system"] == "pu"
    assert len(body["momenta"]) == 2


def test_bad_config_is_a_client_error():
    response = client.post("/api/derive", json={"schema": 1})
    assert response.status_code == 400
    assert response.json()["error"] == "config"


def test_identity_kernel(config_path):
    response = client.post("/api/kernel", json=_config(config_path, "identity.json"))
    assert response.status_code == 200
    assert response.json()["log_det"] == pytest.approx(1.5 * math.log(2 * math.pi))


def test_degenerate_kernel_is_unprocessable():
    config = {"schema": 1, "system": "custom", "lagrangian": "0*q0", "grid": {"b": 1.0, "n": 4}}
    response = client.post("/api/kernel", json=config)
    assert response.status_code == 422
    assert response.json()["error"] == "not_positive_definite"
