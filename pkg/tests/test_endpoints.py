import numpy as np
import pytest
from fastapi.testclient import TestClient

from src.api.router import app
from src.config import get_config
from src.models.containers import Volume
from src.services import fileio, phantoms

client = TestClient(app)

API_KEY = "test-key"
HEADERS = {"X-API-Key": API_KEY}


@pytest.fixture(autouse=True)
def configured_key(monkeypatch):
    monkeypatch.setattr(get_config(), "api_key", API_KEY)


@pytest.fixture
def volume_file(tmp_path):
    path = tmp_path / "clean.vol"
    fileio.write_volume(path, phantoms.phantom(phantoms.crossing_tubes((8, 8, 8)), (8, 8, 8)))
    return path


def test_health():
    print("Testing GET /health...")
    response = client.get("/health")
    print(f"Status: {response.status_code}")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"
    assert response.json()["fft_workers"] >= 1
    assert client.get("/").json()["service"] == "orient3d"
    print("Health endpoint passed!\n")


def test_missing_and_wrong_api_key():
    print("Testing API key enforcement...")
    body = {"order": 0, "params": {"grid": [8, 8, 8]}}
    assert client.post("/wavelets/mpsi-report", json=body).status_code == 401
    response = client.post("/wavelets/mpsi-report", json=body, headers={"X-API-Key": "nope"})
    print(f"Status: {response.status_code}")
    assert response.status_code == 403
    print("API key enforcement passed!\n")


def test_mpsi_report():
    print("Testing POST /wavelets/mpsi-report...")
    response = client.post(
        "/wavelets/mpsi-report",
        json={"order": 1, "params": {"grid": [8, 8, 8]}, "fraction": 0.8, "bins": 4},
        headers=HEADERS,
    )
    print(f"Status: {response.status_code}")
    print(f"Response: {response.json()}")
    assert response.status_code == 200
    report = response.json()
    assert report["global_min"] > 0
    assert report["global_min"] <= report["global_max"]
    assert 1 <= len(report["rows"]) <= 4
    print("M_psi report passed!\n")


def test_mpsi_report_rejects_bad_params():
    response = client.post("/wavelets/mpsi-report", json={"order": 1, "params": {"L": 0}}, headers=HEADERS)
    assert response.status_code == 422


def test_enhance_volume(volume_file, tmp_path):
    print("Testing POST /volumes/enhance...")
    with open(volume_file, "rb") as f:
        response = client.post(
            "/volumes/enhance",
            files={"volume": ("clean.vol", f, "application/octet-stream")},
            data={"order": 1, "t": 0.5, "p": 1.5},
            headers=HEADERS,
        )
    print(f"Status: {response.status_code}")
    assert response.status_code == 200
    out = tmp_path / "enhanced.vol"
    out.write_bytes(response.content)
    enhanced = fileio.read_volume(out)
    assert enhanced.dims == (8, 8, 8)
    assert np.all(np.isfinite(enhanced.data))
    assert fileio.read_manifest(out)["command"] == "api-enhance"
    print("Enhance endpoint passed!\n")


def test_enhance_rejects_non_volume(tmp_path):
    print("Testing POST /volumes/enhance with a corrupt upload...")
    response = client.post(
        "/volumes/enhance",
        files={"volume": ("junk.vol", b"definitely not a volume file", "application/octet-stream")},
        headers=HEADERS,
    )
    print(f"Status: {response.status_code}")
    print(f"Response: {response.json()}")
    assert response.status_code == 400
    print("Corrupt upload rejected!\n")


def test_metrics(volume_file, tmp_path):
    print("Testing POST /volumes/metrics...")
    doubled = tmp_path / "doubled.vol"
    fileio.write_volume(doubled, Volume(2 * fileio.read_volume(volume_file).data))
    with open(doubled, "rb") as a, open(volume_file, "rb") as b:
        response = client.post(
            "/volumes/metrics",
            files={"a": ("a.vol", a, "application/octet-stream"), "b": ("b.vol", b, "application/octet-stream")},
            headers=HEADERS,
        )
    print(f"Status: {response.status_code}")
    print(f"Response: {response.json()}")
    assert response.status_code == 200
    assert response.json()["rel_l2"] == pytest.approx(1.0, rel=1e-6)
    print("Metrics endpoint passed!\n")


def test_metrics_dimension_mismatch(volume_file, tmp_path):
    other = tmp_path / "other.vol"
    fileio.write_volume(other, Volume(np.zeros((4, 4, 4))))
    with open(other, "rb") as a, open(volume_file, "rb") as b:
        response = client.post("/volumes/metrics", files={"a": a, "b": b}, headers=HEADERS)
    assert response.status_code == 400


def test_metrics_zero_reference(volume_file, tmp_path):
    zero = tmp_path / "zero.vol"
    fileio.write_volume(zero, Volume(np.zeros(fileio.read_volume(volume_file).dims)))
    with open(volume_file, "rb") as a, open(zero, "rb") as b:
        response = client.post("/volumes/metrics", files={"a": a, "b": b}, headers=HEADERS)
    print(f"Response: {response.json()}")
    assert response.status_code == 400
    assert "all zeros" in response.json()["detail"]
