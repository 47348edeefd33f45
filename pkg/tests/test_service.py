import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from archid import classifiers, service, synth
from archid.binfmt import ARCHITECTURES

CONTRACTS = Path(__file__).parent.parent / "contracts" / "prediction_responses.json"
API_KEY = "testkey"


@pytest.fixture(scope="module")
def model(desk_samples):
    train = [s for i, s in enumerate(desk_samples) if i % 5 != 0]
    return classifiers.train_family("naive_bayes", train)


@pytest.fixture(scope="module")
def held_out(desk_raw):
    return [r for i, r in enumerate(desk_raw) if i % 5 == 0]


@pytest.fixture(scope="module")
def client(model):
    app = service.create_app(model, api_key=API_KEY, max_upload_bytes=1 << 20)
    with TestClient(app) as c:
        yield c


def _post(client, data, key=API_KEY, path="/binary/", extra=None):
    form = {"api_key": key}
    form.update(extra or {})
    return client.post(path, files={"binary": ("sample.bin", data)}, data=form)


def test_health(client, model):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["model_family"] == "naive_bayes"
    assert body["schema_version"] == model.schema_version


def test_predict_held_out_binary(client, held_out):
    sample = held_out[0]
    resp = _post(client, sample.data)
    assert resp.status_code == 200
    body = resp.json()
    assert set(body) == {"prediction", "prediction_probability"}
    assert set(body["prediction"]) == {"architecture", "endianness", "wordsize"}
    name = body["prediction"]["architecture"]
    assert name in ARCHITECTURES
    endianness, wordsize = ARCHITECTURES[name]
    assert body["prediction"]["endianness"] == endianness
    assert body["prediction"]["wordsize"] == wordsize
    assert 0.0 <= body["prediction_probability"] <= 1.0


def test_prediction_matches_contract_shape(client, held_out):
    """Live responses are structurally identical to the recorded fixtures
    the plugin replays: same keys, same types, consistent label mapping."""
    fixtures = json.loads(CONTRACTS.read_text())
    resp = _post(client, held_out[1].data)
    body = resp.json()
    reference = fixtures[body["prediction"]["architecture"]]
    assert set(body) == set(reference)
    assert set(body["prediction"]) == set(reference["prediction"])
    for key, value in reference["prediction"].items():
        assert type(body["prediction"][key]) is type(value)
    assert isinstance(body["prediction_probability"], float)
    assert body["prediction"] == reference["prediction"]


def test_contract_fixtures_cover_all_labels():
    fixtures = json.loads(CONTRACTS.read_text())
    assert set(fixtures) == set(ARCHITECTURES)
    for name, payload in fixtures.items():
        endianness, wordsize = ARCHITECTURES[name]
        assert payload["prediction"]["endianness"] == endianness
        assert payload["prediction"]["wordsize"] == wordsize


def test_wrong_api_key_is_401(client, held_out):
    assert _post(client, held_out[0].data, key="wrong").status_code == 401


def test_missing_api_key_is_401(client, held_out):
    resp = client.post("/binary/", files={"binary": ("x.bin", held_out[0].data)})
    assert resp.status_code == 401


def test_empty_payload_is_400(client):
    assert _post(client, b"").status_code == 400


def test_missing_binary_field_is_400(client):
    resp = client.post("/binary/", data={"api_key": API_KEY})
    assert resp.status_code == 400


def test_oversized_payload_is_413(client):
    assert _post(client, b"\x90" * ((1 << 20) + 1)).status_code == 413


def test_path_without_trailing_slash(client, held_out):
    assert _post(client, held_out[0].data, path="/binary").status_code == 200


def test_code_only_mode_parses_elf(client, held_out):
    sample = held_out[2]
    elf = synth.make_elf([sample.data])
    resp = _post(client, elf, extra={"mode": "code_only"})
    assert resp.status_code == 200
    # the same bytes uploaded raw in code_only mode cannot be parsed
    resp = _post(client, sample.data, extra={"mode": "code_only"})
    assert resp.status_code == 400


def test_identical_requests_identical_responses(client, held_out):
    a = _post(client, held_out[3].data).json()
    b = _post(client, held_out[3].data).json()
    assert a == b


def test_concurrent_requests(client, held_out):
    def one(i):
        if i % 2 == 0:
            return client.get("/health").status_code
        return _post(client, held_out[i % len(held_out)].data).status_code

    with ThreadPoolExecutor(max_workers=8) as pool:
        statuses = list(pool.map(one, range(24)))
    assert all(s == 200 for s in statuses)
