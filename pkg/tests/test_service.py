import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from clickadapt import (
    AdaptationConfig,
    ClickSegmenter,
    LabelMask,
    ModelSpec,
    SyntheticDomainSpec,
    generate_domain,
    save_checkpoint,
)
from clickadapt.dataio import image_to_png_bytes, png_bytes_to_mask, save_dataset
from clickadapt.service import (
    ServiceSettings,
    create_app,
    decode_mask_rle,
    encode_mask_rle,
)

CFG = AdaptationConfig(rng_seed=0, click_budget=4)


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    data_dir = root / "data"
    samples = generate_domain(
        SyntheticDomainSpec(family="multi-blob", count=2, seed=300, domain_tag="demo")
    )
    save_dataset(samples, data_dir, 2, "demo", "hash")
    ckpt = root / "model.ckpt"
    save_checkpoint(ClickSegmenter(ModelSpec(), seed=21), ckpt)
    settings = ServiceSettings(checkpoint=str(ckpt), dataset=str(data_dir), config=CFG)
    app = create_app(settings)
    client = TestClient(app)
    return client, samples, ckpt


def _open_session(client, samples, **overrides):
    payload = {"v": 1, "dataset_id": samples[0].image_id}
    payload.update(overrides)
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 201, resp.text
    return resp.json()


def _fg_pixels(sample):
    return np.argwhere(sample.mask.labels == 1)


class TestRle:
    def test_round_trip(self):
        labels = np.random.default_rng(0).integers(0, 3, size=(13, 9))
        mask = LabelMask(labels, 3)
        encoded = encode_mask_rle(mask)
        assert encoded["v"] == 1
        back = decode_mask_rle(encoded, 3)
        np.testing.assert_array_equal(back.labels, labels)

    def test_runs_cover_raster(self):
        mask = LabelMask(np.zeros((4, 4), dtype=int), 2)
        encoded = encode_mask_rle(mask)
        assert encoded["runs"] == [[0, 16]]


class TestSessions:
    def test_status_reports_checkpoint(self, served):
        client, _, _ = served
        status = client.get("/status").json()
        assert status["model_loaded"] is True
        assert status["num_classes"] == 2
        assert status["checkpoint_id"]

    def test_dataset_session_flow(self, served):
        client, samples, _ = served
        info = _open_session(client, samples)
        assert info["evaluation"] is True
        assert info["height"] == 64
        sid = info["session_id"]
        v0 = info["model_version"]

        fg = _fg_pixels(samples[0])
        first = client.post(
            f"/sessions/{sid}/clicks",
            json={"v": 1, "row": int(fg[0, 0]), "col": int(fg[0, 1]), "class_label": 1},
        ).json()
        assert first["t"] == 1
        assert first["model_version"] == v0  # localization is inference only
        mask = decode_mask_rle(first["mask"], 2)
        assert mask.labels.shape == (64, 64)
        assert first["timings"]["total_s"] < 1.0

        second = client.post(
            f"/sessions/{sid}/clicks",
            json={"v": 1, "row": int(fg[-1, 0]), "col": int(fg[-1, 1]), "class_label": 1},
        ).json()
        assert second["t"] == 2
        assert second["model_version"] == v0 + 1  # one MI update

        png = client.get(f"/sessions/{sid}/mask.png")
        assert png.status_code == 200
        served_mask = png_bytes_to_mask(png.content, 2)
        np.testing.assert_array_equal(
            served_mask.labels, decode_mask_rle(second["mask"], 2).labels
        )

        done = client.post(f"/sessions/{sid}/finish", json={"v": 1, "accept": True}).json()
        assert done["updates_applied"] in (1, 2)
        assert "dice" in done  # dataset-backed sessions report dice
        assert done["model_version"] == v0 + 1 + done["updates_applied"]

        # the session is closed now
        resp = client.post(
            f"/sessions/{sid}/clicks", json={"v": 1, "row": 1, "col": 1, "class_label": 0}
        )
        assert resp.status_code == 404

    def test_upload_session(self, served):
        client, samples, _ = served
        png = image_to_png_bytes(samples[1].image)
        info = _open_session(
            client, samples, dataset_id=None,
            image_b64=base64.b64encode(png).decode(),
        )
        assert info["evaluation"] is False

    def test_reject_finish_before_clicks(self, served):
        client, samples, _ = served
        sid = _open_session(client, samples)["session_id"]
        resp = client.post(f"/sessions/{sid}/finish", json={"v": 1, "accept": True})
        assert resp.status_code == 400

    def test_reject_finish_declined_applies_nothing(self, served):
        client, samples, _ = served
        info = _open_session(client, samples)
        sid = info["session_id"]
        fg = _fg_pixels(samples[0])
        client.post(f"/sessions/{sid}/clicks",
                    json={"v": 1, "row": int(fg[0, 0]), "col": int(fg[0, 1]), "class_label": 1})
        done = client.post(f"/sessions/{sid}/finish", json={"v": 1, "accept": False}).json()
        assert done["updates_applied"] == 0

    def test_out_of_bounds_click(self, served):
        client, samples, _ = served
        sid = _open_session(client, samples)["session_id"]
        resp = client.post(
            f"/sessions/{sid}/clicks", json={"v": 1, "row": 200, "col": 2, "class_label": 1}
        )
        assert resp.status_code == 400

    def test_duplicate_pixel_rejected(self, served):
        client, samples, _ = served
        sid = _open_session(client, samples)["session_id"]
        fg = _fg_pixels(samples[0])
        body = {"v": 1, "row": int(fg[0, 0]), "col": int(fg[0, 1]), "class_label": 1}
        assert client.post(f"/sessions/{sid}/clicks", json=body).status_code == 200
        assert client.post(f"/sessions/{sid}/clicks", json=body).status_code == 400

    def test_unknown_session(self, served):
        client, _, _ = served
        resp = client.post(
            "/sessions/zzz/clicks", json={"v": 1, "row": 1, "col": 1, "class_label": 0}
        )
        assert resp.status_code == 404

    def test_unknown_dataset_id(self, served):
        client, _, _ = served
        resp = client.post("/sessions", json={"v": 1, "dataset_id": "missing"})
        assert resp.status_code == 400

    def test_bad_base64(self, served):
        client, _, _ = served
        resp = client.post("/sessions", json={"v": 1, "image_b64": "@@@not-base64@@@"})
        assert resp.status_code == 400

    def test_wire_version_checked(self, served):
        client, samples, _ = served
        resp = client.post("/sessions", json={"v": 2, "dataset_id": samples[0].image_id})
        assert resp.status_code == 400

    def test_concurrent_click_rejected(self, served):
        client, samples, _ = served
        sid = _open_session(client, samples)["session_id"]
        core = client.app.state.core
        session = core.sessions[sid]
        assert session.lock.acquire(blocking=False)
        try:
            resp = client.post(
                f"/sessions/{sid}/clicks", json={"v": 1, "row": 1, "col": 1, "class_label": 0}
            )
            assert resp.status_code == 409
        finally:
            session.lock.release()

    def test_config_overrides_per_session(self, served):
        client, samples, _ = served
        info = _open_session(client, samples, config={"dfl_mi": False, "ccgl_mi": False})
        sid = info["session_id"]
        fg = _fg_pixels(samples[0])
        v0 = info["model_version"]
        client.post(f"/sessions/{sid}/clicks",
                    json={"v": 1, "row": int(fg[0, 0]), "col": int(fg[0, 1]), "class_label": 1})
        second = client.post(
            f"/sessions/{sid}/clicks",
            json={"v": 1, "row": int(fg[-1, 0]), "col": int(fg[-1, 1]), "class_label": 1},
        ).json()
        assert second["model_version"] == v0  # MI disabled: no update

    def test_bad_config_overrides(self, served):
        client, samples, _ = served
        resp = client.post(
            "/sessions", json={"v": 1, "dataset_id": samples[0].image_id,
                               "config": {"nonsense": 1}},
        )
        assert resp.status_code == 400


class TestModelManagement:
    def test_no_checkpoint_service(self):
        app = create_app(ServiceSettings(config=CFG))
        client = TestClient(app)
        status = client.get("/status").json()
        assert status["model_loaded"] is False
        resp = client.post("/sessions", json={"v": 1, "dataset_id": "x"})
        assert resp.status_code == 503

    def test_load_checkpoint_by_path(self, served, tmp_path):
        _, _, ckpt = served
        app = create_app(ServiceSettings(config=CFG))
        client = TestClient(app)
        resp = client.post("/model/checkpoint", json={"v": 1, "path": str(ckpt)})
        assert resp.status_code == 200
        assert client.get("/status").json()["model_loaded"] is True

    def test_load_checkpoint_by_blob(self, served):
        _, _, ckpt = served
        app = create_app(ServiceSettings(config=CFG))
        client = TestClient(app)
        blob = base64.b64encode(ckpt.read_bytes()).decode()
        resp = client.post("/model/checkpoint", json={"v": 1, "blob_b64": blob})
        assert resp.status_code == 200

    def test_load_bad_checkpoint(self):
        app = create_app(ServiceSettings(config=CFG))
        client = TestClient(app)
        blob = base64.b64encode(b"garbage").decode()
        resp = client.post("/model/checkpoint", json={"v": 1, "blob_b64": blob})
        assert resp.status_code == 400
