import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from lang2color.inference import ModelBundle
from lang2color.service import create_app


@pytest.fixture(scope="module")
def client(tiny_trained):
    bundle = ModelBundle.load(tiny_trained["checkpoint"])
    app = create_app(bundle)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def image_b64(tiny_trained):
    path = tiny_trained["dataset"]["root"] / "images" / "sample_00000.png"
    return base64.b64encode(path.read_bytes()).decode("ascii")


@pytest.fixture(scope="module")
def mask_b64(tiny_trained):
    path = tiny_trained["dataset"]["root"] / "masks" / "sample_00000.png"
    return base64.b64encode(path.read_bytes()).decode("ascii")


def _png_b64(array, mode="RGB"):
    buf = io.BytesIO()
    Image.fromarray(array, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["fusion_mode"] == "film"
    assert body["model_id"]


def test_lexicon(client):
    body = client.get("/lexicon").json()
    assert len(body["words"]) == 10
    assert "red" in body["words"]
    assert len(body["canonical_ab"]["red"]) == 2


def test_colorize_roundtrip(client, image_b64):
    resp = client.post("/colorize", json={"image": image_b64, "caption": "a red circle"})
    assert resp.status_code == 200
    body = resp.json()
    png = base64.b64decode(body["image"])
    out = np.asarray(Image.open(io.BytesIO(png)))
    assert out.shape == (32, 32, 3)
    assert body["timing_ms"] > 0


def test_colorize_deterministic(client, image_b64):
    payload = {"image": image_b64, "caption": "a green circle"}
    r1 = client.post("/colorize", json=payload).json()
    r2 = client.post("/colorize", json=payload).json()
    assert r1["image"] == r2["image"]


def test_colorize_heatmaps(client, image_b64):
    resp = client.post(
        "/colorize",
        json={"image": image_b64, "caption": "a red circle", "return_heatmaps": True},
    )
    body = resp.json()
    assert sorted(body["heatmaps"]) == ["6", "7", "8"]
    heat = np.asarray(Image.open(io.BytesIO(base64.b64decode(body["heatmaps"]["6"]))))
    assert heat.ndim == 2


def test_colorize_empty_caption_ok(client, image_b64):
    resp = client.post("/colorize", json={"image": image_b64, "caption": ""})
    assert resp.status_code == 200


def test_colorize_one_pixel_image(client):
    tiny = _png_b64(np.full((1, 1), 128, dtype=np.uint8), mode="L")
    resp = client.post("/colorize", json={"image": tiny, "caption": "a red dot"})
    assert resp.status_code == 200
    out = Image.open(io.BytesIO(base64.b64decode(resp.json()["image"])))
    assert out.size == (1, 1)


def test_color_input_is_decolorized(client):
    rgb = np.zeros((16, 16, 3), dtype=np.uint8)
    rgb[..., 0] = 200  # strongly red input
    resp = client.post("/colorize", json={"image": _png_b64(rgb), "caption": "a blue square"})
    assert resp.status_code == 200


def test_malformed_json_gives_400(client):
    resp = client.post(
        "/colorize", content=b"{not json", headers={"content-type": "application/json"}
    )
    assert resp.status_code == 400


def test_missing_field_gives_400_with_field_name(client):
    resp = client.post("/colorize", json={"caption": "x"})
    assert resp.status_code == 400
    fields = [e["field"] for e in resp.json()["errors"]]
    assert any("image" in f for f in fields)


def test_overlong_caption_gives_400(client, image_b64):
    resp = client.post("/colorize", json={"image": image_b64, "caption": "x" * 600})
    assert resp.status_code == 400


def test_invalid_base64_gives_400(client):
    resp = client.post("/colorize", json={"image": "@@@@", "caption": "a"})
    assert resp.status_code == 400


def test_undecodable_image_gives_400(client):
    junk = base64.b64encode(b"not an image").decode()
    resp = client.post("/colorize", json={"image": junk, "caption": "a"})
    assert resp.status_code == 400


def test_oversized_image_gives_413(client):
    big = np.zeros((2500, 2500), dtype=np.uint8)  # 18.75 MB decoded as RGB
    resp = client.post("/colorize", json={"image": _png_b64(big, mode="L"), "caption": "a"})
    assert resp.status_code == 413


def test_manipulate_variants(client, image_b64, mask_b64):
    resp = client.post(
        "/manipulate",
        json={
            "image": image_b64,
            "base_caption": "a red circle on a grey background",
            "words": ["red", "green", "blue"],
            "mask": mask_b64,
        },
    )
    assert resp.status_code == 200
    variants = resp.json()["variants"]
    assert [v["word"] for v in variants] == ["red", "green", "blue"]
    for v in variants:
        assert "region_mean_ab" in v
        assert v["caption"].startswith(f"a {v['word']} circle")


def test_manipulate_requires_two_words(client, image_b64):
    resp = client.post(
        "/manipulate",
        json={"image": image_b64, "base_caption": "a red circle", "words": ["red", "red"]},
    )
    assert resp.status_code == 400


def test_manipulate_rejects_unknown_word(client, image_b64):
    resp = client.post(
        "/manipulate",
        json={"image": image_b64, "base_caption": "a red circle", "words": ["red", "cyan"]},
    )
    assert resp.status_code == 400
