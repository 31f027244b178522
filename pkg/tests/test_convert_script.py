import importlib.util
import json
import sys
from pathlib import Path

import numpy as np

from lang2color import colorspace as cs
from lang2color import data

SCRIPT = Path(__file__).resolve().parents[1] / "scripts" / "convert_coco_captions.py"


def _load_converter():
    spec = importlib.util.spec_from_file_location("convert_coco_captions", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    sys.modules[spec.name] = module
    spec.loader.exec_module(module)
    return module


def test_converted_manifest_loads(tmp_path):
    images = tmp_path / "imgs"
    images.mkdir()
    rng = np.random.default_rng(0)
    for i in range(3):
        cs.save_image(images / f"img_{i}.jpg",
                      rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))

    payload = {
        "images": [
            {"id": 10, "file_name": "img_0.jpg"},
            {"id": 11, "file_name": "img_1.jpg"},
            {"id": 12, "file_name": "missing.jpg"},
            {"id": 13, "file_name": "img_2.jpg"},  # no captions
        ],
        "annotations": [
            {"image_id": 10, "caption": "a red kite in a blue sky"},
            {"image_id": 10, "caption": "someone flies a kite"},
            {"image_id": 11, "caption": "a green field"},
            {"image_id": 12, "caption": "won't make it"},
        ],
    }
    captions_path = tmp_path / "captions.json"
    captions_path.write_text(json.dumps(payload))

    converter = _load_converter()
    out = tmp_path / "manifest.jsonl"
    written = converter.convert(captions_path, images, "val", out)
    assert written == 2

    records = data.load_manifest(out)
    assert [r.image_id for r in records] == ["10", "11"]
    assert records[0].captions == ["a red kite in a blue sky", "someone flies a kite"]
    assert all(r.split == "val" for r in records)
