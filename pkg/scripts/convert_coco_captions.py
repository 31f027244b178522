#!/usr/bin/env python3
"""Convert a COCO-style captions annotation file into a JSONL manifest.

Input is the standard annotation layout: {"images": [{"id", "file_name"}],
"annotations": [{"image_id", "caption"}]}. Every image keeps all of its
captions in one manifest record. Images are referenced relative to the
manifest location, so keep the manifest next to (or above) the image
directory. No image data is shipped or copied.

Usage:
  python scripts/convert_coco_captions.py \
      --captions captions_train.json --images-dir train_images \
      --split train --out train_manifest.jsonl
"""

import argparse
import json
import os
from collections import defaultdict
from pathlib import Path


def convert(captions_path: Path, images_dir: Path, split: str, out_path: Path) -> int:
    with open(captions_path, encoding="utf-8") as fh:
        payload = json.load(fh)

    by_image = defaultdict(list)
    for ann in payload.get("annotations", []):
        caption = str(ann.get("caption", "")).strip()
        if caption:
            by_image[ann["image_id"]].append(caption)

    out_dir = out_path.parent.resolve()
    written = 0
    skipped = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for image in payload.get("images", []):
            captions = by_image.get(image["id"])
            if not captions:
                skipped += 1
                continue
            image_path = (images_dir / image["file_name"]).resolve()
            if not image_path.exists():
                skipped += 1
                continue
            record = {
                "image_id": str(image["id"]),
                "image_path": os.path.relpath(image_path, out_dir),
                "captions": captions,
                "split": split,
            }
            out.write(json.dumps(record, sort_keys=True) + "\n")
            written += 1
    print(f"wrote {written} records to {out_path} ({skipped} images skipped)")
    return written


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--captions", type=Path, required=True,
                        help="COCO captions annotation JSON")
    parser.add_argument("--images-dir", type=Path, required=True)
    parser.add_argument("--split", default="train", choices=["train", "val", "test"])
    parser.add_argument("--out", type=Path, required=True)
    args = parser.parse_args()
    convert(args.captions, args.images_dir, args.split, args.out)


if __name__ == "__main__":
    main()
