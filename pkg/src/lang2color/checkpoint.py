"""Single-file checkpoint container: named tensors plus a metadata record.

Layout: an 8-byte magic, a little-endian uint64 header length, a JSON
header, then the raw tensor bytes (C order, little endian). Saving is
atomic (temp file + rename); loading verifies structure and sizes and
never returns partial state.
"""

import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"L2CKPT01"


class CheckpointError(Exception):
    """Structural or consistency failure in a checkpoint file."""


def _le_dtype(arr: np.ndarray) -> str:
    dt = arr.dtype.newbyteorder("<")
    return dt.str


def save_checkpoint(path, params: dict, metadata: dict):
    """Write tensors and metadata atomically."""
    tensors = {}
    blobs = []
    offset = 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        tensors[name] = {
            "dtype": _le_dtype(arr),
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        }
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"metadata": metadata, "tensors": tensors}).encode()

    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            for raw in blobs:
                fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Read a checkpoint; returns (params, metadata)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    (header_len,) = struct.unpack("<Q", blob[len(MAGIC) : len(MAGIC) + 8])
    header_start = len(MAGIC) + 8
    if header_start + header_len > len(blob):
        raise CheckpointError(f"{path} is truncated (header)")
    try:
        header = json.loads(blob[header_start : header_start + header_len])
        tensors = header["tensors"]
        metadata = header["metadata"]
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"{path} has a corrupt header: {exc}") from exc

    data_start = header_start + header_len
    params = {}
    for name, info in tensors.items():
        start = data_start + int(info["offset"])
        end = start + int(info["nbytes"])
        if end > len(blob):
            raise CheckpointError(f"{path} is truncated (tensor {name})")
        arr = np.frombuffer(blob[start:end], dtype=np.dtype(info["dtype"]))
        expected = int(np.prod(info["shape"])) if info["shape"] else 1
        if arr.size != expected:
            raise CheckpointError(f"tensor {name} has inconsistent size")
        params[name] = arr.reshape(info["shape"]).copy()
    return params, metadata


def check_quantizer_match(metadata: dict, spec_dict: dict):
    """Refuse to use a checkpoint whose label space differs from ours."""
    stored = metadata.get("quantizer")
    if stored != spec_dict:
        raise CheckpointError(
            f"quantizer mismatch: checkpoint has {stored}, expected {spec_dict}"
        )


def strict_load(target_params: dict, source_params: dict):
    """Copy every tensor by name; any mismatch is an error."""
    missing = set(target_params) - set(source_params)
    extra = set(source_params) - set(target_params)
    if missing or extra:
        raise CheckpointError(
            f"tensor name mismatch (missing {sorted(missing)}, extra {sorted(extra)})"
        )
    for name, src in source_params.items():
        if tuple(src.shape) != tuple(target_params[name].shape):
            raise CheckpointError(
                f"tensor {name} shape {src.shape} != {target_params[name].shape}"
            )
        target_params[name] = src.astype(target_params[name].dtype, copy=True)


def warm_start_load(target_params: dict, source_params: dict, language_dim: int):
    """Load backbone conv and batch-norm tensors into a fused model.

    Tensors whose first-conv input was widened by concat fusion receive
    the source weights in their leading input channels. Everything else
    that cannot be matched is skipped. Returns a report list of
    (name, action) pairs.
    """
    report = []
    for name, src in sorted(source_params.items()):
        if not (name.startswith("block") or name.startswith("head")):
            report.append((name, "skipped: not a backbone tensor"))
            continue
        if name not in target_params:
            report.append((name, "skipped: absent in target"))
            continue
        tgt = target_params[name]
        if tuple(src.shape) == tuple(tgt.shape):
            target_params[name] = src.astype(tgt.dtype, copy=True)
            report.append((name, "loaded"))
        elif (
            src.ndim == 4
            and tgt.ndim == 4
            and src.shape[0] == tgt.shape[0]
            and src.shape[2:] == tgt.shape[2:]
            and tgt.shape[1] == src.shape[1] + language_dim
        ):
            tgt[:, : src.shape[1]] = src.astype(tgt.dtype)
            report.append((name, "partially loaded (concat-widened input)"))
        else:
            report.append((name, f"skipped: shape {src.shape} vs {tgt.shape}"))
    return report
