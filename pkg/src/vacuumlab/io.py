"""Atomic, byte-reproducible file output and the checkpoint format."""
from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError

CHECKPOINT_MAGIC = b"VACUUMLAB-CKPT\n"
CHECKPOINT_VERSION = 1


def fmt(x) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def atomic_write_bytes(path, data: bytes):
    """Write via a temporary sibling and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj):
    write_text(path, dumps(obj))


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows):
    write_text(path, csv_text(header, rows))


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    rows = [[float(v) if v else math.nan for v in ln.split(",")] for ln in lines[1:]]
    return header, rows


def tree_digest(root) -> dict:
    """sha256 of every file under ``root`` keyed by relative path."""
    root = Path(root)
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[p.relative_to(root).as_posix()] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------
def _enc(a) -> dict:
    a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d) -> np.ndarray:
    return np.frombuffer(base64.b64decode(d["data"]), dtype="<f8").reshape(d["shape"]).copy()


def checkpoint_bytes(meta: dict, arrays: dict) -> bytes:
    """Header (magic, version, sha256 of payload) followed by a JSON payload
    holding ``meta`` and float64 arrays stored as little-endian base64."""
    payload = json.dumps({"meta": to_jsonable(meta),
                          "arrays": {k: _enc(v) for k, v in arrays.items()}},
                         sort_keys=True).encode("utf-8")
    digest = hashlib.sha256(payload).hexdigest().encode("ascii")
    head = CHECKPOINT_MAGIC + b"version %d\n" % CHECKPOINT_VERSION + b"sha256 " + digest + b"\n"
    return head + payload


def save_checkpoint(path, meta: dict, arrays: dict):
    atomic_write_bytes(path, checkpoint_bytes(meta, arrays))


def load_checkpoint(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint")
    rest = raw[len(CHECKPOINT_MAGIC):]
    try:
        vline, sline, payload = rest.split(b"\n", 2)
        version = int(vline.split()[1])
        digest = sline.split()[1].decode("ascii")
    except (ValueError, IndexError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint header") from exc
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version} is not supported "
                              f"(expected {CHECKPOINT_VERSION})")
    if hashlib.sha256(payload).hexdigest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch, checkpoint is corrupted")
    try:
        obj = json.loads(payload)
        arrays = {k: _dec(v) for k, v in obj["arrays"].items()}
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"{path}: unreadable payload") from exc
    return obj["meta"], arrays
