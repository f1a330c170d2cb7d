"""Self-describing model container.

Layout: magic `JWPR` | format version (u32 LE) | header length (u32 LE) |
header JSON | parameter blob (little-endian float64 arrays, concatenated in
header order) | CRC32 of everything preceding (u32 LE). The header carries
the model kind, its config snapshot, column labels, and array shapes.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptModelFile, VersionMismatch
from ..features.catalog import FeatureDescriptor
from ..features.normalize import NormalizerState
from .lstm import LstmConfig, LstmModel, LstmParams
from .svm import SvmConfig, SvmModel

MAGIC = b"JWPR"
FORMAT_VERSION = 1

_LSTM_ARRAYS = ("wx1", "wh1", "b1", "wx2", "wh2", "b2", "wd", "bd")


def _collect(model) -> tuple[str, dict, list[tuple[str, np.ndarray]]]:
    if isinstance(model, SvmModel):
        arrays = [("weights", model.weights)]
        extra = {
            "bias": model.bias,
            "platt_a": model.platt_a,
            "platt_b": model.platt_b,
            "columns": [c.column() for c in model.columns],
        }
        kind = "svm"
    elif isinstance(model, LstmModel):
        arrays = [(name, getattr(model.params, name)) for name in _LSTM_ARRAYS]
        extra = {"columns": list(model.columns)}
        kind = "lstm"
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    if model.normalizer is not None:
        arrays.append(("norm_mean", model.normalizer.mean))
        arrays.append(("norm_std", model.normalizer.std))
    extra["config"] = dataclasses.asdict(model.config)
    return kind, extra, arrays


def save_model(model, path) -> None:
    kind, extra, arrays = _collect(model)
    header = {
        "kind": kind,
        "extra": extra,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    body = MAGIC + struct.pack("<II", FORMAT_VERSION, len(header_bytes)) + header_bytes + blob
    payload = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)


def load_model(path):
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise CorruptModelFile(f"{path}: bad magic")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version > FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version} > supported {FORMAT_VERSION}")
    body_end = len(raw) - 4
    if body_end < 12 + header_len:
        raise CorruptModelFile(f"{path}: truncated header")
    (stored_crc,) = struct.unpack("<I", raw[body_end:])
    if zlib.crc32(raw[:body_end]) & 0xFFFFFFFF != stored_crc:
        raise CorruptModelFile(f"{path}: checksum mismatch")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CorruptModelFile(f"{path}: unreadable header: {err}") from None

    arrays = {}
    pos = 12 + header_len
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * 8
        if pos + nbytes > body_end:
            raise CorruptModelFile(f"{path}: truncated parameter blob")
        arrays[spec["name"]] = np.frombuffer(raw[pos : pos + nbytes], dtype="<f8").reshape(spec["shape"]).copy()
        pos += nbytes
    if pos != body_end:
        raise CorruptModelFile(f"{path}: trailing bytes in parameter blob")

    extra = header["extra"]
    normalizer = None
    if "norm_mean" in arrays:
        normalizer = NormalizerState(mean=arrays["norm_mean"], std=arrays["norm_std"])

    if header["kind"] == "svm":
        cfg = SvmConfig(**extra["config"])
        columns = tuple(FeatureDescriptor.from_column(c) for c in extra["columns"])
        return SvmModel(
            weights=arrays["weights"],
            bias=float(extra["bias"]),
            platt_a=float(extra["platt_a"]),
            platt_b=float(extra["platt_b"]),
            normalizer=normalizer,
            columns=columns,
            config=cfg,
        )
    if header["kind"] == "lstm":
        cfg = LstmConfig(**extra["config"])
        dtype = np.dtype(cfg.dtype)
        params = LstmParams(*[arrays[n].astype(dtype) for n in _LSTM_ARRAYS])
        return LstmModel(params=params, config=cfg, normalizer=normalizer, columns=tuple(extra["columns"]))
    raise CorruptModelFile(f"{path}: unknown model kind {header['kind']!r}")
