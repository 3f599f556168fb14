"""Time-tag files.

Binary: packed little-endian records of (uint64 timestamp in ps, uint8
channel), 9 bytes each, no header, sorted by timestamp.  CSV: header
``timestamp_ps,channel`` followed by one record per line.  Either file is
accompanied by ``<name>.meta``, a JSON document holding the duration, the
seed and the model parameters of every channel in the file.

All writers go through a temporary file in the target directory and an
atomic rename, so a failed run never leaves a partial file behind.
"""
from __future__ import annotations

import contextlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ContractError
from .photonstream import TimeTagStream

RECORD = np.dtype([("timestamp_ps", "<u8"), ("channel", "u1")])
CSV_HEADER = "timestamp_ps,channel"


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": ""})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def _records(streams) -> np.ndarray:
    n = sum(len(s) for s in streams)
    rec = np.empty(n, dtype=RECORD)
    rec["timestamp_ps"] = np.concatenate([s.tags for s in streams]) if n else []
    rec["channel"] = np.concatenate([np.full(len(s), s.channel) for s in streams]) if n else []
    order = np.lexsort((rec["channel"], rec["timestamp_ps"]))
    return rec[order]


def _meta_doc(streams) -> dict:
    return {
        "format_version": 1,
        "channels": {
            str(s.channel): {
                "duration_s": s.duration,
                "count": len(s),
                "mode_clusters": list(s.mode_clusters) if s.mode_clusters is not None else None,
                "metadata": s.metadata,
            }
            for s in streams
        },
    }


def write_tags(path, streams, fmt: str = "bin") -> None:
    """Write one or more streams to a single file plus its metadata sidecar."""
    if isinstance(streams, TimeTagStream):
        streams = [streams]
    channels = [s.channel for s in streams]
    if len(set(channels)) != len(channels):
        raise ContractError("streams written to one file need distinct channels")
    rec = _records(streams)
    if fmt == "bin":
        with atomic_write(path, "wb") as fh:
            fh.write(rec.tobytes())
    elif fmt == "csv":
        with atomic_write(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for t, c in zip(rec["timestamp_ps"].tolist(), rec["channel"].tolist()):
                fh.write(f"{t},{c}\n")
    else:
        raise ContractError(f"unknown time-tag format {fmt!r}")
    with atomic_write(meta_path(path), "w") as fh:
        json.dump(_meta_doc(streams), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_records(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if raw.startswith(CSV_HEADER.encode()):
        lines = raw.decode("utf-8").splitlines()[1:]
        rec = np.empty(len(lines), dtype=RECORD)
        try:
            for k, line in enumerate(lines):
                t, c = line.split(",")
                rec[k] = (int(t), int(c))
        except ValueError as exc:
            raise ContractError(f"{path}: malformed CSV record: {exc}") from None
        return rec
    if len(raw) % RECORD.itemsize:
        raise ContractError(f"{path}: size {len(raw)} is not a multiple of {RECORD.itemsize}")
    return np.frombuffer(raw, dtype=RECORD)


def read_tags(path) -> dict[int, TimeTagStream]:
    """Read a tag file and its sidecar; returns streams keyed by channel."""
    path = Path(path)
    rec = _read_records(path)
    mp = meta_path(path)
    try:
        doc = json.loads(mp.read_text(encoding="utf-8"))
        info = {int(k): v for k, v in doc["channels"].items()}
    except (OSError, ValueError, KeyError) as exc:
        raise ContractError(f"{mp}: missing or unreadable metadata ({exc})") from None
    present = set(np.unique(rec["channel"]).tolist())
    unknown = present - set(info)
    if unknown:
        raise ContractError(f"{path}: channels {sorted(unknown)} have no metadata")
    out = {}
    for ch, meta in sorted(info.items()):
        tags = rec["timestamp_ps"][rec["channel"] == ch].astype(np.int64)
        clusters = meta.get("mode_clusters")
        out[ch] = TimeTagStream(ch, tags, float(meta["duration_s"]),
                                mode_clusters=tuple(clusters) if clusters else None,
                                metadata=meta.get("metadata", {}))
    return out
