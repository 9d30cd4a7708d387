"""Binary checkpoint files.

Layout::

    b"IRLSR1\\0"                      7-byte magic
    uint64 little-endian             header length in bytes
    UTF-8 JSON header                format version, model config, frozen flags,
                                     train state, history, tensor directory
    float32 little-endian payloads   one per directory entry, in directory order

Each directory entry records ``name``, ``shape``, ``offset`` (relative to the
first payload byte) and ``nbytes``.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..model import Branch, ModelConfig, build_stack
from ..tensor import AdamState

MAGIC = b"IRLSR1\0"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Base class for unreadable checkpoint files."""


class CorruptCheckpointError(CheckpointError):
    """Bad magic, malformed header or truncated tensor payload."""


class VersionMismatchError(CheckpointError):
    """The file was written by an incompatible format version."""


@dataclass
class TrainState:
    stage: int = 0
    step: int = 0
    best_psnr: float = float("-inf")
    adam: AdamState = field(default_factory=AdamState)
    rng_state: dict | None = None
    losses: list = field(default_factory=list)


@dataclass
class Checkpoint:
    model_config: ModelConfig
    branches: list
    state: TrainState | None = None
    history: list = field(default_factory=list)
    stage_seconds: list = field(default_factory=list)
    stage_configs: list = field(default_factory=list)
    version: int = FORMAT_VERSION

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def scale(self) -> int:
        return self.model_config.scale


def _directory(ckpt: Checkpoint):
    arrays = []
    for b in ckpt.branches:
        for name, p in b.params.items():
            arrays.append((f"branch{b.spec.index}/{name}", p.data))
    if ckpt.state is not None:
        for k, (m, v) in enumerate(zip(ckpt.state.adam.m, ckpt.state.adam.v)):
            arrays.append((f"adam/m/{k}", m))
            arrays.append((f"adam/v/{k}", v))
    return arrays


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write atomically (temp file + rename) so readers never see a partial file."""
    entries, payloads, offset = [], [], 0
    for name, arr in _directory(ckpt):
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset,
                        "nbytes": len(raw)})
        payloads.append(raw)
        offset += len(raw)
    state = None
    if ckpt.state is not None:
        s = ckpt.state
        state = {"stage": s.stage, "step": s.step, "best_psnr": s.best_psnr,
                 "adam_t": s.adam.t, "rng_state": s.rng_state, "losses": s.losses}
    header = {
        "format_version": ckpt.version,
        "model_config": ckpt.model_config.to_dict(),
        "n_branches": ckpt.n_branches,
        "frozen": [b.frozen for b in ckpt.branches],
        "train_state": state,
        "history": ckpt.history,
        "stage_seconds": ckpt.stage_seconds,
        "stage_configs": ckpt.stage_configs,
        "payload_bytes": offset,
        "tensors": entries,
    }
    blob = json.dumps(header, sort_keys=True, allow_nan=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for raw in payloads:
            fh.write(raw)
    os.replace(tmp, path)


def read_header(path) -> tuple[dict, int]:
    """Parse and validate the header; returns it with the payload start offset."""
    try:
        with open(path, "rb") as fh:
            magic = fh.read(len(MAGIC))
            if magic != MAGIC:
                raise CorruptCheckpointError(f"{path}: not a checkpoint (bad magic bytes)")
            raw_len = fh.read(8)
            if len(raw_len) != 8:
                raise CorruptCheckpointError(f"{path}: truncated header")
            (n,) = struct.unpack("<Q", raw_len)
            blob = fh.read(n)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) != n:
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: malformed header ({exc})") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, this build reads version {FORMAT_VERSION}"
        )
    return header, len(MAGIC) + 8 + n


def load_checkpoint(path) -> Checkpoint:
    header, start = read_header(path)
    size = os.path.getsize(path)
    need = header.get("payload_bytes", 0)
    if size - start < need:
        raise CorruptCheckpointError(
            f"{path}: truncated tensor payload ({size - start} of {need} bytes present)"
        )
    with open(path, "rb") as fh:
        fh.seek(start)
        payload = fh.read(need)
    tensors = {}
    for e in header["tensors"]:
        end = e["offset"] + e["nbytes"]
        if end > len(payload) or e["nbytes"] != 4 * int(np.prod(e["shape"], dtype=np.int64)):
            raise CorruptCheckpointError(f"{path}: bad payload extent for {e['name']}")
        arr = np.frombuffer(payload, dtype="<f4", count=e["nbytes"] // 4, offset=e["offset"])
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(np.float32)

    try:
        cfg = ModelConfig.from_dict(header["model_config"])
    except Exception as exc:
        raise CorruptCheckpointError(f"{path}: invalid model config ({exc})") from exc
    branches = build_stack(cfg, header["n_branches"])
    for b, frozen in zip(branches, header["frozen"]):
        for name, p in b.params.items():
            key = f"branch{b.spec.index}/{name}"
            if key not in tensors or tensors[key].shape != p.shape:
                raise CorruptCheckpointError(f"{path}: missing or misshaped tensor {key}")
            p.data = tensors[key]
            p.requires_grad = not frozen
        b.frozen = frozen

    state = None
    s = header.get("train_state")
    if s is not None:
        k, ms, vs = 0, [], []
        while f"adam/m/{k}" in tensors:
            ms.append(tensors[f"adam/m/{k}"])
            vs.append(tensors[f"adam/v/{k}"])
            k += 1
        state = TrainState(s["stage"], s["step"], s["best_psnr"], AdamState(ms, vs, s["adam_t"]),
                           s.get("rng_state"), s.get("losses", []))
    return Checkpoint(cfg, branches, state, header.get("history", []),
                      header.get("stage_seconds", []), header.get("stage_configs", []),
                      header["format_version"])


def branch_arrays(branches: list) -> list:
    return [p.data.copy() for b in branches for p in b.params.values()]


def copy_branch_params(src: Branch, dst: Branch) -> None:
    for name, p in src.params.items():
        dst.params[name].data = p.data.copy()
