"""Binary network checkpoints and multi-network manifests.

Single network layout (all little-endian):

    b"A7CKPT"            magic
    u32                  format version
    u32                  layer count L
    u32 * (L + 1)        layer sizes
    per layer:           W as row-major f64 (size[i] x size[i+1]), then b as f64

A manifest is a JSON file naming several such files plus the
architecture flags (dropout rate, output activation) that the binary
header does not carry.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from core.config import CHECKPOINT_MAGIC, CHECKPOINT_SUFFIX, CHECKPOINT_VERSION
from core.errors import CheckpointError
from nn.mlp import Mlp

MANIFEST_FILE = "manifest.json"
_F64 = np.dtype("<f8")


def mlp_to_bytes(net: Mlp) -> bytes:
    header = CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, net.n_layers)
    header += struct.pack(f"<{len(net.layer_sizes)}I", *net.layer_sizes)
    body = b"".join(
        np.ascontiguousarray(arr, dtype=_F64).tobytes() for arr in net.params
    )
    return header + body


def mlp_from_bytes(
    data: bytes, *, dropout_rate: float = 0.0, activate_output: bool = False,
) -> Mlp:
    magic_len = len(CHECKPOINT_MAGIC)
    if data[:magic_len] != CHECKPOINT_MAGIC:
        raise CheckpointError("not an A7 checkpoint (bad magic bytes)")
    offset = magic_len
    try:
        version, n_layers = struct.unpack_from("<II", data, offset)
        offset += 8
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        sizes = list(struct.unpack_from(f"<{n_layers + 1}I", data, offset))
        offset += 4 * (n_layers + 1)
    except struct.error as e:
        raise CheckpointError(f"truncated checkpoint header: {e}") from e

    net = Mlp(sizes, dropout_rate=dropout_rate, activate_output=activate_output)
    params: list[np.ndarray] = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        for shape in ((fan_in, fan_out), (fan_out,)):
            count = int(np.prod(shape))
            end = offset + count * _F64.itemsize
            if end > len(data):
                raise CheckpointError("truncated checkpoint body")
            flat = np.frombuffer(data, dtype=_F64, count=count, offset=offset)
            params.append(flat.reshape(shape))
            offset = end
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after checkpoint body")
    net.set_params(params)
    return net


def save_mlp(net: Mlp, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(mlp_to_bytes(net))
    except OSError as e:
        raise CheckpointError(f"cannot write checkpoint {path}: {e}") from e


def load_mlp(path: Path, *, dropout_rate: float = 0.0, activate_output: bool = False) -> Mlp:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    try:
        return mlp_from_bytes(data, dropout_rate=dropout_rate, activate_output=activate_output)
    except CheckpointError as e:
        raise CheckpointError(f"{path}: {e}") from e


def save_networks(
    directory: Path, networks: dict[str, Mlp], meta: dict[str, Any] | None = None,
) -> Path:
    """Write each network plus a manifest.json; returns the manifest path."""
    entries: dict[str, dict[str, Any]] = {}
    for name, net in networks.items():
        filename = f"{name}{CHECKPOINT_SUFFIX}"
        save_mlp(net, directory / filename)
        entries[name] = {
            "file": filename,
            "dropout_rate": net.dropout_rate,
            "activate_output": net.activate_output,
        }
    manifest = {
        "format": "a7-networks",
        "version": CHECKPOINT_VERSION,
        "networks": entries,
        "meta": meta or {},
    }
    path = directory / MANIFEST_FILE
    try:
        path.write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as e:
        raise CheckpointError(f"cannot write manifest {path}: {e}") from e
    return path


def load_networks(manifest_path: Path) -> tuple[dict[str, Mlp], dict[str, Any]]:
    """Inverse of save_networks: (networks by name, meta)."""
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_FILE
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read manifest {manifest_path}: {e}") from e
    if manifest.get("format") != "a7-networks":
        raise CheckpointError(f"{manifest_path}: not an a7 network manifest")

    networks: dict[str, Mlp] = {}
    for name, entry in manifest.get("networks", {}).items():
        networks[name] = load_mlp(
            manifest_path.parent / entry["file"],
            dropout_rate=float(entry.get("dropout_rate", 0.0)),
            activate_output=bool(entry.get("activate_output", False)),
        )
    return networks, manifest.get("meta", {})
