"""Bit-exact file formats: scans, labels, density embeddings, checkpoints.

All binary payloads are little-endian regardless of host, matching the
de-facto conventions of LiDAR dataset tooling.  Parsers reject malformed
input with positional diagnostics instead of truncating silently.
"""

from __future__ import annotations

import numpy as np

SCAN_RECORD_BYTES = 16  # x, y, z, intensity as float32
DENSITY_CSV_HEADER = "d10,d30,d50,d70"


def read_scan(path) -> np.ndarray:
    """Read an (N, 3) cloud from a .bin of float32 (x, y, z, intensity).

    The intensity channel is read and discarded: it is sensor-specific and
    the embedding never uses it.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) % SCAN_RECORD_BYTES:
        raise ValueError(
            f"truncated record at offset {len(raw) - len(raw) % SCAN_RECORD_BYTES}"
        )
    records = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    return records[:, :3].astype(np.float64)


def write_scan(cloud: np.ndarray, path) -> None:
    """Write an (N, 3) cloud as float32 (x, y, z, 0) records."""
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.ndim != 2 or cloud.shape[1] != 3:
        raise ValueError(f"expected (N, 3) cloud, got shape {cloud.shape}")
    records = np.zeros((cloud.shape[0], 4), dtype="<f4")
    records[:, :3] = cloud
    with open(path, "wb") as fh:
        fh.write(records.tobytes())


def read_labels(path, expected_n: int) -> np.ndarray:
    """Read per-point class ids: low 16 bits of little-endian uint32 words."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) % 4:
        raise ValueError(f"truncated record at offset {len(raw) - len(raw) % 4}")
    words = np.frombuffer(raw, dtype="<u4")
    if words.size != expected_n:
        raise ValueError(
            f"label count {words.size} does not match scan point count {expected_n}"
        )
    return (words & 0xFFFF).astype(np.int64)


def write_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > 0xFFFF):
        raise ValueError("class ids must fit in 16 bits")
    with open(path, "wb") as fh:
        fh.write(labels.astype("<u4").tobytes())


def write_density(values: np.ndarray, path) -> None:
    """Write an (N, C) density embedding as row-major float32."""
    values = np.asarray(values, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(values.astype("<f4").tobytes())


def read_density(path, num_channels: int = 4) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    record = 4 * num_channels
    if len(raw) % record:
        raise ValueError(f"truncated record at offset {len(raw) - len(raw) % record}")
    return np.frombuffer(raw, dtype="<f4").reshape(-1, num_channels).astype(np.float64)


def write_density_csv(values: np.ndarray, path) -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(DENSITY_CSV_HEADER + "\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_density_csv(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != DENSITY_CSV_HEADER:
            raise ValueError(
                f"line 1: expected header {DENSITY_CSV_HEADER!r}, got {header!r}"
            )
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected 4 values, got {len(parts)}")
            rows.append([float(p) for p in parts])
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


# --- checkpoints ----------------------------------------------------------
#
# ASCII header followed by raw little-endian float64 in header order:
#
#     ddfe-checkpoint 3
#     layer.w 4 16
#     layer.b 16
#     scalar
#     <binary payload>
#
# The first line carries the tensor count; each tensor line is its name
# followed by the shape (no dims for a scalar).

_CHECKPOINT_MAGIC = "ddfe-checkpoint"


def save_checkpoint(tensors: dict[str, np.ndarray], path) -> None:
    """Write named float64 arrays; insertion order is preserved on disk."""
    header_lines = [f"{_CHECKPOINT_MAGIC} {len(tensors)}"]
    payload = []
    for name, value in tensors.items():
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"tensor name {name!r} must be non-empty, no whitespace")
        arr = np.asarray(value, dtype=np.float64)
        header_lines.append(" ".join([name] + [str(d) for d in arr.shape]))
        payload.append(arr.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(("\n".join(header_lines) + "\n").encode("ascii"))
        fh.write(b"".join(payload))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        first_end = raw.index(b"\n")
    except ValueError:
        raise ValueError("truncated checkpoint: missing header") from None
    magic = raw[:first_end].decode("ascii", errors="replace").split()
    if len(magic) != 2 or magic[0] != _CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file: first line {raw[:first_end]!r}")
    count = int(magic[1])
    offset = first_end + 1
    entries = []
    for i in range(count):
        try:
            line_end = raw.index(b"\n", offset)
        except ValueError:
            raise ValueError(f"truncated checkpoint header at tensor {i}") from None
        fields = raw[offset:line_end].decode("ascii").split()
        if not fields:
            raise ValueError(f"empty header line for tensor {i}")
        entries.append((fields[0], tuple(int(d) for d in fields[1:])))
        offset = line_end + 1
    tensors: dict[str, np.ndarray] = {}
    for name, shape in entries:
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        if offset + nbytes > len(raw):
            raise ValueError(
                f"truncated checkpoint payload for tensor {name!r} at offset {offset}"
            )
        flat = np.frombuffer(raw[offset : offset + nbytes], dtype="<f8")
        tensors[name] = flat.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise ValueError(f"trailing bytes after checkpoint payload at offset {offset}")
    return tensors
