"""File formats: SST1 tensors, weight manifests and ERF heatmap exports.

SST1 layout (little endian): ``b"SST1"``, u32 rank, ``rank`` u32 extents,
then ``prod(extents)`` f64 values in row-major order.
"""
import csv
import io
import struct
from math import prod
from pathlib import Path

import numpy as np

from ssfuse.tensor import Tensor
from utils.exceptions import FormatError

MAGIC = b"SST1"
MANIFEST_NAME = "manifest.txt"


def encode_sst1(t: Tensor) -> bytes:
    header = MAGIC + struct.pack(f"<I{len(t.shape)}I", len(t.shape), *t.shape)
    return header + t.array.astype("<f8").tobytes()


def decode_sst1(blob: bytes, source="<bytes>") -> Tensor:
    if blob[:4] != MAGIC:
        raise FormatError(f"{source}: missing SST1 magic")
    if len(blob) < 8:
        raise FormatError(f"{source}: truncated header")
    (rank,) = struct.unpack_from("<I", blob, 4)
    offset = 8 + 4 * rank
    if len(blob) < offset:
        raise FormatError(f"{source}: truncated extents for rank {rank}")
    shape = struct.unpack_from(f"<{rank}I", blob, 8)
    count = prod(shape)
    if len(blob) != offset + 8 * count:
        raise FormatError(
            f"{source}: expected {offset + 8 * count} bytes for shape {shape}, got {len(blob)}"
        )
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
    try:
        return Tensor(values, shape)
    except Exception as exc:
        raise FormatError(f"{source}: {exc}") from exc


def write_sst1(path, t: Tensor):
    Path(path).write_bytes(encode_sst1(t))


def read_sst1(path) -> Tensor:
    return decode_sst1(Path(path).read_bytes(), source=str(path))


def write_manifest(directory, named_tensors):
    """Writes one SST1 file per parameter plus ``manifest.txt`` (name, file, shape)."""
    directory = Path(directory)
    lines = []
    for name, tensor in named_tensors:
        filename = f"{name}.sst"
        write_sst1(directory / filename, tensor)
        shape = "x".join(str(n) for n in tensor.shape)
        lines.append(f"{name} {filename} {shape}")
    (directory / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return directory / MANIFEST_NAME


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    params = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{path}:{number}: expected 'name file shape'")
        name, filename, shape = parts
        try:
            expected = tuple(int(n) for n in shape.split("x"))
        except ValueError:
            raise FormatError(f"{path}:{number}: bad shape {shape!r}") from None
        tensor = read_sst1(path.parent / filename)
        if tensor.shape != expected:
            raise FormatError(
                f"{path}:{number}: {filename} has shape {tensor.shape}, manifest says {expected}"
            )
        params[name] = tensor
    return params


def pgm_text(values: np.ndarray) -> str:
    """8-bit P2 graymap, values in [0, 1] scaled so 1 maps to 255."""
    H, W = values.shape
    pixels = np.clip(np.rint(values * 255.0), 0, 255).astype(int)
    rows = [" ".join(str(p) for p in row) for row in pixels]
    return "\n".join(["P2", "# ssfuse-erf", f"{W} {H}", "255", *rows]) + "\n"


def csv_text(values: np.ndarray) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in values:
        writer.writerow(repr(float(v)) for v in row)
    return buffer.getvalue()


def write_erf(stem, values: np.ndarray):
    stem = Path(stem)
    pgm, table = stem.with_suffix(".pgm"), stem.with_suffix(".csv")
    pgm.write_text(pgm_text(values), encoding="ascii")
    table.write_text(csv_text(values), encoding="ascii")
    return pgm, table
