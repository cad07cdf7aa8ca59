"""On-disk formats: Matrix Market input, activation files, EIEC containers, stats.

EIEC layout (little-endian)::

    magic        4s   b"EIEC"
    version      u16  1
    rows         u32
    cols         u32
    n_pe         u32
    tile_cols    u32  columns per tile; equal to cols when untiled
    frac_bits    u8
    reserved     u8   0
    codebook     16 x i16
    for each column tile, for each PE:
        p        (tile width + 1) x u16
        entries  p[-1] bytes, low nibble v, high nibble z
    crc32        u32  over every preceding byte
"""
from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
import zlib

import numpy as np
import scipy.io
import scipy.sparse

from .compress import Codebook
from .csc import InterleavedCsc, PeSlice, TiledCsc, tiles_of, validate
from .errors import FormatError
from .fixedpoint import ActivationVector, FixedPointFormat, Q8_8, quantize_activations

MAGIC = b"EIEC"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIIBB16h")
_CRC = struct.Struct("<I")
RAW_ACT_MAGIC = b"EIEA"


def atomic_write(path, data):
    """Write bytes or text via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# Matrix Market

def read_matrix_market(path) -> np.ndarray:
    m = scipy.io.mmread(path)
    if scipy.sparse.issparse(m):
        m = m.toarray()
    return np.asarray(m, dtype=np.float64)


def write_matrix_market(path, w, field: str = "real"):
    w = np.asarray(w)
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, w, field=field)
    atomic_write(path, buf.getvalue())


# activations

def format_activations_text(a: ActivationVector) -> str:
    return "".join(f"{v!r}\n" for v in a.values.tolist())


def parse_activations_text(text: str, fmt: FixedPointFormat = Q8_8) -> ActivationVector:
    vals = [float(tok) for tok in text.split()]
    return quantize_activations(np.array(vals, dtype=np.float64), fmt)


def format_activations_raw(a: ActivationVector) -> bytes:
    header = f"{RAW_ACT_MAGIC.decode()} {len(a)} {a.fmt.fraction_bits}\n".encode()
    return header + a.raw.astype("<i2").tobytes()


def parse_activations_raw(data: bytes) -> ActivationVector:
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("raw activation file has no header line")
    parts = data[:nl].split()
    if len(parts) != 3 or parts[0] != RAW_ACT_MAGIC:
        raise FormatError("bad raw activation header")
    n, f = int(parts[1]), int(parts[2])
    body = data[nl + 1:]
    if len(body) != 2 * n:
        raise FormatError(f"raw activation body has {len(body)} bytes, expected {2 * n}")
    return ActivationVector(np.frombuffer(body, dtype="<i2").astype(np.int16), FixedPointFormat(f))


def read_activations(path, fmt: FixedPointFormat = Q8_8) -> ActivationVector:
    """Text or raw activations; raw files carry their own format."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(RAW_ACT_MAGIC):
        return parse_activations_raw(data)
    return parse_activations_text(data.decode(), fmt)


def write_activations(path, a: ActivationVector, raw: bool = False):
    atomic_write(path, format_activations_raw(a) if raw else format_activations_text(a))


# EIEC container

def pack_container(e) -> bytes:
    if e.codebook is None:
        raise ValueError("encoded matrix has no codebook")
    bad = validate(e)
    if bad:
        raise FormatError(f"cannot serialise invalid encoding: {bad[0]}")
    tile_cols = e.tile_cols if isinstance(e, TiledCsc) else e.cols
    cb = e.codebook
    out = [_HEADER.pack(MAGIC, VERSION, e.rows, e.cols, e.n_pe, tile_cols,
                        cb.fmt.fraction_bits, 0, *cb.raw.tolist())]
    for _, t in tiles_of(e):
        for s in t.slices:
            out.append(s.p.astype("<u2").tobytes())
            out.append(s.pack())
    body = b"".join(out)
    return body + _CRC.pack(zlib.crc32(body))


def unpack_container(data: bytes):
    if len(data) < _HEADER.size + _CRC.size:
        raise FormatError("container too short")
    body, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
    if zlib.crc32(body) != crc:
        raise FormatError("CRC mismatch")
    magic, version, rows, cols, n_pe, tile_cols, frac, _, *cb_raw = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if rows < 1 or cols < 1 or n_pe < 1 or tile_cols < 1:
        raise FormatError("header has a zero dimension")
    try:
        fmt = FixedPointFormat(frac)
        cb = Codebook(np.array(cb_raw, dtype=np.int16), fmt)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    pos = _HEADER.size
    tiles = []
    for off in range(0, cols, tile_cols):
        width = min(tile_cols, cols - off)
        slices = []
        for _ in range(n_pe):
            n_p = 2 * (width + 1)
            if pos + n_p > len(body):
                raise FormatError("truncated pointer array")
            p = np.frombuffer(body, dtype="<u2", count=width + 1, offset=pos).astype(np.int64)
            pos += n_p
            n = int(p[-1])
            if pos + n > len(body):
                raise FormatError("truncated entry array")
            slices.append(PeSlice.unpack(p, body[pos:pos + n]))
            pos += n
        tiles.append(InterleavedCsc(rows, width, n_pe, slices, cb))
    if pos != len(body):
        raise FormatError(f"{len(body) - pos} trailing bytes before CRC")
    e = tiles[0] if tile_cols >= cols else TiledCsc(rows, cols, n_pe, tile_cols, tiles, cb)
    bad = validate(e)
    if bad:
        raise FormatError(str(bad[0]))
    return e


def write_container(path, e):
    atomic_write(path, pack_container(e))


def read_container(path):
    with open(path, "rb") as fh:
        return unpack_container(fh.read())


# simulator statistics

def stats_row(stats, efficiency: float) -> dict:
    row = {"total_cycles": stats.total_cycles}
    for k, b in enumerate(stats.bubble_cycles.tolist()):
        row[f"bubble_cycles_pe_{k}"] = b
    row.update(
        ptr_reads=stats.ptr_sram_reads,
        spmat_row_reads=stats.spmat_sram_row_reads,
        act_accesses=stats.act_accesses,
        macs=stats.mac_count,
        padding_macs=stats.padding_mac_count,
        efficiency=efficiency,
        seconds=stats.seconds,
    )
    return row


def config_line(cfg) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in vars(cfg).items())


def stats_to_csv(stats, cfg, efficiency: float) -> str:
    row = stats_row(stats, efficiency)
    buf = io.StringIO()
    buf.write(config_line(cfg) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(row.keys())
    w.writerow(repr(v) if isinstance(v, float) else v for v in row.values())
    return buf.getvalue()


def read_stats_csv(text: str):
    """Returns ``(config dict, row dict)`` with values as strings."""
    lines = text.splitlines()
    cfg = {}
    if lines and lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            k, _, v = tok.partition("=")
            cfg[k] = v
        lines = lines[1:]
    rows = list(csv.DictReader(lines))
    return cfg, rows[0] if rows else {}


def stats_to_json(stats, cfg, efficiency: float, energy=None) -> str:
    doc = {"config": vars(cfg), "stats": stats.as_dict(), "efficiency": efficiency}
    if energy is not None:
        doc["energy"] = energy.as_dict()
    return json.dumps(doc, indent=2, sort_keys=True)
