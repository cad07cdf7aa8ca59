import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eie.csc import PeSlice, encode, encode_interleaved
from eie.cyclesim import SimConfig, simulate
from eie.errors import FormatError
from eie.fixedpoint import ActivationVector, FixedPointFormat
from eie.formats import (
    pack_container, parse_activations_raw, read_activations, read_container, read_matrix_market,
    read_stats_csv, stats_to_csv, stats_to_json, unpack_container, write_activations, write_container,
    write_matrix_market,
)

from conftest import random_acts, random_q


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.integers(1, 50), st.floats(0.02, 0.5), st.sampled_from([1, 2, 4, 8]),
       st.sampled_from([None, 7, 16]), st.integers(0, 2**32 - 1))
def test_container_round_trip(rows, cols, d, n_pe, tile, seed):
    q = random_q(np.random.default_rng(seed), rows, cols, d)
    e = encode(q, n_pe, tile)
    data = pack_container(e)
    assert data[:4] == b"EIEC"
    back = unpack_container(data)
    assert back == e
    assert pack_container(back) == data


def test_corruption_rejected(rng):
    e = encode_interleaved(random_q(rng, 20, 20, 0.3), 4)
    data = bytearray(pack_container(e))
    for pos in (0, 10, len(data) // 2, len(data) - 5):
        bad = bytearray(data)
        bad[pos] ^= 0x40
        with pytest.raises(FormatError):
            unpack_container(bytes(bad))
    with pytest.raises(FormatError):
        unpack_container(bytes(data[:-9]))
    with pytest.raises(FormatError):
        unpack_container(b"EIE")


def reseal(body):
    return body + struct.pack("<I", zlib.crc32(body))


def test_semantic_errors_with_valid_crc(rng):
    e = encode_interleaved(random_q(rng, 20, 6, 0.3), 1)
    body = pack_container(e)[:-4]
    # version
    with pytest.raises(FormatError, match="version"):
        unpack_container(reseal(body[:4] + struct.pack("<H", 9) + body[6:]))
    # trailing bytes
    with pytest.raises(FormatError, match="trailing"):
        unpack_container(reseal(body + b"\0"))
    # a zero run that overruns the PE's rows is caught by validation
    s = PeSlice([1], [15], [0, 1, 1])
    head = pack_container(encode_interleaved(random_q(rng, 4, 2, 0.0), 1))[:-4]
    hdr = head[: len(head) - 6]
    forged = hdr + s.p.astype("<u2").tobytes() + s.pack()
    with pytest.raises(FormatError):
        unpack_container(reseal(forged))


def test_pack_refuses_invalid():
    from eie.compress import Codebook
    from eie.csc import InterleavedCsc
    cb = Codebook.from_values(np.linspace(-1, 1, 15))
    bad = InterleavedCsc(4, 1, 1, [PeSlice([1], [9], [0, 1])], cb)
    with pytest.raises(FormatError):
        pack_container(bad)


def test_activation_files(tmp_path, rng):
    a = random_acts(rng, 50, 0.5)
    write_activations(tmp_path / "a.txt", a)
    assert read_activations(tmp_path / "a.txt") == a
    write_activations(tmp_path / "a.raw", a, raw=True)
    assert read_activations(tmp_path / "a.raw") == a
    a4 = ActivationVector(a.raw, FixedPointFormat(4))
    write_activations(tmp_path / "b.raw", a4, raw=True)
    assert read_activations(tmp_path / "b.raw") == a4
    with pytest.raises(FormatError):
        parse_activations_raw(b"EIEA 3 8\n\0\0")


def test_matrix_market(tmp_path, rng):
    w = rng.normal(size=(7, 5))
    write_matrix_market(tmp_path / "w.mtx", w)
    assert np.array_equal(read_matrix_market(tmp_path / "w.mtx"), w)


def test_container_file_and_stats(tmp_path, rng):
    q = random_q(rng, 30, 30, 0.2)
    e = encode_interleaved(q, 4)
    write_container(tmp_path / "m.eiec", e)
    assert read_container(tmp_path / "m.eiec") == e
    cfg = SimConfig(n_pe=4)
    _, s = simulate(e, q.codebook, random_acts(rng, 30), cfg)
    conf, row = read_stats_csv(stats_to_csv(s, cfg, 0.5))
    assert conf["fifo_depth"] == "8"
    assert int(row["total_cycles"]) == s.total_cycles
    assert set(row) >= {"total_cycles", "bubble_cycles_pe_3", "ptr_reads", "spmat_row_reads", "act_accesses",
                        "macs", "padding_macs", "efficiency", "seconds"}
    assert '"total_cycles"' in stats_to_json(s, cfg, 0.5)
