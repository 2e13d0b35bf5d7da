import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CODEC, Scripted, traced
from oram3.perm import perm_triple, permute, mapping
from oram3.rng import RandomSource
from oram3.sharing import (DUMMY, REAL, SPECIAL, Codec, Entry, abstract, mirror,
                           new_layout, reconstruct3, reconstruct_at, secret_write,
                           share_values, split3, storage)
from oram3.simnet import Network, ProtocolError


# -- split3 / reconstruct3 ------------------------------------------------------

def test_split3_forced_shares():
    b0, b1, b2 = split3(bytes([0x0F]), Scripted([0xA1, 0x3C]))
    assert (b0, b1, b2) == (bytes([0xA1]), bytes([0x3C]), bytes([0x92]))


def test_split3_zero_block_with_equal_masks():
    r = 0x5A5A
    assert split3(bytes(2), Scripted([r, r])) == (r.to_bytes(2, "little"),) * 2 + (bytes(2),)


def test_reconstruct3_examples():
    assert reconstruct3(b"\x0f", b"\xf0", b"\xff") == b"\x00"
    v = bytes(range(16))
    assert reconstruct3(v, bytes(16), bytes(16)) == v


def test_reconstruct3_width_mismatch():
    with pytest.raises(ValueError):
        reconstruct3(b"\x00", b"\x00\x00", b"\x00")


@given(st.binary(min_size=0, max_size=32), st.integers(0, 2**32))
def test_split_reconstruct_roundtrip(v, seed):
    assert reconstruct3(*split3(v, RandomSource(seed))) == v


@given(st.binary(min_size=1, max_size=16), st.binary(min_size=1, max_size=16),
       st.binary(min_size=1, max_size=16))
def test_reconstruct_cancels(a, b, c):
    w = min(len(a), len(b), len(c))
    a, b, c = a[:w], b[:w], c[:w]
    x = bytes(p ^ q ^ r for p, q, r in zip(a, b, c))
    assert reconstruct3(a, b, x) == c


def test_split3_1000_values():
    rng = RandomSource(7)
    for k in range(1000):
        v = rng.bits(128).to_bytes(16, "little")
        assert reconstruct3(*split3(v, rng)) == v


# -- codec -----------------------------------------------------------------------

@given(st.sampled_from([DUMMY, REAL, SPECIAL]), st.integers(0, 2**16 - 1),
       st.integers(0, 2**16 - 1))
def test_entry_codec_roundtrip(tag, key, payload):
    e = Entry(tag, key, payload)
    assert CODEC.decode(CODEC.encode(e)) == e


def test_dummy_encodes_to_zero():
    assert CODEC.encode(Entry.dummy()) == 0
    assert CODEC.decode(0) == Entry.dummy()


def test_encode_rejects_wide_key():
    with pytest.raises(ValueError):
        CODEC.encode(Entry.real(2**16))


@given(st.tuples(*[st.integers(0, 2**12 - 1)] * 3), st.integers(0, 15))
def test_link_and_label_roundtrip(pos, level):
    assert CODEC.unlink(CODEC.link(pos)) == pos
    assert CODEC.unlabel(CODEC.label(level, pos)) == (level, pos)


def test_bottom_markers():
    assert CODEC.link(None) == 0 and CODEC.unlink(0) is None
    assert CODEC.label(None) == 0 and CODEC.unlabel(0) is None


def test_meta_roundtrip():
    left, right = CODEC.label(1, (1, 2, 3)), CODEC.label(None)
    assert CODEC.unmeta(CODEC.meta(left, right)) == (left, right)


def test_for_capacity_widths():
    c = Codec.for_capacity(1024)
    assert c.key_bits == 11 and c.index_bits == 11 and c.level_bits == 4
    c1 = Codec.for_capacity(1)
    assert c1.key_bits == 1 and c1.index_bits == 1


def test_server_roles():
    for b in range(3):
        assert storage(b) == b
        assert mirror(b) == (b - 1) % 3
    assert mirror(0) == 2


# -- secret write / reconstruct ----------------------------------------------------

def test_secret_write_then_reconstruct(net, rng):
    lay = new_layout(net, 4, {"e": 32})
    secret_write(net, lay, 2, 0xDEADBEEF, rng)
    assert reconstruct_at(net, lay, (2, 2, 2)) == 0xDEADBEEF
    assert abstract(net, lay) == [0, 0, 0xDEADBEEF, 0]


def test_secret_write_fresh_shares(net, rng):
    lay = new_layout(net, 1, {"e": 64})
    triples = set()
    for _ in range(100):
        secret_write(net, lay, 0, 42, rng)
        triples.add(tuple(net.peek(b, lay.arr("e", b))[0] for b in range(3)))
    assert len(triples) >= 99


def test_secret_write_mirrors_match(net, rng):
    lay = new_layout(net, 3, {"e": 16})
    secret_write(net, lay, 1, 7, rng)
    for b in range(3):
        assert net.peek(storage(b), lay.arr("e", b)) == net.peek(mirror(b), lay.arr("e", b))


def test_secret_write_length_one(net, rng):
    lay = new_layout(net, 1, {"e": 8})
    secret_write(net, lay, 0, 9, rng)
    assert abstract(net, lay) == [9]


def test_secret_write_bounds_and_permuted(net, rng):
    lay = new_layout(net, 2, {"e": 8})
    with pytest.raises(IndexError):
        secret_write(net, lay, 2, 1, rng)
    P = permute(net, lay, perm_triple(net, 2, rng), rng)
    with pytest.raises(ProtocolError):
        secret_write(net, P, 0, 1, rng)


def test_secret_write_costs_six_blocks(rng):
    net = Network()
    lay = new_layout(net, 4, {"e": 8})
    before = net.meter.total
    secret_write(net, lay, 0, 1, rng)
    assert net.meter.total - before == 6


def test_reconstruct_reads_one_block_per_server(rng):
    net = traced()
    lay = share_values(net, [5, 6], 8, rng)
    start = net.trace.count
    assert reconstruct_at(net, lay, (1, 1, 1)) == 6
    evs = net.trace.events[start:]
    reqs = [e for e in evs if e.kind == "ReadReq"]
    resp = [e for e in evs if e.kind == "ReadResp"]
    assert sorted(e.receiver for e in reqs) == ["S0", "S1", "S2"]
    assert len(resp) == 3 and all(e.size_blocks == 1 for e in resp)
    rounds = sorted(e.round for e in evs)
    assert rounds[-1] - rounds[0] == 2


def test_reconstruct_at_permuted_brute_force(net, rng):
    values = [11, 22, 33, 44, 55]
    lay = share_values(net, values, 8, rng)
    P = permute(net, lay, perm_triple(net, 5, rng), rng)
    pis = [mapping(net, p) for p in P.perms]
    for i, v in enumerate(values):
        assert reconstruct_at(net, P, (pis[0][i], pis[1][i], pis[2][i])) == v


def test_reconstruct_at_bounds(net, rng):
    lay = new_layout(net, 2, {"e": 8})
    with pytest.raises(IndexError):
        reconstruct_at(net, lay, (0, 2, 0))
