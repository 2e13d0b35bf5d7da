import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import traced
from oram3.perm import gen_random_perm, mapping, perm_triple, permute, unpermute
from oram3.rng import ConstantRandom, RandomSource
from oram3.sharing import abstract, share_values, storage
from oram3.simnet import Network, Trace


def _is_bijection(p, n):
    return sorted(p) == list(range(n))


def test_perm_n1_identity(net, rng):
    p = gen_random_perm(net, 0, 1, rng)
    assert mapping(net, p) == [0]


@given(st.integers(1, 200), st.integers(0, 2**32))
@settings(max_examples=50)
def test_perm_is_bijection(n, seed):
    net = Network()
    assert _is_bijection(mapping(net, gen_random_perm(net, 1, n, RandomSource(seed))), n)


def _perm_counts(rng_cls, samples=6000):
    net = Network()
    counts = {p: 0 for p in itertools.permutations(range(3))}
    for s in range(samples):
        p = gen_random_perm(net, 0, 3, rng_cls(s, "fy"))
        counts[tuple(mapping(net, p))] += 1
        net.free(0, p.name)
    return list(counts.values())


def test_perm_uniform_n3():
    counts = _perm_counts(RandomSource)
    assert stats.chisquare(counts).pvalue > 0.001


def test_perm_uniformity_negative_control():
    assert stats.chisquare(_perm_counts(ConstantRandom)).pvalue < 1e-6


@pytest.mark.parametrize("n", [1, 16, 1024])
def test_perm_cost_three_blocks_per_element(n):
    net = Network()
    gen_random_perm(net, 2, n, RandomSource(0))
    assert net.meter.total == 3 * n


def test_perm_traced_matches_untraced():
    a, b = Network(), traced()
    pa = gen_random_perm(a, 0, 50, RandomSource(3))
    pb = gen_random_perm(b, 0, 50, RandomSource(3))
    assert mapping(a, pa) == mapping(b, pb)
    assert a.meter.total == b.meter.total == len([e for e in b.trace if e.size_blocks])


def _fixed_perm(net, server, values):
    from oram3.perm import StoredPermutation
    name = net.fresh_name("fixed")
    net.alloc(server, name, len(values), max(1, (len(values) - 1).bit_length()))
    net.servers[server].arrays[name][:] = values
    return StoredPermutation(server, name, len(values))


def test_permute_identity_keeps_content_and_refreshes(net, rng):
    values = [3, 1, 4, 1, 5]
    lay = share_values(net, values, 8, rng)
    old = [net.peek(b, lay.arr("e", b)) for b in range(3)]
    perms = tuple(_fixed_perm(net, (b - 1) % 3, list(range(5))) for b in range(3))
    P = permute(net, lay, perms, rng)
    assert abstract(net, P) == values
    new = [net.peek(b, P.arr("e", b)) for b in range(3)]
    assert new != old


def test_permute_reversal_brute_force(net, rng):
    values = [10, 20, 30, 40]
    lay = share_values(net, values, 8, rng)
    rev = [3, 2, 1, 0]
    perms = tuple(_fixed_perm(net, (b - 1) % 3, rev) for b in range(3))
    P = permute(net, lay, perms, rng)
    T = [net.peek(storage(b), P.arr("e", b)) for b in range(3)]
    # element i lives at rev[i] on every share
    assert [T[0][rev[i]] ^ T[1][rev[i]] ^ T[2][rev[i]] for i in range(4)] == values


def test_unpermute_n8_against_direct_oracle(net, rng):
    r = random.Random(5)
    values = [r.getrandbits(16) for _ in range(8)]
    P = permute(net, share_values(net, values, 16, rng), perm_triple(net, 8, rng), rng)
    T = [net.peek(storage(b), P.arr("e", b)) for b in range(3)]
    pis = [mapping(net, p) for p in P.perms]
    direct = [T[0][pis[0][i]] ^ T[1][pis[1][i]] ^ T[2][pis[2][i]] for i in range(8)]
    out = unpermute(net, P, rng)
    assert abstract(net, out) == direct == values


def test_unpermute_identity_perms(net, rng):
    values = [9, 8, 7]
    lay = share_values(net, values, 8, rng)
    perms = tuple(_fixed_perm(net, (b - 1) % 3, [0, 1, 2]) for b in range(3))
    P = permute(net, lay, perms, rng)
    before = [net.peek(b, P.arr("e", b)) for b in range(3)]
    out = unpermute(net, P, rng)
    assert abstract(net, out) == values
    assert [net.peek(b, out.arr("e", b)) for b in range(3)] != before


@given(st.lists(st.integers(0, 2**24 - 1), min_size=1, max_size=64), st.integers(0, 2**32))
@settings(max_examples=60)
def test_permute_unpermute_roundtrip(values, seed):
    net, rng = Network(check=True), RandomSource(seed)
    P = permute(net, share_values(net, values, 24, rng), perm_triple(net, len(values), rng), rng)
    assert abstract(net, P) == values
    assert abstract(net, unpermute(net, P, rng)) == values


def test_permute_frees_input_and_unpermute_frees_perms(net, rng):
    lay = share_values(net, [1, 2], 8, rng)
    P = permute(net, lay, perm_triple(net, 2, rng), rng)
    assert not any(net.exists(s, lay.arr("e", b)) for s in range(3) for b in range(3))
    out = unpermute(net, P, rng)
    assert not any(net.exists(p.server, p.name) for p in P.perms)
    assert abstract(net, out) == [1, 2]


def test_permute_multi_column(net, rng):
    from oram3.sharing import add_column, secret_write_many
    lay = share_values(net, [1, 2, 3], 8, rng)
    add_column(net, lay, "l", 12)
    secret_write_many(net, lay, "l", range(3), [100, 200, 300], rng)
    P = permute(net, lay, perm_triple(net, 3, rng), rng)
    assert abstract(net, P, "l") == [100, 200, 300]
    out = unpermute(net, P, rng, columns=["l"])
    assert list(out.widths) == ["l"] and abstract(net, out, "l") == [100, 200, 300]


def _skeleton_digest(values, seed):
    net = Network(trace=Trace(keep=False, digest=True))
    rng = RandomSource(seed)
    lay = share_values(net, values, 8, rng)
    P = permute(net, lay, perm_triple(net, len(values), rng), rng)
    unpermute(net, P, rng)
    return net.trace.digest()


def test_permute_pattern_depends_only_on_n():
    assert _skeleton_digest([1, 2, 3, 4], 1) == _skeleton_digest([0, 0, 9, 9], 2)
    assert _skeleton_digest([1, 2, 3, 4], 1) != _skeleton_digest([1, 2, 3], 1)


def _permute_cost(n):
    net, rng = Network(), RandomSource(n)
    lay = share_values(net, [0] * n, 16, rng)
    before = net.meter.total
    permute(net, lay, perm_triple(net, n, rng), rng)
    return net.meter.total - before


def test_permute_cost_linear():
    costs = [_permute_cost(1 << k) for k in range(8, 15)]
    for a, b in zip(costs, costs[1:]):
        assert 1.9 <= b / a <= 2.1


def test_masks_cancel_under_instrumentation(rng):
    # check mode asserts that every mask triple XORs to zero
    net = Network(check=True)
    P = permute(net, share_values(net, [5] * 10, 8, rng), perm_triple(net, 10, rng), rng)
    assert abstract(net, P) == [5] * 10


def _received_share_counts(rng_cls, runs=2560):
    counts = [0] * 256
    for s in range(runs):
        net, rng = Network(), rng_cls(s, "mask")
        P = permute(net, share_values(net, [0], 8, rng), perm_triple(net, 1, rng), rng)
        counts[net.peek(1, P.arr("e", 1))[0]] += 1
    return counts


def test_received_share_is_uniform():
    assert stats.chisquare(_received_share_counts(RandomSource)).pvalue > 0.001


def test_received_share_negative_control():
    assert stats.chisquare(_received_share_counts(ConstantRandom)).pvalue < 1e-6
