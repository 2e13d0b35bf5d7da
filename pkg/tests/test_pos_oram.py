import random

import pytest

import oracles
from conftest import CODEC, content, tagged, upload
from oram3 import otm as otm_mod
from oram3 import pos_oram as pos_mod
from oram3.pos_oram import PosOram, lowest_zero_bit, mark_duplicates, update_pass
from oram3.rng import RandomSource
from oram3.sharing import REAL, TAG_MASK, Codec, abstract, destroy, share_new
from oram3.simnet import Network, ProtocolError


class Driver:
    """Runs a single depth-``d`` position ORAM with the client's label map
    kept in the clear (what the parent depths would supply)."""

    def __init__(self, d, seed=0, check=True):
        self.net = Network(check=check)
        self.rng = RandomSource(seed)
        self.codec = Codec.for_capacity(1 << d, 16)
        self.o = PosOram(self.net, d, self.codec, 16, has_updates=False)
        self.ref = {k: 100 + k for k in range(1 << d)}
        c = self.codec
        lay = share_new(self.net, self.o.width,
                        [c.pack(REAL, k, v) for k, v in self.ref.items()], self.rng)
        self.labels = {}
        self._learn(self.o.build_initial(lay, self.rng), d)
        self.model = oracles.CounterModel(d)
        self.t = 0

    def _learn(self, U, level):
        c = self.codec
        for u in abstract(self.net, U):
            if u & TAG_MASK == REAL:
                self.labels[c.key(u)] = (level, c.unlink(c.payload(u)))
        destroy(self.net, U)

    def access(self, key, new=None):
        c = self.codec
        e = self.o.lookup(key, self.labels[key], self.rng)
        assert c.key(e) == key and c.payload(e) == self.ref[key]
        if new is not None:
            e = c.pack(REAL, key, new)
            self.ref[key] = new
        self.o.place_fresh(e, self.rng)
        l = min(self.o.d, lowest_zero_bit(self.t))
        assert l == self.model.step()
        self._learn(self.o.shuffle(l, None, self.rng), l)
        self.t += 1
        assert self.o.full_levels() == self.model.full_levels()
        return l


def test_lowest_zero_bit():
    assert [lowest_zero_bit(t) for t in range(8)] == [0, 1, 0, 2, 0, 1, 0, 3]


def test_depth_zero_lookup():
    drv = Driver(0)
    for _ in range(3):
        drv.access(0)


def test_lookup_touches_every_full_level(monkeypatch):
    drv = Driver(2)
    drv.access(0)
    drv.access(1)
    assert drv.o.full_levels() == [1, 2]
    calls = []
    real = otm_mod.otm_lookup
    monkeypatch.setattr(pos_mod, "otm_lookup",
                        lambda net, st, k, p, rng: calls.append(k) or real(net, st, k, p, rng))
    key = 1
    drv.o.lookup(key, drv.labels[key], drv.rng)
    assert len(calls) == 2 and calls.count(None) == 1


def test_lookup_on_empty_level_rejected():
    drv = Driver(2)
    with pytest.raises(ProtocolError):
        drv.o.lookup(0, (0, (0, 0, 0)), drv.rng)


def test_repeat_lookup_without_rebuild_rejected():
    drv = Driver(2)
    drv.o.lookup(3, drv.labels[3], drv.rng)
    with pytest.raises(otm_mod.NonRecurrenceError):
        drv.o.lookup(3, drv.labels[3], drv.rng)


def test_level_zero_rebuild_serves_fresh_entry():
    drv = Driver(3)
    drv.access(5, new=77)
    assert drv.labels[5][0] == 0
    drv.access(5)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_schedule_and_reference_map(d):
    drv = Driver(d, seed=d)
    r = random.Random(d)
    for t in range(1, (1 << (d + 1)) + 3):
        k = r.randrange(1 << d)
        drv.access(k, new=r.getrandbits(16) if r.random() < 0.5 else None)


def test_repeated_key_and_writes_across_rebuilds():
    drv = Driver(3, seed=9)
    for v in range(40):
        drv.access(2, new=v)
    for k in range(8):
        drv.access(k)


def test_shuffle_preconditions():
    drv = Driver(2)
    with pytest.raises(ProtocolError):
        drv.o.shuffle(0, None, drv.rng)           # nothing fetched
    drv.o.place_fresh(drv.codec.pack(REAL, 0, 0), drv.rng)
    with pytest.raises(ProtocolError):
        drv.o.place_fresh(0, drv.rng)             # holder occupied


def test_shuffle_cost_linear_in_level():
    d = 10
    drv = Driver(d, check=False)
    costs = {}
    real = PosOram.shuffle

    def timed(self, l, U, rng):
        before = self.net.meter.total
        out = real(self, l, U, rng)
        costs.setdefault(l, self.net.meter.total - before)
        return out

    drv.o.shuffle = timed.__get__(drv.o)
    r = random.Random(0)
    for _ in range(1 << (d - 1)):
        drv.access(r.randrange(1 << d))
    ratios = [costs[l] / (1 << l) for l in range(4, d)]
    c = max(ratios)
    assert all(costs[l] <= c * (1 << l) for l in range(4, d))
    assert max(ratios) <= 1.25 * min(ratios)


# -- passes -----------------------------------------------------------------------

def _pass(fn, xs, seed=0):
    net, rng = Network(check=True), RandomSource(seed)
    return content(net, fn(net, upload(net, xs, rng), rng, CODEC))


def test_mark_duplicates_example():
    a, b, c = (1, 10), (1, 11), (2, 12)
    assert _pass(mark_duplicates, [a, b, c]) == [a, None, c]


def test_mark_duplicates_no_duplicates_refreshes():
    xs = tagged([1, 2, None, 5])
    net, rng = Network(), RandomSource(0)
    lay = upload(net, xs, rng)
    old = net.peek(0, lay.arr("e", 0))
    out = mark_duplicates(net, lay, rng, CODEC)
    assert content(net, out) == xs and net.peek(0, out.arr("e", 0)) != old


def test_mark_duplicates_random_against_oracle():
    r = random.Random(2)
    for case in range(100):
        n = r.randint(1, 64)
        keys = sorted(r.choices(range(10), k=r.randint(0, n)))
        xs = tagged(keys + [None] * (n - len(keys)))
        assert _pass(mark_duplicates, xs, case) == oracles.dedup(xs)


def _meta_entry(codec, key, left, right):
    return codec.pack(REAL, key, codec.meta(left, right))


def test_update_pass_prefers_new_labels():
    c = Codec.for_capacity(64)
    net, rng = Network(check=True), RandomSource(0)
    L_old, R_old = c.label(2, (1, 2, 3)), c.label(3, (4, 5, 6))
    L_new = c.label(0, (0, 1, 0))
    rows = [_meta_entry(c, 4, L_old, R_old), _meta_entry(c, 4, L_new, c.label(None)),
            _meta_entry(c, 6, R_old, L_old), 0]
    lay = share_new(net, c.entry_width(c.meta_width), rows, rng)
    out = abstract(net, update_pass(net, lay, rng, c))
    assert c.unmeta(c.payload(out[0])) == (L_new, R_old)
    assert out[1] == 0
    assert out[2] == rows[2] and out[3] == 0


def test_shuffle_keeps_smaller_level_copy():
    # a key written at level 0 shadows its stale copy in level 1
    drv = Driver(2, seed=3)
    drv.access(1)
    drv.access(1, new=55)   # now level 1 holds it; fresh copy goes to level 0 next
    drv.access(1)
    assert drv.ref[1] == 55
