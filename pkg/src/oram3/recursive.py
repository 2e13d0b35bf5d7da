"""The full N-block ORAM: a stack of position-based ORAMs.

``ORAM_D`` stores the data, keyed by the ``D``-bit address.  ``ORAM_d`` for
``d < D`` is keyed by the top ``d`` address bits and stores, per key, the
position labels of its two children in ``ORAM_{d+1}``.  ``ORAM_0`` holds a
single entry whose own label the client keeps as a one-slot shared layout.

An access fetches top-down, following labels, then maintains bottom-up: each
``ORAM_d`` rebuilds one level and hands the new labels up to its parent via
:func:`convert`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .oblivious import stable_compact
from .pos_oram import PosOram, _window_pass, lowest_zero_bit
from .rng import RandomSource
from .sharing import (REAL, TAG_MASK, Codec, Layout, abstract, destroy,
                      new_layout, reconstruct_many, secret_write_many,
                      truncate_layout)
from .simnet import Network, ProtocolError

__all__ = ["Request", "OramSystem", "convert", "oram_init", "oram_access",
           "walk_labels"]


@dataclass(frozen=True)
class Request:
    op: str                      # "read" or "write"
    addr: int
    data: Optional[int] = None

    def __post_init__(self):
        if self.op not in ("read", "write"):
            raise ValueError(f"unknown op {self.op!r}")
        if self.op == "read" and self.data is not None:
            raise ValueError("read requests carry no data")
        if self.op == "write" and self.data is None:
            raise ValueError("write requests need data")


def convert(net: Network, U: Layout, level: int, rng: RandomSource,
            codec: Codec) -> Layout:
    """Turn the position list of a depth-``d`` level into updates for depth
    ``d - 1``.  Consumes ``U``; output has the same length.

    Siblings ``a||0, a||1`` collapse into ``(a, (label0, label1))`` with a
    dummy in the right sibling's slot; a lone child gets ``*`` for the other
    side.  Labels carry ``level`` (the level just built).
    """
    ks = 8 + codec.key_bits
    ib = codec.index_bits
    km = codec.key_mask
    lw = codec.label_width
    lvl = 1 | (level << 1)
    pshift = 1 + codec.level_bits
    pos_mask = (1 << (3 * ib)) - 1

    def lab(u):  # link payload -> label with this level
        return lvl | ((((u >> ks) >> 1) & pos_mask) << pshift)

    def key(u):
        return (u >> 8) & km

    def real(u):
        return u & TAG_MASK == REAL

    def rule(prev, cur, nxt):
        if not real(cur):
            return 0
        k = key(cur)
        if k & 1 and real(prev) and key(prev) == k ^ 1:
            return 0
        if not k & 1 and real(nxt) and key(nxt) == k | 1:
            meta = lab(cur) | (lab(nxt) << lw)
        elif k & 1:
            meta = lab(cur) << lw
        else:
            meta = lab(cur)
        return REAL | ((k >> 1) << 8) | (meta << ks)

    with net.protocol("convert"):
        return _window_pass(net, U, rng, rule, width=codec.entry_width(codec.meta_width))


class OramSystem:
    """N-block ORAM over three simulated servers.

    :param N: capacity, a power of two (``N >= 1``).
    :param net: network to run on (a fresh one by default).
    :param rng: client randomness; each access derives its own sub-stream.
    :param payload_bits: data block payload width.
    """

    def __init__(self, N: int, net: Optional[Network] = None,
                 rng: Optional[RandomSource] = None, payload_bits: int = 64):
        if N < 1 or N & (N - 1):
            raise ValueError("N must be a power of two")
        self.N = N
        self.D = N.bit_length() - 1
        self.net = net or Network()
        self.rng = rng or RandomSource(0)
        self.payload_bits = payload_bits
        self.codec = Codec.for_capacity(N, payload_bits)
        c = self.codec
        self.orams = [PosOram(self.net, d, c, c.meta_width, has_updates=True)
                      for d in range(self.D)]
        self.orams.append(PosOram(self.net, self.D, c, payload_bits, has_updates=False))
        self.root: Optional[Layout] = None
        self.t = 0
        self.rebuilt: list[list[int]] = []   # per access: level rebuilt at depth d
        self._init()

    def _init(self) -> None:
        net, c, D = self.net, self.codec, self.D
        rng = self.rng.spawn("init")
        with net.protocol("setup"):
            top = self.orams[D]
            lay = new_layout(net, self.N, {"e": top.width}, prefix="I")
            with net.batch():
                secret_write_many(net, lay, "e", range(self.N),
                                  [c.pack(REAL, a) for a in range(self.N)], rng)
            U = top.build_initial(lay, rng)
            for d in range(D, 0, -1):
                V = convert(net, U, d, rng, c)
                V = stable_compact(net, V, rng, c)
                truncate_layout(net, V, 1 << (d - 1))
                U = self.orams[d - 1].build_initial(V, rng)
            self.root = U

    def access(self, req: Request) -> int:
        """Perform one request; returns the value stored before it."""
        if not 0 <= req.addr < self.N:
            raise IndexError(f"address {req.addr} out of range for N={self.N}")
        net, c, D = self.net, self.codec, self.D
        rng = self.rng.spawn("access")
        with net.protocol("access"):
            with net.protocol("fetch"):
                with net.batch():
                    u = reconstruct_many(net, self.root, "e", [0])[0]
                label = (0, c.unlink(c.payload(u)))
                old = 0
                for d in range(D + 1):
                    key = req.addr >> (D - d)
                    e = self.orams[d].lookup(key, label, rng)
                    if d < D:
                        left, right = c.unmeta(c.payload(e))
                        side = right if (req.addr >> (D - d - 1)) & 1 else left
                        label = c.unlabel(side)
                        if label is None:
                            raise ProtocolError(f"unassigned label at depth {d}")
                    else:
                        old = c.payload(e)
                        if req.op == "write":
                            e = c.pack(REAL, key, req.data)
                    self.orams[d].place_fresh(e, rng)
            with net.protocol("maintain"):
                top = lowest_zero_bit(self.t)
                U = None
                levels = [0] * (D + 1)
                for d in range(D, -1, -1):
                    l = min(d, top)
                    levels[d] = l
                    Unew = self.orams[d].shuffle(l, U, rng)
                    if d > 0:
                        U = convert(net, Unew, l, rng, c)
                    else:
                        destroy(net, self.root)
                        self.root = Unew
        self.t += 1
        self.rebuilt.append(levels)
        return old

    def read(self, addr: int) -> int:
        return self.access(Request("read", addr))

    def write(self, addr: int, data: int) -> int:
        return self.access(Request("write", addr, data))


def oram_init(N: int, net: Optional[Network] = None, rng: Optional[RandomSource] = None,
              payload_bits: int = 64) -> OramSystem:
    return OramSystem(N, net, rng, payload_bits)


def oram_access(sys: OramSystem, req: Request) -> int:
    return sys.access(req)


def walk_labels(sys: OramSystem) -> dict:
    """White-box check of the label chains (unmetered, tests only).

    For every address, follows labels from the root down and confirms that
    each label points at the freshest copy of its key: the copy in the
    smallest non-empty level that holds the key.  Returns ``{addr: value}``.
    """
    net, c, D = sys.net, sys.codec, sys.D
    # per depth: key -> smallest level holding it, and level -> content by pos
    where = []
    for o in sys.orams:
        best = {}
        for j in sorted(o.full_levels()):
            st = o.levels[j]
            vals = abstract(net, st.data)
            for i, v in enumerate(vals[:st.n]):
                if v & TAG_MASK == REAL:
                    best.setdefault(c.key(v), j)
        where.append(best)
    shares = {}

    def at(d, level, pos):
        st = sys.orams[d].levels[level]
        if st is None:
            raise AssertionError(f"label to empty level {level} at depth {d}")
        k = (d, level)
        if k not in shares:
            shares[k] = [net.peek(b, st.data.arr("e", b)) for b in range(3)]
        s = shares[k]
        return s[0][pos[0]] ^ s[1][pos[1]] ^ s[2][pos[2]]

    u = abstract(net, sys.root)[0]
    root_label = (0, c.unlink(c.payload(u)))
    out = {}
    for addr in range(sys.N):
        label = root_label
        for d in range(D + 1):
            key = addr >> (D - d)
            e = at(d, *label)
            if e & TAG_MASK != REAL or c.key(e) != key:
                raise AssertionError(f"addr {addr}: depth {d} label hits wrong entry")
            if where[d].get(key) != label[0]:
                raise AssertionError(f"addr {addr}: depth {d} label is stale")
            if d < D:
                left, right = c.unmeta(c.payload(e))
                side = right if (addr >> (D - d - 1)) & 1 else left
                label = c.unlabel(side)
                if label is None:
                    raise AssertionError(f"addr {addr}: unassigned label at depth {d}")
            else:
                out[addr] = c.payload(e)
    return out
