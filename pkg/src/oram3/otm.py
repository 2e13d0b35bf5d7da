"""Three-server one-time oblivious memory, OTM[n].

Build takes a sorted layout of ``n`` entries, appends ``n`` special dummies
linked in order, and permutes everything (with links) into ``2n`` slots.  The
head of the dummy list lives secret-shared in a one-slot layout ``dpos``.
Each lookup reads exactly one fresh position per server: the caller-supplied
position for a real key, the dummy head otherwise.  The head is re-shared on
every call, so real and dummy lookups look identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .perm import perm_triple, permute, unpermute
from .rng import RandomSource
from .sharing import (DEFAULT_CODEC, REAL, SPECIAL, TAG_MASK, Codec, Layout,
                      add_column, destroy, mirror, new_layout, pad_layout,
                      reconstruct_many, secret_write_many, share_new,
                      truncate_layout)
from .simnet import Network, ProtocolError

__all__ = ["OtmState", "otm_build", "otm_lookup", "otm_getall",
           "CapacityError", "NonRecurrenceError"]


class CapacityError(ProtocolError):
    """More than ``n`` lookups on an OTM[n]."""


class NonRecurrenceError(ProtocolError):
    """A physical position would be read twice between Build and Getall."""


@dataclass
class OtmState:
    """Client-side state of one OTM instance."""
    n: int
    data: Layout                 # permuted, columns "e" and "l", length 2n
    dpos: Layout                 # unpermuted, one slot, column "p"
    codec: Codec
    lookups_done: int = 0
    touched: tuple = field(default_factory=lambda: (set(), set(), set()))

    @property
    def full(self) -> bool:
        return self.lookups_done >= self.n


def otm_build(net: Network, lay: Layout, rng: RandomSource,
              codec: Codec = DEFAULT_CODEC) -> tuple[OtmState, Layout]:
    """Build OTM[n] from a sorted layout (consumed).

    Returns the state and ``U``: a sorted layout of ``n`` entries
    ``(tag, key, link(pos))`` giving, for each input slot, the position
    tuple at which it now lives.
    """
    if lay.permuted:
        raise ProtocolError("build needs an unpermuted layout")
    n = lay.n
    m = 2 * n
    ib = codec.index_bits
    s1, s2 = 1 + ib, 1 + 2 * ib
    with net.protocol("otm_build"):
        # special dummies 1..n at slots n..2n-1
        pad_layout(net, lay, m)
        with net.batch():
            secret_write_many(net, lay, "e", range(n, m),
                              [codec.pack(SPECIAL, i) for i in range(1, n + 1)], rng)
        perms = perm_triple(net, m, rng)
        add_column(net, lay, "l", codec.link_width)

        # link of dummy i points at the permuted slot of dummy i+1
        with net.batch():
            src = range(m - 1, n, -1)        # slots holding the successors
            q0, q1, q2 = (net.read(mirror(b), perms[b].name, src) for b in range(3))
            links = [1 | (a << 1) | (c << s1) | (d << s2) for a, c, d in zip(q0, q1, q2)]
            secret_write_many(net, lay, "l", range(m - 2, n - 1, -1), links, rng)
        with net.batch():
            ends = list(range(n)) + [m - 1]
            secret_write_many(net, lay, "l", ends, [0] * len(ends), rng)

        with net.batch():
            h = [net.read(mirror(b), perms[b].name, [n])[0] for b in range(3)]
            dpos = share_new(net, codec.link_width, [codec.link(h)], rng,
                             prefix="D", col="p")

        with net.batch():
            ents = reconstruct_many(net, lay, "e", range(n))
            q0, q1, q2 = (net.read(mirror(b), perms[b].name, range(n)) for b in range(3))
            kmask = codec.key_mask << 8
            u = [(e & TAG_MASK) | (e & kmask) |
                 ((1 | (a << 1) | (c << s1) | (d << s2)) << (8 + codec.key_bits))
                 for e, a, c, d in zip(ents, q0, q1, q2)]
            U = share_new(net, codec.entry_width(codec.link_width), u, rng, prefix="K")

        P = permute(net, lay, perms, rng)
    return OtmState(n, P, dpos, codec), U


def otm_lookup(net: Network, st: OtmState, key: Optional[int],
               pos: Optional[tuple], rng: RandomSource) -> int:
    """Fetch the entry for ``key`` at ``pos``; ``key=None`` is a dummy
    lookup.  Returns the packed entry (a special dummy for dummy lookups)."""
    if st.lookups_done >= st.n:
        raise CapacityError(f"OTM[{st.n}] already served {st.n} lookups")
    codec = st.codec
    with net.protocol("otm_lookup"):
        with net.batch():
            head = reconstruct_many(net, st.dpos, "p", [0], steps=[0])[0]
        target = pos if key is not None else codec.unlink(head)
        if target is None:
            raise ProtocolError("dummy list exhausted")
        for b in range(3):
            if target[b] in st.touched[b]:
                raise NonRecurrenceError(
                    f"position {target[b]} on share {b} read twice")
            st.touched[b].add(target[b])
        t0, t1, t2 = [target[0]], [target[1]], [target[2]]
        with net.batch():
            e = reconstruct_many(net, st.data, "e", t0, t1, t2, steps=[0])[0]
            link = reconstruct_many(net, st.data, "l", t0, t1, t2, steps=[0])[0]
        with net.batch():
            secret_write_many(net, st.dpos, "p", [0],
                              [head if key is not None else link], rng)
    st.lookups_done += 1
    if net.check and key is not None:
        if e & TAG_MASK != REAL or codec.key(e) != key:
            raise ProtocolError(f"label for key {key} points at a different entry")
    return e


def otm_getall(net: Network, st: OtmState, rng: RandomSource) -> Layout:
    """Unpermute and return the first ``n`` entries: the original input,
    including entries already looked up.  Destroys the OTM."""
    with net.protocol("otm_getall"):
        out = unpermute(net, st.data, rng, columns=["e"])
        dropped = truncate_layout(net, out, st.n)
        if net.check and any(v & TAG_MASK != SPECIAL for v in dropped):
            raise ProtocolError("getall dropped a non-special entry")
        destroy(net, st.dpos)
    return out
