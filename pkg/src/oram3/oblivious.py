"""Linear-bandwidth oblivious stable compaction and merge.

Both work the same way.  A reverse scan over the input threads each element
into a secret-shared linked list (reals and dummies separately, per input),
where a link names the *permuted* position tuple of the next element.  The
layout and its links are then permuted, and the client walks the lists.  Each
physical position is touched exactly once and every step issues the same
transfers, so the storage servers see a uniformly random sequence of distinct
positions whose length depends only on ``n``.
"""
from __future__ import annotations

from collections import deque

from .perm import perm_triple, permute
from .rng import RandomSource
from .sharing import (DEFAULT_CODEC, REAL, TAG_MASK, Codec, Layout,
                      add_column, concat_layouts, destroy, mirror,
                      new_layout, reconstruct_many, secret_write_many,
                      share_new)
from .simnet import Network, ProtocolError

__all__ = ["stable_compact", "merge", "sort_rank", "oracle_compact", "oracle_merge"]


def sort_rank(codec: Codec):
    """Return ``rank(v)``: key for reals, +inf-like for everything else."""
    big = 1 << (codec.key_bits + 1)
    km, shift = codec.key_mask, 8

    def rank(v: int) -> int:
        return (v >> shift) & km if v & TAG_MASK == REAL else big
    return rank


# -- plain oracles (used by tests and the audit harness) ---------------------

def oracle_compact(values, codec: Codec = DEFAULT_CODEC) -> list:
    reals = [v for v in values if v & TAG_MASK == REAL]
    return reals + [0] * (len(values) - len(reals))


def oracle_merge(a, b, codec: Codec = DEFAULT_CODEC) -> list:
    rank = sort_rank(codec)
    ra = [v for v in a if v & TAG_MASK == REAL]
    rb = [v for v in b if v & TAG_MASK == REAL]
    out, i, j = [], 0, 0
    while i < len(ra) and j < len(rb):
        if rank(ra[i]) <= rank(rb[j]):
            out.append(ra[i]); i += 1
        else:
            out.append(rb[j]); j += 1
    out += ra[i:] + rb[j:]
    return out + [0] * (len(a) + len(b) - len(out))


# -- shared machinery ---------------------------------------------------------

def _link_pass(net, lay, perms, rng, codec, n_lists, split):
    """Reverse scan writing links into a new column ``"l"``.

    ``split`` is the index where list 1 starts (``n`` for merge, the full
    length for compaction).  Returns ``(real_heads, dummy_heads)`` as packed
    link values, one per input list.
    """
    n = lay.n
    ib = codec.index_bits
    s1, s2 = 1 + ib, 1 + 2 * ib
    rev = range(n - 1, -1, -1)
    add_column(net, lay, "l", codec.link_width)
    with net.batch():
        vals = reconstruct_many(net, lay, "e", rev)
        q0, q1, q2 = (net.read(mirror(b), perms[b].name, rev) for b in range(3))
        heads_r = [0] * n_lists
        heads_d = [0] * n_lists
        links = []
        append = links.append
        for k, v in enumerate(vals):
            li = 1 if n - 1 - k >= split else 0
            here = 1 | (q0[k] << 1) | (q1[k] << s1) | (q2[k] << s2)
            if v & TAG_MASK == REAL:
                append(heads_r[li])
                heads_r[li] = here
            else:
                append(heads_d[li])
                heads_d[li] = here
        secret_write_many(net, lay, "l", rev, links, rng)
    return heads_r, heads_d


def _snoop_shares(net, lay, col):
    return [net.snoop(b, lay.arr(col, b)) for b in range(3)]


def _follow(codec, e3, l3, pos, heads_d, li):
    """Reconstruct entry and successor at packed position ``pos``."""
    ib, m = codec.index_bits, codec.index_mask
    p0, p1, p2 = (pos >> 1) & m, (pos >> (1 + ib)) & m, (pos >> (1 + 2 * ib)) & m
    e = e3[0][p0] ^ e3[1][p1] ^ e3[2][p2]
    nxt = l3[0][p0] ^ l3[1][p1] ^ l3[2][p2]
    if not nxt & 1:
        nxt = heads_d[li] if e & TAG_MASK == REAL else 0
    return (p0, p1, p2), e, nxt


def _finish(net, P, order, rng, out_order=None, write_steps=None, read_steps=None):
    """Metered reads of the traversal, then secret-writes of the output."""
    n = P.n
    p0 = [p[0] for p in order]
    p1 = [p[1] for p in order]
    p2 = [p[2] for p in order]
    with net.batch():
        ents = reconstruct_many(net, P, "e", p0, p1, p2, steps=read_steps)
        reconstruct_many(net, P, "l", p0, p1, p2, steps=read_steps)
        if out_order is not None:
            ents = [ents[j] for j in out_order]
        return share_new(net, P.widths["e"], ents, rng, prefix="O", steps=write_steps)


def _check_one_touch(order):
    for b in range(3):
        seen = [p[b] for p in order]
        if len(set(seen)) != len(seen):
            raise ProtocolError("traversal touched a physical position twice")


# -- protocols -----------------------------------------------------------------

def stable_compact(net: Network, lay: Layout, rng: RandomSource,
                   codec: Codec = DEFAULT_CODEC) -> Layout:
    """Move every dummy to the end, keeping reals in order.  Consumes ``lay``.

    The input only needs to be semi-sorted for callers that care about
    sortedness; compaction itself is stable on any input.
    """
    if lay.permuted:
        raise ProtocolError("compaction needs an unpermuted layout")
    n = lay.n
    with net.protocol("compact"):
        perms = perm_triple(net, n, rng)
        heads_r, heads_d = _link_pass(net, lay, perms, rng, codec, 1, n)
        P = permute(net, lay, perms, rng)
        e3, l3 = _snoop_shares(net, P, "e"), _snoop_shares(net, P, "l")
        pos = heads_r[0] or heads_d[0]
        order = []
        for _ in range(n):
            p, _e, pos = _follow(codec, e3, l3, pos, heads_d, 0)
            order.append(p)
        if net.check:
            _check_one_touch(order)
        out = _finish(net, P, order, rng)
        destroy(net, P, perms=True)
    return out


def merge(net: Network, a: Layout, b: Layout, rng: RandomSource,
          codec: Codec = DEFAULT_CODEC) -> Layout:
    """Merge two semi-sorted layouts of equal length into one sorted layout
    of twice the length, reals by key (ties to ``a``), dummies last.
    Consumes both inputs.

    Traversal: both list heads are read up front; every later step emits the
    smaller held element and then reads exactly one position, the successor
    in the list just consumed, or if that list is exhausted, the next element
    of the other one.  The client never holds more than two entries and every
    step looks the same.
    """
    if a.n != b.n:
        raise ValueError(f"merge needs equal lengths, got {a.n} and {b.n}")
    n = a.n
    m = 2 * n
    rank = sort_rank(codec)
    with net.protocol("merge"):
        lay = concat_layouts(net, a, b)
        perms = perm_triple(net, m, rng)
        heads_r, heads_d = _link_pass(net, lay, perms, rng, codec, 2, n)
        P = permute(net, lay, perms, rng)
        e3, l3 = _snoop_shares(net, P, "e"), _snoop_shares(net, P, "l")
        unread = [heads_r[0] or heads_d[0], heads_r[1] or heads_d[1]]
        held = (deque(), deque())
        order = []
        taken = []

        def fetch(li):
            p, e, unread[li] = _follow(codec, e3, l3, unread[li], heads_d, li)
            held[li].append((len(order), e))
            order.append(p)

        fetch(0)
        fetch(1)
        for k in range(m):
            h0, h1 = held
            if h0 and (not h1 or rank(h0[0][1]) <= rank(h1[0][1])):
                li = 0
            else:
                li = 1
            taken.append(held[li].popleft()[0])
            if k < m - 2:
                fetch(li if unread[li] else 1 - li)
        if net.check:
            _check_one_touch(order)
        # read r happens at step max(r - 1, 0); output k is written at step k + 1
        read_steps = [0, 0] + [r - 0.5 for r in range(2, m)]
        out = _finish(net, P, order, rng, out_order=taken,
                      write_steps=range(1, m + 1), read_steps=read_steps)
        destroy(net, P, perms=True)
    return out
