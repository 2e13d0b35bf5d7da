"""Position-based ORAM: levels of one-time memories with geometric capacity.

Level ``j`` of an ORAM of depth ``d`` is an OTM of capacity ``2^j``.  A lookup
is told the level and position tuple of its key, looks it up for real there,
and issues a dummy lookup on every other non-empty level.  The fetched entry
then goes into a fresh one-entry holder, and the next :meth:`PosOram.shuffle`
folds the holder and all smaller levels into one new level.
"""
from __future__ import annotations

from typing import Optional

from .oblivious import merge, stable_compact
from .otm import OtmState, otm_build, otm_getall, otm_lookup
from .rng import RandomSource
from .sharing import (DEFAULT_CODEC, REAL, TAG_MASK, Codec, Layout, destroy,
                      new_layout, pad_layout, reconstruct_many,
                      secret_write_many, share_new, truncate_layout)
from .simnet import Network, ProtocolError

__all__ = ["PosOram", "mark_duplicates", "update_pass", "lowest_zero_bit"]


def lowest_zero_bit(t: int) -> int:
    """Index of the least significant 0 bit of ``t``."""
    return ((t + 1) & ~t).bit_length() - 1


def _window_pass(net, lay, rng, rule, width=None):
    """One linear scan producing ``out[i] = rule(prev, cur, nxt)``.

    The client reads entry ``i + 1`` before writing output ``i`` so it
    always holds the window ``(i-1, i, i+1)``; every entry is read once and
    every output slot is secret-written once.
    """
    n = lay.n
    with net.batch():
        v = reconstruct_many(net, lay, "e", range(n), steps=range(n))
        ext = [0] + v + [0]
        res = [rule(ext[i], ext[i + 1], ext[i + 2]) for i in range(n)]
        out = share_new(net, width or lay.widths["e"], res, rng, prefix="W",
                        steps=[i + 1.5 for i in range(n)])
    destroy(net, lay)
    return out


def mark_duplicates(net: Network, lay: Layout, rng: RandomSource,
                    codec: Codec = DEFAULT_CODEC) -> Layout:
    """Keep the first entry of each run of equal real keys, dummy the rest.
    Every slot is re-shared.  Consumes ``lay``."""
    km = codec.key_mask << 8

    def rule(prev, cur, _nxt):
        if cur & TAG_MASK == REAL and prev & TAG_MASK == REAL and prev & km == cur & km:
            return 0
        return cur

    with net.protocol("dedup"):
        return _window_pass(net, lay, rng, rule)


def update_pass(net: Network, lay: Layout, rng: RandomSource,
                codec: Codec = DEFAULT_CODEC) -> Layout:
    """Fold update entries into the entries they follow.

    Input is a merge of (old entries, updates) with ties going to the old
    entry, so an updated key appears as ``old, update`` side by side.  The
    pair becomes one entry whose child labels come from the update where it
    has them and from the old entry otherwise; the update slot becomes a
    dummy.  Consumes ``lay``.
    """
    km = codec.key_mask << 8
    lw = codec.label_width
    lmask = (1 << lw) - 1
    shift = 8 + codec.key_bits
    low = (1 << shift) - 1

    def same(x, y):
        return x & TAG_MASK == REAL and y & TAG_MASK == REAL and x & km == y & km

    def rule(prev, cur, nxt):
        if same(prev, cur):
            return 0
        if same(cur, nxt):
            old, new = cur >> shift, nxt >> shift
            left = new & lmask if new & 1 else old & lmask
            right = new >> lw if (new >> lw) & 1 else old >> lw
            return (cur & low) | ((left | (right << lw)) << shift)
        return cur

    with net.protocol("update"):
        return _window_pass(net, lay, rng, rule)


class PosOram:
    """Position-based ORAM of depth ``d`` (levels ``0..d``).

    :param depth: ``d``; level ``j`` holds up to ``2^j`` entries.
    :param payload_bits: payload width of the stored entries.
    :param has_updates: whether shuffles receive child-label updates (every
        depth except the data depth).
    """

    def __init__(self, net: Network, depth: int, codec: Codec,
                 payload_bits: int, has_updates: bool):
        self.net = net
        self.d = depth
        self.codec = codec
        self.width = codec.entry_width(payload_bits)
        self.has_updates = has_updates
        self.levels: list[Optional[OtmState]] = [None] * (depth + 1)
        self.fresh: Optional[Layout] = None

    def full_levels(self) -> list[int]:
        return [j for j, s in enumerate(self.levels) if s is not None]

    def build_initial(self, lay: Layout, rng: RandomSource) -> Layout:
        """Install a sorted layout of ``2^d`` entries as level ``d``."""
        if lay.n != 1 << self.d:
            raise ValueError("initial layout must have 2^d entries")
        self.levels[self.d], U = otm_build(self.net, lay, rng, self.codec)
        return U

    def lookup(self, key: int, label: tuple, rng: RandomSource) -> int:
        """Real lookup at ``label = (level, pos)``, dummy lookups elsewhere."""
        level, pos = label
        if self.levels[level] is None:
            raise ProtocolError(f"label points at empty level {level} (depth {self.d})")
        found = None
        with self.net.protocol("lookup"):
            for j, st in enumerate(self.levels):
                if st is None:
                    continue
                if j == level:
                    found = otm_lookup(self.net, st, key, pos, rng)
                else:
                    otm_lookup(self.net, st, None, None, rng)
        return found

    def place_fresh(self, entry: int, rng: RandomSource) -> None:
        """Secret-write the just-fetched (possibly updated) entry into the
        one-entry holder consumed by the next shuffle."""
        if self.fresh is not None:
            raise ProtocolError("fresh holder already occupied")
        net = self.net
        with net.protocol("fresh"):
            with net.batch():
                self.fresh = share_new(net, self.width, [entry], rng, prefix="F")

    def shuffle(self, l: int, U: Optional[Layout], rng: RandomSource) -> Layout:
        """Rebuild level ``l`` from the holder and levels ``0..l-1`` (and
        level ``d`` too when ``l == d``), apply the update array ``U``, and
        return the new level's position list ``U'``."""
        net, codec, d = self.net, self.codec, self.d
        if self.fresh is None:
            raise ProtocolError("shuffle without a fetched entry")
        if l < d and self.levels[l] is not None:
            raise ProtocolError(f"level {l} is not empty")
        with net.protocol("shuffle"):
            A, self.fresh = self.fresh, None
            for j in range(l):
                st = self.levels[j]
                if st is None:
                    raise ProtocolError(f"level {j} below {l} is empty")
                A = merge(net, A, otm_getall(net, st, rng), rng, codec)
                self.levels[j] = None
            if l == d and self.levels[d] is not None:
                A = merge(net, A, otm_getall(net, self.levels[d], rng), rng, codec)
                self.levels[d] = None
            if A.n > 1:
                # a single entry has no duplicates and nothing to compact;
                # the length is public, so skipping leaks nothing
                A = mark_duplicates(net, A, rng, codec)
                A = stable_compact(net, A, rng, codec)
            self._fit(A, 1 << l)
            if self.has_updates:
                if U is None:
                    raise ProtocolError("position map shuffle needs an update array")
                if U.n < A.n:
                    raise ProtocolError("update array shorter than the level")
                pad_layout(net, A, U.n)
                A = merge(net, A, U, rng, codec)
                A = update_pass(net, A, rng, codec)
                A = stable_compact(net, A, rng, codec)
                self._fit(A, 1 << l)
            elif U is not None:
                destroy(net, U)
            self.levels[l], Uout = otm_build(net, A, rng, codec)
        return Uout

    def _fit(self, A: Layout, n: int) -> None:
        if A.n > n:
            dropped = truncate_layout(self.net, A, n)
            if any(v & TAG_MASK == REAL for v in dropped):
                raise ProtocolError("truncation dropped a real entry")
        elif A.n < n:
            pad_layout(self.net, A, n)
