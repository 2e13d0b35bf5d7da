"""Three-way XOR secret sharing and the client's two primitives on layouts.

A layout of length ``n`` is three share arrays ``T0, T1, T2`` plus, when
permuted, three permutations.  Share ``b`` lives on server ``b`` (its storage
server) with a mirror copy on server ``b-1`` (its permutation server, which
also holds ``pi_b``).  The abstract content is ``XOR_b pi_b^-1(T_b)``.

Inside the library a block is a Python ``int`` of a declared bit width; the
byte-level helpers :func:`split3` and :func:`reconstruct3` are the public
face for callers that think in ``bytes``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .rng import RandomSource
from .simnet import Network, ProtocolError

__all__ = [
    "DUMMY", "REAL", "SPECIAL", "Entry", "Codec", "DEFAULT_CODEC",
    "split3", "reconstruct3", "Layout", "storage", "mirror",
    "new_layout", "add_column", "destroy", "secret_write", "secret_write_many",
    "reconstruct_at", "reconstruct_many", "abstract", "share_values",
    "concat_layouts", "truncate_layout", "pad_layout", "share_new",
]

DUMMY, REAL, SPECIAL = 0, 1, 2
TAG_BITS = 8
TAG_MASK = 0xFF


# -- bytes-level sharing -------------------------------------------------------

def split3(value: bytes, rng: RandomSource) -> tuple[bytes, bytes, bytes]:
    """Split ``value`` into three shares whose XOR is ``value``."""
    w = len(value)
    b0 = rng.bits(8 * w).to_bytes(w, "little") if w else b""
    b1 = rng.bits(8 * w).to_bytes(w, "little") if w else b""
    b2 = bytes(x ^ y ^ z for x, y, z in zip(value, b0, b1))
    return b0, b1, b2


def reconstruct3(b0: bytes, b1: bytes, b2: bytes) -> bytes:
    """XOR of three equal-width shares."""
    if not len(b0) == len(b1) == len(b2):
        raise ValueError(f"share widths differ: {len(b0)}, {len(b1)}, {len(b2)}")
    return bytes(x ^ y ^ z for x, y, z in zip(b0, b1, b2))


# -- entries -------------------------------------------------------------------

@dataclass(frozen=True)
class Entry:
    """Decoded view of an entry block: ``tag``, ``key`` and ``payload``.

    Dummies carry key 0 and payload 0.  Special dummies (used inside one-time
    memories) carry their index ``i`` in the key field.
    """
    tag: int
    key: int = 0
    payload: int = 0

    @classmethod
    def real(cls, key: int, payload: int = 0) -> "Entry":
        return cls(REAL, key, payload)

    @classmethod
    def dummy(cls) -> "Entry":
        return cls(DUMMY)

    @classmethod
    def special(cls, i: int) -> "Entry":
        return cls(SPECIAL, i)

    @property
    def is_real(self) -> bool:
        return self.tag == REAL


class Codec:
    """Bit layout of entries, links and position labels.

    entry   = tag (8 bits) | key << 8 | payload << (8 + key_bits)
    link    = valid (1 bit) | p0 << 1 | p1 << (1 + ib) | p2 << (1 + 2 ib)
    label   = assigned (1 bit) | level << 1 | (p0, p1, p2) << (1 + level_bits)
    meta    = left label | right label << label_width

    The all-zero pattern is the dummy entry, the end-of-list link and the
    unassigned label, so freshly allocated server memory decodes as "empty".

    :param key_bits: width of the key field.
    :param payload_bits: width of data payloads (metadata widths are derived).
    :param index_bits: width of one physical position.
    :param level_bits: width of the level field in labels.
    """

    def __init__(self, key_bits: int = 64, payload_bits: int = 64,
                 index_bits: int = 32, level_bits: int = 8):
        if min(key_bits, payload_bits, index_bits, level_bits) < 1:
            raise ValueError("all field widths must be positive")
        self.key_bits = key_bits
        self.payload_bits = payload_bits
        self.index_bits = index_bits
        self.level_bits = level_bits
        self.key_mask = (1 << key_bits) - 1
        self.index_mask = (1 << index_bits) - 1
        self.link_width = 1 + 3 * index_bits
        self.label_width = 1 + level_bits + 3 * index_bits
        self.meta_width = 2 * self.label_width
        self._pshift = TAG_BITS + key_bits

    @classmethod
    def for_capacity(cls, n_blocks: int, payload_bits: int = 64) -> "Codec":
        """Smallest codec for an ORAM of ``n_blocks`` blocks (a power of 2)."""
        depth = max(n_blocks - 1, 0).bit_length()
        return cls(key_bits=depth + 1, payload_bits=payload_bits,
                   index_bits=max(1, (2 * n_blocks - 1).bit_length()),
                   level_bits=max(1, depth.bit_length()))

    def entry_width(self, payload_bits: Optional[int] = None) -> int:
        return TAG_BITS + self.key_bits + (self.payload_bits if payload_bits is None else payload_bits)

    # entries
    def pack(self, tag: int, key: int = 0, payload: int = 0) -> int:
        return tag | (key << TAG_BITS) | (payload << self._pshift)

    def encode(self, e: Entry) -> int:
        if not 0 <= e.key <= self.key_mask:
            raise ValueError(f"key {e.key} does not fit in {self.key_bits} bits")
        return self.pack(e.tag, e.key, e.payload)

    def decode(self, v: int) -> Entry:
        return Entry(v & TAG_MASK, (v >> TAG_BITS) & self.key_mask, v >> self._pshift)

    def key(self, v: int) -> int:
        return (v >> TAG_BITS) & self.key_mask

    def payload(self, v: int) -> int:
        return v >> self._pshift

    # links
    def link(self, pos: Optional[Sequence[int]]) -> int:
        if pos is None:
            return 0
        ib = self.index_bits
        p0, p1, p2 = pos
        return 1 | (p0 << 1) | (p1 << (1 + ib)) | (p2 << (1 + 2 * ib))

    def unlink(self, v: int) -> Optional[tuple[int, int, int]]:
        if not v & 1:
            return None
        ib, m = self.index_bits, self.index_mask
        return ((v >> 1) & m, (v >> (1 + ib)) & m, (v >> (1 + 2 * ib)) & m)

    # labels
    def label(self, level: Optional[int], pos: Optional[Sequence[int]] = None) -> int:
        """``label(None)`` is the unassigned marker ``*``."""
        if level is None:
            return 0
        return 1 | (level << 1) | ((self.link(pos) >> 1) << (1 + self.level_bits))

    def unlabel(self, v: int) -> Optional[tuple[int, tuple[int, int, int]]]:
        if not v & 1:
            return None
        level = (v >> 1) & ((1 << self.level_bits) - 1)
        return level, self.unlink(((v >> (1 + self.level_bits)) << 1) | 1)

    def meta(self, left: int, right: int) -> int:
        return left | (right << self.label_width)

    def unmeta(self, v: int) -> tuple[int, int]:
        return v & ((1 << self.label_width) - 1), v >> self.label_width


DEFAULT_CODEC = Codec()


# -- layouts -------------------------------------------------------------------

def storage(b: int) -> int:
    """Server holding the primary copy of share ``b``."""
    return b % 3


def mirror(b: int) -> int:
    """Permutation server of share ``b``: holds the mirror copy and ``pi_b``."""
    return (b - 1) % 3


class Layout:
    """Client-side handle for a shared array.

    :param name: server-side array name prefix.
    :param n: length.
    :param widths: column name to bit width.  Most layouts have a single
        column ``"e"``; linked structures add ``"l"``.
    :param perms: ``None`` for unpermuted layouts, else three
        :class:`~oram3.perm.StoredPermutation` (``perms[b]`` on ``mirror(b)``).
    """

    __slots__ = ("name", "n", "widths", "perms", "cols")

    def __init__(self, name: str, n: int, widths: dict, perms=None):
        self.name = name
        self.n = n
        self.widths = dict(widths)
        self.perms = perms
        self.cols = {c: (f"{name}.{c}0", f"{name}.{c}1", f"{name}.{c}2") for c in widths}

    def arr(self, col: str, b: int) -> str:
        return self.cols[col][b]

    def names(self, col: str) -> tuple:
        """Server-side array names of the three shares of column ``col``."""
        return self.cols[col]

    @property
    def permuted(self) -> bool:
        return self.perms is not None

    def __repr__(self) -> str:
        kind = "permuted" if self.permuted else "plain"
        return f"Layout({self.name!r}, n={self.n}, cols={list(self.widths)}, {kind})"


def new_layout(net: Network, n: int, widths: dict, prefix: str = "L") -> Layout:
    """Allocate an all-zero (all-dummy) unpermuted layout."""
    lay = Layout(net.fresh_name(prefix), n, widths)
    for col, w in widths.items():
        _alloc_col(net, lay, col, w)
    return lay


def add_column(net: Network, lay: Layout, col: str, width: int) -> None:
    lay.widths[col] = width
    lay.cols[col] = tuple(f"{lay.name}.{col}{b}" for b in range(3))
    _alloc_col(net, lay, col, width)


def _alloc_col(net, lay, col, w):
    n = lay.n
    alloc = net.alloc
    for b, name in enumerate(lay.cols[col]):
        alloc(b, name, n, w)
        alloc((b - 1) % 3, name, n, w)


def destroy(net: Network, lay: Layout, perms: bool = False) -> None:
    """Free a layout's arrays on every server (server-local)."""
    free = net.free
    for names in lay.cols.values():
        for b, name in enumerate(names):
            free(b, name)
            free((b - 1) % 3, name)
    if perms and lay.perms is not None:
        for p in lay.perms:
            free(p.server, p.name)


def secret_write(net: Network, lay: Layout, index: int, value: int,
                 rng: RandomSource, col: str = "e") -> None:
    """Secretly write one block: fresh shares to each storage server and
    its mirror."""
    if lay.permuted:
        raise ProtocolError("secret write needs an unpermuted layout")
    if not 0 <= index < lay.n:
        raise IndexError(f"index {index} out of range for length {lay.n}")
    secret_write_many(net, lay, col, range(index, index + 1), [value], rng)


def secret_write_many(net: Network, lay: Layout, col: str, idx, values,
                      rng: RandomSource, steps=None) -> None:
    """Secret-write ``values[k]`` at ``idx[k]`` for every ``k``."""
    w = lay.widths[col]
    g = rng.bits
    r0 = [g(w) for _ in values]
    r1 = [g(w) for _ in values]
    r2 = [v ^ a ^ c for v, a, c in zip(values, r0, r1)]
    n0, n1, n2 = lay.names(col)
    write = net.write
    write(0, n0, idx, r0, steps)
    write(2, n0, idx, r0, steps)
    write(1, n1, idx, r1, steps)
    write(0, n1, idx, r1, steps)
    write(2, n2, idx, r2, steps)
    write(1, n2, idx, r2, steps)


def share_new(net: Network, width: int, values: Sequence[int], rng: RandomSource,
              prefix: str = "L", steps=None, col: str = "e") -> Layout:
    """Allocate a one-column layout and secret-write ``values`` into it,
    slot ``k`` at step ``steps[k]``."""
    n = len(values)
    lay = Layout(net.fresh_name(prefix), n, {col: width})
    g = rng.bits
    r0 = [g(width) for _ in values]
    r1 = [g(width) for _ in values]
    r2 = [v ^ a ^ c for v, a, c in zip(values, r0, r1)]
    n0, n1, n2 = lay.cols[col]
    idx = range(n)
    fill = net.fill
    fill(0, n0, idx, r0, width, steps)
    fill(2, n0, idx, r0, width, steps)
    fill(1, n1, idx, r1, width, steps)
    fill(0, n1, idx, r1, width, steps)
    fill(2, n2, idx, r2, width, steps)
    fill(1, n2, idx, r2, width, steps)
    return lay


def reconstruct_at(net: Network, lay: Layout, pos: Sequence[int], col: str = "e") -> int:
    """Read share ``b`` at ``pos[b]`` from its storage server, XOR them."""
    for b in range(3):
        if not 0 <= pos[b] < lay.n:
            raise IndexError(f"position {pos[b]} out of range for length {lay.n}")
    return reconstruct_many(net, lay, col, [pos[0]], [pos[1]], [pos[2]])[0]


def reconstruct_many(net: Network, lay: Layout, col: str, p0, p1=None, p2=None,
                     steps=None) -> list:
    """Bulk reconstruct at per-share positions ``p0, p1, p2``; with only
    ``p0`` given the same index sequence is used on every share."""
    if p1 is None:
        p1 = p2 = p0
    n0, n1, n2 = lay.names(col)
    read = net.read
    v0 = read(0, n0, p0, steps)
    v1 = read(1, n1, p1, steps)
    v2 = read(2, n2, p2, steps)
    return [a ^ b ^ c for a, b, c in zip(v0, v1, v2)]


def abstract(net: Network, lay: Layout, col: str = "e") -> list:
    """Unmetered oracle view of a layout's abstract content (tests only)."""
    shares = [net.peek(storage(b), lay.arr(col, b)) for b in range(3)]
    if lay.permuted:
        out = []
        maps = [net.peek(p.server, p.name) for p in lay.perms]
        for i in range(lay.n):
            out.append(shares[0][maps[0][i]] ^ shares[1][maps[1][i]] ^ shares[2][maps[2][i]])
        return out
    return [a ^ b ^ c for a, b, c in zip(*shares)]


def share_values(net: Network, values: Sequence[int], width: int,
                 rng: RandomSource, prefix: str = "L") -> Layout:
    """Client uploads a plain array as a fresh unpermuted layout."""
    with net.batch():
        return share_new(net, width, list(values), rng, prefix)


def concat_layouts(net: Network, a: Layout, b: Layout) -> Layout:
    """Reinterpret two unpermuted layouts as one (server-local, free)."""
    if a.widths != b.widths or a.permuted or b.permuted:
        raise ProtocolError("concat needs two unpermuted layouts of one shape")
    out = Layout(net.fresh_name("C"), a.n + b.n, a.widths)
    for col in a.widths:
        for s in range(3):
            for srv in (storage(s), mirror(s)):
                net.concat(srv, out.arr(col, s), a.arr(col, s), b.arr(col, s))
    return out


def truncate_layout(net: Network, lay: Layout, n: int) -> list:
    """Keep the first ``n`` slots (server-local drop).  Returns the abstract
    values of the dropped tail when instrumentation is on, else ``[]``."""
    if lay.permuted:
        raise ProtocolError("truncate needs an unpermuted layout")
    dropped = []
    for col in lay.widths:
        tails = []
        for s in range(3):
            tails.append(net.truncate(storage(s), lay.arr(col, s), n))
            net.truncate(mirror(s), lay.arr(col, s), n)
        if net.check and col == "e":
            dropped = [a ^ b ^ c for a, b, c in zip(*tails)]
    lay.n = n
    return dropped


def pad_layout(net: Network, lay: Layout, n: int) -> None:
    """Grow to ``n`` slots with all-zero shares, i.e. public dummies."""
    k = n - lay.n
    if k < 0:
        raise ValueError("pad target shorter than layout")
    for col in lay.widths:
        for s in range(3):
            net.extend(storage(s), lay.arr(col, s), k)
            net.extend(mirror(s), lay.arr(col, s), k)
    lay.n = n
