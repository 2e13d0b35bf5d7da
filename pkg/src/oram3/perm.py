"""Permutation generation on a server, and the Permute / Unpermute protocols.

Convention: applying ``pi`` moves the element at ``i`` to ``pi(i)``.  A
permuted layout stores ``T_b`` with ``T_b[pi_b(i)]`` holding share ``b`` of
abstract element ``i``; ``pi_b`` lives on ``mirror(b)`` next to the mirror
copy of ``T_b``, so the storage server of share ``b`` never learns ``pi_b``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .rng import RandomSource
from .sharing import Layout, destroy, mirror, storage
from .simnet import Network, ProtocolError, READ_REQ, WRITE_REQ

__all__ = ["StoredPermutation", "gen_random_perm", "perm_triple", "permute",
           "unpermute", "mapping"]


@dataclass(frozen=True)
class StoredPermutation:
    """Handle for a permutation held in the clear by one server."""
    server: int
    name: str
    n: int


def gen_random_perm(net: Network, server: int, n: int, rng: RandomSource,
                    name: str | None = None) -> StoredPermutation:
    """Write a uniformly random permutation of ``[n]`` to ``server``.

    Inside-out Fisher-Yates: step ``i`` draws ``j <= i``, reads ``a[j]``,
    writes ``a[i] = a[j]`` and ``a[j] = i``.  Three metered blocks per element.
    The server sees every value; that is intended, it is the permutation
    server for this share.
    """
    if n < 1:
        raise ValueError("permutation length must be positive")
    name = name or net.fresh_name("pi")
    width = max(1, (n - 1).bit_length())
    arr = net.alloc(server, name, n, width)
    below = rng.below
    js = [below(i + 1) for i in range(n)]
    if net.trace is None:
        for i, j in enumerate(js):
            arr[i] = arr[j]
            arr[j] = i
        net.account(server, name, READ_REQ, js, js)
        net.account(server, name, WRITE_REQ, range(2 * n), range(2 * n))
        return StoredPermutation(server, name, n)
    got, w_idx, w_val = [], [], []
    for i, j in enumerate(js):
        got.append(arr[j])
        arr[i] = arr[j]
        arr[j] = i
        w_idx += (i, j)
        w_val += (got[-1], i)
    with net.batch():
        net.account(server, name, READ_REQ, js, got, steps=range(n))
        net.account(server, name, WRITE_REQ, w_idx, w_val,
                    steps=[k >> 1 for k in range(2 * n)])
    return StoredPermutation(server, name, n)


def perm_triple(net: Network, n: int, rng: RandomSource) -> tuple:
    """Three independent permutations; ``perms[b]`` is held by ``mirror(b)``."""
    return tuple(gen_random_perm(net, mirror(b), n, rng) for b in range(3))


def mapping(net: Network, p: StoredPermutation) -> list:
    """Unmetered copy of a permutation (tests and instrumentation only)."""
    return net.peek(p.server, p.name)


def _masks(n: int, width: int, rng: RandomSource):
    g = rng.bits
    m0 = [g(width) for _ in range(n)]
    m1 = [g(width) for _ in range(n)]
    return m0, m1, [a ^ b for a, b in zip(m0, m1)]


def _relay(net, src, dst, name, n, width):
    """Client relays a freshly written array from ``src`` to ``dst``."""
    if net.trace is not None:
        net.relay_array(src, dst, name)
        return
    net.fill(dst, name, range(n), net.read(src, name, range(n)), width)


def permute(net: Network, lay: Layout, perms, rng: RandomSource,
            columns=None) -> Layout:
    """Apply ``perms`` to an unpermuted layout.

    For each share ``b`` the permutation server re-masks its mirror copy
    with one third of a zero-sum mask triple, permutes it locally under the
    client's direction, and the result is relayed to the storage server in
    index order.  The input layout is destroyed.
    """
    if lay.permuted:
        raise ProtocolError("permute needs an unpermuted layout")
    n = lay.n
    if any(p.n != n for p in perms):
        raise ValueError("permutation length differs from layout length")
    cols = list(lay.widths) if columns is None else list(columns)
    widths = [lay.widths[c] for c in cols]
    out = Layout(net.fresh_name("P"), n, dict(zip(cols, widths)), tuple(perms))
    src = [lay.cols[c] for c in cols]
    dst = [out.cols[c] for c in cols]
    with net.protocol("permute"):
        masks = [_masks(n, w, rng) for w in widths]
        if net.check:
            for m0, m1, m2 in masks:
                assert all(a ^ b ^ d == 0 for a, b, d in zip(m0, m1, m2))
        for b in range(3):
            h = (b - 1) % 3
            with net.batch():
                p = net.read(h, perms[b].name, range(n))
                for k, w in enumerate(widths):
                    vals = net.read(h, src[k][b], range(n))
                    net.fill(h, dst[k][b], p, [v ^ m for v, m in zip(vals, masks[k][b])], w)
            for k, w in enumerate(widths):
                _relay(net, h, b, dst[k][b], n, w)
    destroy(net, lay)
    return out


def unpermute(net: Network, lay: Layout, rng: RandomSource, columns=None) -> Layout:
    """Return an unpermuted layout with the same abstract content.

    Mirror of :func:`permute`: the permutation server gathers
    ``T_b[pi_b(i)]`` for ``i = 0..n-1``, masks, and the result is relayed.
    Columns not listed are dropped.  The input and its permutations are
    destroyed.
    """
    if not lay.permuted:
        raise ProtocolError("unpermute needs a permuted layout")
    n = lay.n
    cols = list(lay.widths) if columns is None else list(columns)
    widths = [lay.widths[c] for c in cols]
    out = Layout(net.fresh_name("U"), n, dict(zip(cols, widths)))
    src = [lay.cols[c] for c in cols]
    dst = [out.cols[c] for c in cols]
    with net.protocol("unpermute"):
        masks = [_masks(n, w, rng) for w in widths]
        for b in range(3):
            h = (b - 1) % 3
            with net.batch():
                p = net.read(h, lay.perms[b].name, range(n))
                for k, w in enumerate(widths):
                    vals = net.read(h, src[k][b], p)
                    net.fill(h, dst[k][b], range(n),
                             [v ^ m for v, m in zip(vals, masks[k][b])], w)
            for k, w in enumerate(widths):
                _relay(net, h, b, dst[k][b], n, w)
    destroy(net, lay, perms=True)
    return out
