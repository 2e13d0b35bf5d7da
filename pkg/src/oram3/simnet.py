"""Simulated network: one client, three passive storage servers.

Servers are plain named arrays of blocks (Python ints of a declared bit
width).  The client moves blocks with :meth:`Network.read` and
:meth:`Network.write`; every block that crosses the wire is metered and, when
a :class:`Trace` is attached, recorded as a :class:`TraceEvent`.

Rounds
    Each single-block transfer is one tick of the round clock.  A read is a
    ``ReadReq`` (client to server, no block) plus a ``ReadResp`` (server to
    client, one block) in the same round.

Batches
    Protocols run their loops in bulk for speed.  Inside ``with net.batch():``
    every call can tag its elements with a step number; on exit the buffered
    events are emitted ordered by ``(step, call order, element)``, which is
    exactly the order a client holding O(1) blocks would issue them.  Values
    are unaffected, only the recorded order.  Never read an array inside a
    batch that an earlier call of the same batch wrote.
"""
from __future__ import annotations

import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

__all__ = [
    "CLIENT", "SERVERS", "party", "TraceEvent", "Trace", "BandwidthMeter",
    "ServerStore", "Network", "AdversaryView", "extract_view", "skeleton",
    "strip", "write_jsonl", "ProtocolError",
]

CLIENT = "C"
SERVERS = ("S0", "S1", "S2")

READ_REQ, READ_RESP, WRITE_REQ, RELAY = "ReadReq", "ReadResp", "WriteReq", "Relay"


def party(b: int) -> str:
    """Party id of server ``b`` (mod 3)."""
    return SERVERS[b % 3]


class ProtocolError(RuntimeError):
    """A protocol asked the network for something impossible (a bug)."""


class TraceEvent(NamedTuple):
    round: int
    sender: str
    receiver: str
    kind: str
    array: str
    index: Optional[int]
    size_blocks: int
    content: Optional[int] = None

    def to_json(self, strip_index: bool = False) -> str:
        return json.dumps({
            "round": self.round, "sender": self.sender,
            "receiver": self.receiver, "kind": self.kind, "array": self.array,
            "index": None if strip_index else self.index,
            "size_blocks": self.size_blocks,
        })


def skeleton(ev: TraceEvent) -> tuple:
    """The part of an event that must not depend on inputs or randomness."""
    return (ev.round, ev.sender, ev.receiver, ev.kind, ev.array, ev.size_blocks)


def strip(ev: TraceEvent) -> TraceEvent:
    """Drop block contents and the physical index."""
    return ev._replace(index=None, content=None)


class Trace:
    """Event sink.

    :param keep: store every event in :attr:`events`.
    :param contents: keep block contents on stored events.
    :param digest: maintain a running hash of the content-stripped skeleton,
        so two long runs can be compared without storing them.
    :param sink: optional text file; each event is written as a JSON line.
    """

    def __init__(self, keep: bool = True, contents: bool = True,
                 digest: bool = False, sink=None, strip_index: bool = False):
        self.keep = keep
        self.contents = contents
        self.events: list[TraceEvent] = []
        self._hash = hashlib.blake2b(digest_size=32) if digest else None
        self.sink = sink
        self.strip_index = strip_index
        self.count = 0

    def add(self, ev: TraceEvent) -> None:
        self.count += 1
        if self.keep:
            self.events.append(ev if self.contents else ev._replace(content=None))
        if self._hash is not None:
            self._hash.update(repr(skeleton(ev)).encode())
        if self.sink is not None:
            self.sink.write(ev.to_json(self.strip_index) + "\n")

    def digest(self) -> str:
        if self._hash is None:
            raise ValueError("trace was not created with digest=True")
        return self._hash.hexdigest()

    def __len__(self) -> int:
        return self.count

    def __iter__(self):
        return iter(self.events)


class BandwidthMeter:
    """Blocks (and bits) moved, keyed by protocol label path."""

    def __init__(self):
        self._cells: dict[str, list] = {}

    def cell(self, label: str) -> list:
        """Mutable ``[blocks, bits]`` counter for ``label``."""
        c = self._cells.get(label)
        if c is None:
            c = self._cells[label] = [0, 0]
        return c

    def add(self, label: str, blocks: int, bits: int) -> None:
        c = self.cell(label)
        c[0] += blocks
        c[1] += bits

    @property
    def blocks(self) -> dict:
        return {k: v[0] for k, v in self._cells.items() if v[0]}

    @property
    def bits(self) -> dict:
        return {k: v[1] for k, v in self._cells.items() if v[0]}

    @property
    def total(self) -> int:
        return sum(v[0] for v in self._cells.values())

    @property
    def total_bits(self) -> int:
        return sum(v[1] for v in self._cells.values())

    def under(self, prefix: str) -> int:
        """Blocks moved under a label path prefix, e.g. ``"access"``."""
        return sum(v[0] for k, v in self._cells.items()
                   if k == prefix or k.startswith(prefix + "/"))

    def bits_under(self, prefix: str) -> int:
        return sum(v[1] for k, v in self._cells.items()
                   if k == prefix or k.startswith(prefix + "/"))

    def snapshot(self) -> tuple[int, int]:
        return self.total, self.total_bits


class _Scope:
    """Context manager for :meth:`Network.protocol` (cheaper than a
    generator-based one; entered thousands of times per access)."""
    __slots__ = ("net", "label", "outer")

    def __init__(self, net, label):
        self.net = net
        self.label = label

    def __enter__(self):
        net = self.net
        self.outer = net._label
        net._label = self.label if self.outer == "-" else f"{self.outer}/{self.label}"
        net._cell = net.meter.cell(net._label)

    def __exit__(self, *exc):
        net = self.net
        net._label = self.outer
        net._cell = net.meter.cell(self.outer)


class _NoBatch:
    __slots__ = ()

    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return None


_NO_BATCH = _NoBatch()


@dataclass
class ServerStore:
    """Memory of one passive server."""
    id: int
    arrays: dict[str, list] = field(default_factory=dict)
    widths: dict[str, int] = field(default_factory=dict)


class Network:
    """Client handle onto three simulated servers.

    :param trace: optional :class:`Trace` receiving every transfer.
    :param check: enable instrumentation (extra bounds and invariant checks
        that never change metered traffic).
    """

    def __init__(self, trace: Optional[Trace] = None, check: bool = False):
        self.servers = tuple(ServerStore(b) for b in range(3))
        self.meter = BandwidthMeter()
        self.trace = trace
        self.check = check
        self.round = 0
        self._label = "-"
        self._cell = self.meter.cell("-")
        self._names = 0
        self._batch: Optional[list] = None
        self._calls = 0

    # -- bookkeeping ---------------------------------------------------------

    def fresh_name(self, prefix: str = "A") -> str:
        """Deterministic array name; identical across seeds and inputs."""
        self._names += 1
        return f"{prefix}{self._names}"

    def protocol(self, label: str) -> _Scope:
        """Charge traffic inside the block to ``label`` (nested as a path)."""
        return _Scope(self, label)

    def batch(self):
        if self.trace is None:
            return _NO_BATCH  # untraced runs need no buffer
        return self._traced_batch()

    @contextmanager
    def _traced_batch(self):
        if self._batch is not None:
            raise ProtocolError("nested batch")
        self._batch = []
        try:
            yield
        finally:
            buf, self._batch = self._batch, None
            buf.sort(key=lambda x: x[0])
            for _, item in buf:
                self._emit(*item)

    # -- server memory management (server-local, no transfer) ----------------

    def alloc(self, server: int, array: str, n: int, width: int) -> list:
        """Create a zero-filled array on a server and return its storage."""
        st = self.servers[server]
        if array in st.arrays:
            raise ProtocolError(f"{party(server)} already holds {array}")
        arr = [0] * n
        st.arrays[array] = arr
        st.widths[array] = width
        return arr

    def extend(self, server: int, array: str, k: int) -> None:
        """Append ``k`` zero blocks (a server-local, public resize)."""
        self._arr(server, array).extend([0] * k)

    def truncate(self, server: int, array: str, n: int) -> list:
        """Drop everything past index ``n``; returns the dropped tail."""
        arr = self._arr(server, array)
        tail = arr[n:]
        del arr[n:]
        return tail

    def concat(self, server: int, out: str, first: str, second: str) -> None:
        """Server-local reinterpretation of two arrays as one (no transfer)."""
        st = self.servers[server]
        a = st.arrays.pop(first)
        b = st.arrays.pop(second)
        w = st.widths.pop(first)
        if st.widths.pop(second) != w:
            raise ProtocolError("width mismatch in concat")
        a.extend(b)
        st.arrays[out] = a
        st.widths[out] = w

    def free(self, server: int, array: str) -> None:
        st = self.servers[server]
        if st.arrays.pop(array, None) is not None:
            del st.widths[array]

    def exists(self, server: int, array: str) -> bool:
        return array in self.servers[server].arrays

    def length(self, server: int, array: str) -> int:
        return len(self._arr(server, array))

    def width(self, server: int, array: str) -> int:
        return self.servers[server].widths[array]

    def peek(self, server: int, array: str) -> list:
        """Unmetered copy of a server array.  For tests and instrumentation."""
        return list(self._arr(server, array))

    def snoop(self, server: int, array: str) -> list:
        """Unmetered live view, used only to precompute a data-dependent
        access sequence in bulk.  Every value a protocol acts on must still
        be fetched through :meth:`read`."""
        return self._arr(server, array)

    def _arr(self, server: int, array: str) -> list:
        try:
            return self.servers[server].arrays[array]
        except KeyError:
            raise ProtocolError(f"{party(server)} has no array {array!r}") from None

    # -- metered transfers ---------------------------------------------------

    def read(self, server: int, array: str, idx: Sequence[int],
             steps: Optional[Sequence] = None) -> list:
        """Read blocks ``idx`` (a range or list of positions) from a server."""
        st = self.servers[server]
        try:
            arr = st.arrays[array]
        except KeyError:
            raise ProtocolError(f"{party(server)} has no array {array!r}") from None
        if type(idx) is range and idx.step == 1:
            if idx.start < 0 or idx.stop > len(arr):
                raise IndexError(f"read {array}[{idx.start}:{idx.stop}] of {len(arr)}")
            vals = arr[idx.start:idx.stop]
        else:
            if self.check and len(idx) and min(idx) < 0:
                raise IndexError("negative index")
            vals = list(map(arr.__getitem__, idx))
        if self.trace is None:
            k = len(vals)
            c = self._cell
            c[0] += k
            c[1] += k * st.widths[array]
            self.round += k
        else:
            self._account(server, array, READ_REQ, idx, vals, steps)
        return vals

    def write(self, server: int, array: str, idx: Sequence[int],
              vals: Sequence[int], steps: Optional[Sequence] = None) -> None:
        st = self.servers[server]
        try:
            arr = st.arrays[array]
        except KeyError:
            raise ProtocolError(f"{party(server)} has no array {array!r}") from None
        k = len(vals)
        if k != len(idx):
            raise ProtocolError("index/value length mismatch")
        if type(idx) is range and idx.step == 1:
            if idx.start < 0 or idx.stop > len(arr):
                raise IndexError(f"write {array}[{idx.start}:{idx.stop}] of {len(arr)}")
            arr[idx.start:idx.stop] = vals
        else:
            if self.check and k and min(idx) < 0:
                raise IndexError("negative index")
            for i, v in zip(idx, vals):
                arr[i] = v
        if self.trace is None:
            c = self._cell
            c[0] += k
            c[1] += k * st.widths[array]
            self.round += k
        else:
            self._account(server, array, WRITE_REQ, idx, vals, steps)

    def fill(self, server: int, array: str, idx: Sequence[int],
             vals: Sequence[int], width: int, steps: Optional[Sequence] = None) -> None:
        """Allocate ``array`` with ``len(vals)`` slots and write ``vals`` at
        ``idx``, which must cover every slot.  Same traffic as
        :meth:`alloc` followed by :meth:`write`."""
        n = len(vals)
        if self.trace is not None or self.check:
            self.alloc(server, array, n, width)
            self.write(server, array, idx, vals, steps)
            return
        st = self.servers[server]
        if array in st.arrays:
            raise ProtocolError(f"{party(server)} already holds {array}")
        if type(idx) is range:
            arr = list(vals)
        else:
            arr = [0] * n
            for i, v in zip(idx, vals):
                arr[i] = v
        st.arrays[array] = arr
        st.widths[array] = width
        c = self._cell
        c[0] += n
        c[1] += n * width
        self.round += n

    def account(self, server: int, array: str, kind: str, idx: Sequence[int],
                vals: Sequence[int], steps: Optional[Sequence] = None) -> None:
        """Meter and record transfers whose effect a protocol applied to
        server memory itself (through :meth:`snoop`), in issue order."""
        self._account(server, array, kind, idx, vals, steps)

    def read_block(self, server: int, array: str, index: int) -> int:
        self._bounds(server, array, index)
        return self.read(server, array, range(index, index + 1))[0]

    def write_block(self, server: int, array: str, index: int, value: int) -> None:
        self._bounds(server, array, index)
        self.write(server, array, range(index, index + 1), [value])

    def relay_array(self, src: int, dst: int, array: str,
                    dst_array: Optional[str] = None) -> None:
        """Copy an array between servers through the client (2 blocks each)."""
        dst_array = dst_array or array
        n = len(self._arr(src, array))
        w = self.width(src, array)
        if not self.exists(dst, dst_array):
            self.alloc(dst, dst_array, n, w)
        if self.trace is not None:
            if self._batch is not None:
                raise ProtocolError("relay inside a batch")
            self._emit(0, party(src), party(dst), RELAY, array, None, 0, None)
        with self.batch():
            vals = self.read(src, array, range(n))
            self.write(dst, dst_array, range(n), vals)

    def _bounds(self, server: int, array: str, index: int) -> None:
        n = len(self._arr(server, array))
        if not 0 <= index < n:
            raise IndexError(f"{array}[{index}] out of range for length {n}")

    def _account(self, server, array, kind, idx, vals, steps):
        k = len(idx)
        w = self.servers[server].widths[array]
        c = self._cell
        c[0] += k
        c[1] += k * w
        if self.trace is None:
            self.round += k
            return
        s = party(server)
        if self._batch is None:
            for i, v in zip(idx, vals):
                self._emit(1, s, CLIENT, kind, array, i, 1, v)
            return
        self._calls += 1
        c = self._calls
        if steps is None:
            steps = range(k)
        buf = self._batch
        for j, (st, i, v) in enumerate(zip(steps, idx, vals)):
            buf.append(((st, c, j), (1, s, CLIENT, kind, array, i, 1, v)))

    def _emit(self, _tag, srv, _client, kind, array, index, size, content):
        tr = self.trace
        if kind == READ_REQ:
            r = self.round
            self.round += 1
            tr.add(TraceEvent(r, CLIENT, srv, READ_REQ, array, index, 0, None))
            tr.add(TraceEvent(r, srv, CLIENT, READ_RESP, array, index, 1, content))
        elif kind == WRITE_REQ:
            r = self.round
            self.round += 1
            tr.add(TraceEvent(r, CLIENT, srv, WRITE_REQ, array, index, 1, content))
        else:  # relay marker: srv is the source, _client the destination
            tr.add(TraceEvent(self.round, srv, _client, RELAY, array, None, 0, None))


# -- adversary views ----------------------------------------------------------

@dataclass
class AdversaryView:
    corrupt: int
    events: list
    honest_pattern: list


def extract_view(trace: Iterable[TraceEvent], corrupt: int) -> AdversaryView:
    """Split a trace into what server ``corrupt`` sees directly (with
    contents and indices) and the honest parties' pattern (round, sender,
    receiver, size only)."""
    me = party(corrupt)
    mine, honest = [], []
    for ev in trace:
        if ev.sender == me or ev.receiver == me:
            mine.append(ev)
        else:
            honest.append((ev.round, ev.sender, ev.receiver, ev.size_blocks))
    return AdversaryView(corrupt, mine, honest)


def write_jsonl(events: Iterable[TraceEvent], path, strip_index: bool = False) -> int:
    """Write events as JSON lines; returns the number written."""
    n = 0
    with open(path, "w") as fh:
        for ev in events:
            fh.write(ev.to_json(strip_index) + "\n")
            n += 1
    return n
