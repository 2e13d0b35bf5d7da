import itertools

import pytest

from oram3.rng import RandomSource
from oram3.sharing import REAL, TAG_MASK, Codec, abstract, share_new
from oram3.simnet import Network, Trace

CODEC = Codec(key_bits=16, payload_bits=16, index_bits=12, level_bits=4)


class Scripted:
    """RNG stand-in that returns a fixed script of values, then zeros."""

    def __init__(self, values):
        self._it = iter(values)

    def bits(self, width):
        return next(self._it, 0)

    def below(self, k):
        return next(self._it, 0) % k


def pack(x, codec=CODEC):
    """Model entry -> block: ``None`` is a dummy, ``(key, payload)`` a real."""
    if x is None:
        return 0
    return codec.pack(REAL, x[0], x[1])


def unpack(v, codec=CODEC):
    if v & TAG_MASK != REAL:
        return None
    return codec.key(v), codec.payload(v)


def tagged(keys):
    """Give every real key a distinct payload so stability is observable."""
    ctr = itertools.count(1)
    return [None if k is None else (k, next(ctr)) for k in keys]


def upload(net, xs, rng, codec=CODEC):
    return share_new(net, codec.entry_width(), [pack(x, codec) for x in xs], rng)


def content(net, lay, codec=CODEC):
    return [unpack(v, codec) for v in abstract(net, lay)]


@pytest.fixture
def net():
    return Network(check=True)


@pytest.fixture
def rng():
    return RandomSource(1234, "test")


def traced():
    return Network(trace=Trace(contents=False))
