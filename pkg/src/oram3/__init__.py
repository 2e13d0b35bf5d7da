"""Three-server, perfectly secure oblivious RAM over XOR secret sharing.

A client keeps O(1) state and outsources an N-block memory to three
simulated servers.  Any one server, even if it sees everything it stores
and every message it handles, learns nothing about which addresses are
accessed.  Bandwidth is O(log^2 N) blocks per access.

Quick use::

    from oram3 import OramSystem
    oram = OramSystem(1024)
    oram.write(5, 42)
    assert oram.read(5) == 42
"""
from .harness import AuditReport, ExperimentConfig
from .oblivious import merge, stable_compact
from .otm import CapacityError, NonRecurrenceError, otm_build, otm_getall, otm_lookup
from .perm import gen_random_perm, permute, unpermute
from .pos_oram import PosOram
from .recursive import OramSystem, Request, oram_access, oram_init
from .rng import ConstantRandom, RandomSource
from .sharing import Codec, Entry, Layout, reconstruct3, split3
from .simnet import BandwidthMeter, Network, ProtocolError, Trace

__version__ = "0.1.0"

__all__ = [
    "OramSystem", "Request", "oram_init", "oram_access", "PosOram",
    "otm_build", "otm_lookup", "otm_getall", "CapacityError", "NonRecurrenceError",
    "stable_compact", "merge", "gen_random_perm", "permute", "unpermute",
    "Codec", "Entry", "Layout", "split3", "reconstruct3",
    "Network", "Trace", "BandwidthMeter", "ProtocolError",
    "RandomSource", "ConstantRandom", "ExperimentConfig", "AuditReport",
]
