"""What a server sees.  Two very different request sequences of the same
length produce byte-identical access skeletons (who sent what kind of
message about which array, in which round)."""
from oram3 import Network, OramSystem, RandomSource, Trace
from oram3.recursive import Request


def observe(requests, seed):
    net = Network(trace=Trace(keep=False, digest=True))
    oram = OramSystem(16, net, RandomSource(seed))
    for q in requests:
        oram.access(q)
    return net.trace


hot = [Request("read", 0)] * 12
spread = [Request("write", (5 * k) % 16, k) for k in range(12)]

a, b = observe(hot, seed=1), observe(spread, seed=2)
print("events:", len(a), len(b))
print("skeleton digests equal:", a.digest() == b.digest())

