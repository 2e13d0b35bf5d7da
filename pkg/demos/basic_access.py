"""Store a small array in the three-server ORAM, read it back, and see
where the bandwidth goes."""
from collections import Counter

from oram3 import Network, OramSystem, RandomSource

N = 64
net = Network()
oram = OramSystem(N, net, RandomSource(7))
setup = net.meter.total
print(f"initialised N={N}: {setup} blocks moved")

for a in range(0, N, 8):
    oram.write(a, 1000 + a)
print("read back:", [oram.read(a) for a in range(0, N, 8)])

# totals per protocol step, setup included: rebuild shuffles dominate
per_phase = Counter()
for label, blocks in net.meter.blocks.items():
    per_phase[label.split("/")[-1]] += blocks
accesses = oram.t
print(f"{accesses} accesses, {(net.meter.total - setup) / accesses:.0f} blocks/access on average")
for phase, blocks in per_phase.most_common(6):
    print(f"  {phase:>12}: {blocks:>8}")
