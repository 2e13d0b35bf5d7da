"""Verification harness: oracle replay, pattern audits, index-uniformity
tests and bandwidth scaling fits.

Everything here is deterministic given the configuration and seed.
"""
from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .oblivious import merge, stable_compact
from .otm import otm_build, otm_lookup
from .recursive import OramSystem, Request
from .rng import RandomSource, derive_seed
from .sharing import REAL, Codec, abstract, share_new
from .simnet import Network, ProtocolError, Trace

__all__ = [
    "ExperimentConfig", "AuditReport", "make_workload", "run_oracle_replay",
    "pattern_digest", "run_pattern_audit", "run_index_uniformity",
    "run_bandwidth_suite", "run_block_suite", "fit_exponent", "WORKLOADS",
    "big_block_payload", "flag_p_values", "ALPHA",
]

WORKLOADS = ("uniform", "repeat", "scan")


@dataclass
class ExperimentConfig:
    """One experiment.  ``N`` must be a power of two, ``ops >= 0``."""
    N: int = 16
    ops: int = 100
    seed: int = 0
    workload: str = "uniform"
    payload_bits: int = 64
    check: bool = False

    def __post_init__(self):
        if self.N < 1 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")
        if self.ops < 0:
            raise ValueError("ops must be non-negative")
        if self.workload not in WORKLOADS:
            raise ValueError(f"workload must be one of {WORKLOADS}")


@dataclass
class AuditReport:
    pattern_equal: Optional[bool] = None
    chi_square_p: dict = field(default_factory=dict)
    bandwidth_table: list = field(default_factory=list)
    fitted_exponent: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def make_workload(cfg: ExperimentConfig) -> list[Request]:
    """Request sequence for ``cfg``; half reads, half writes of random data."""
    r = random.Random(derive_seed(cfg.seed, f"workload:{cfg.workload}"))
    out = []
    for t in range(cfg.ops):
        if cfg.workload == "uniform":
            addr = r.randrange(cfg.N)
        elif cfg.workload == "repeat":
            addr = 0
        else:
            addr = t % cfg.N
        if r.random() < 0.5:
            out.append(Request("read", addr))
        else:
            out.append(Request("write", addr, r.getrandbits(cfg.payload_bits)))
    return out


# -- correctness --------------------------------------------------------------

def run_oracle_replay(cfg: ExperimentConfig,
                      requests: Optional[Sequence[Request]] = None) -> AuditReport:
    """Run the workload against the ORAM and a plain list side by side."""
    reqs = make_workload(cfg) if requests is None else list(requests)
    rep = AuditReport()
    if not reqs:
        return rep
    net = Network(check=cfg.check)
    oram = OramSystem(cfg.N, net, RandomSource(cfg.seed), cfg.payload_bits)
    ref = [0] * cfg.N
    mismatches = 0
    done = 0
    for t, req in enumerate(reqs):
        try:
            got = oram.access(req)
        except ProtocolError as exc:
            rep.violations.append(f"op {t}: {type(exc).__name__}: {exc}")
            break
        done += 1
        if got != ref[req.addr]:
            mismatches += 1
            if len(rep.violations) < 20:
                rep.violations.append(
                    f"op {t}: {req.op} {req.addr} returned {got}, expected {ref[req.addr]}")
        if req.op == "write":
            ref[req.addr] = req.data
    rep.stats = {
        "N": cfg.N, "ops": done, "seed": cfg.seed, "workload": cfg.workload,
        "mismatches": mismatches,
        "blocks_per_access": net.meter.under("access") / max(done, 1),
    }
    return rep


# -- obliviousness: deterministic pattern -------------------------------------

def pattern_digest(N: int, requests: Sequence[Request], seed: int,
                   payload_bits: int = 64) -> tuple[str, int]:
    """Hash of the content- and index-stripped trace of setup plus requests."""
    tr = Trace(keep=False, digest=True)
    oram = OramSystem(N, Network(trace=tr), RandomSource(seed), payload_bits)
    for req in requests:
        oram.access(req)
    return tr.digest(), len(tr)


def run_pattern_audit(cfg: ExperimentConfig, seq_a: Sequence[Request],
                      seq_b: Sequence[Request], seeds: int = 10) -> AuditReport:
    """Compare stripped traces of two equal-length sequences at one seed,
    and check each is seed-invariant over ``seeds`` seeds."""
    if len(seq_a) != len(seq_b):
        raise ValueError("request sequences must have equal length")
    rep = AuditReport()
    da = pattern_digest(cfg.N, seq_a, cfg.seed, cfg.payload_bits)
    db = pattern_digest(cfg.N, seq_b, cfg.seed, cfg.payload_bits)
    equal = da == db
    if not equal:
        rep.violations.append("traces of the two sequences differ")
    for s in range(1, seeds):
        for name, seq, ref in (("a", seq_a, da), ("b", seq_b, db)):
            if pattern_digest(cfg.N, seq, cfg.seed + s, cfg.payload_bits) != ref:
                equal = False
                rep.violations.append(f"sequence {name} pattern changes with seed")
    rep.pattern_equal = equal
    rep.stats = {"events": da[1], "digest": da[0]}
    return rep


# -- obliviousness: index distributions ---------------------------------------

def _first_reads(trace: Trace, b: int, match: Callable[[str], bool]) -> list[int]:
    me = f"S{b}"
    return [ev.index for ev in trace
            if ev.kind == "ReadReq" and ev.receiver == me and match(ev.array)]


def _otm_trial(n: int, ell: int, seed: int, rng_cls) -> list:
    """Per-server physical read indices of ``ell`` lookups on OTM[n]."""
    w = random.Random(seed)
    codec = Codec.for_capacity(2 * n)
    net = Network()
    rng = rng_cls(seed, "otm-audit")
    keys = sorted(w.sample(range(2 * n), n))
    lay = share_new(net, codec.entry_width(), [codec.pack(REAL, k) for k in keys], rng)
    st, U = otm_build(net, lay, rng, codec)
    pos = {codec.key(u): codec.unlink(codec.payload(u)) for u in abstract(net, U)}
    net.trace = Trace(contents=False)
    todo = list(keys)
    w.shuffle(todo)
    for _ in range(ell):
        if todo and w.random() < 0.5:
            k = todo.pop()
            otm_lookup(net, st, k, pos[k], rng)
        else:
            otm_lookup(net, st, None, None, rng)
    names = st.data.cols["e"]
    return [_first_reads(net.trace, b, lambda a, nm=names[b]: a == nm) for b in range(3)]


def _traversal_trial(protocol: str, n: int, seed: int, rng_cls) -> list:
    """Per-server physical indices read during a compaction/merge traversal."""
    w = random.Random(seed)
    codec = Codec.for_capacity(8 * n)
    net = Network()
    rng = rng_cls(seed, f"{protocol}-audit")

    def semi_sorted(k):
        keys = sorted(w.sample(range(4 * n), k))
        return _sprinkle([codec.pack(REAL, x) for x in keys] + [0] * (n - k), w)

    a = share_new(net, codec.entry_width(), semi_sorted(w.randrange(n + 1)), rng)
    net.trace = Trace(contents=False)
    if protocol == "compact":
        stable_compact(net, a, rng, codec)
    else:
        b = share_new(net, codec.entry_width(), semi_sorted(w.randrange(n + 1)), rng)
        net.trace = Trace(contents=False)
        merge(net, a, b, rng, codec)
    return [_first_reads(net.trace, b,
                         lambda arr, b=b: arr.startswith("P") and arr.endswith(f".e{b}"))
            for b in range(3)]


def _sprinkle(vals, w):
    """Random semi-sorted arrangement: reals keep their order, dummies land
    anywhere."""
    reals = [v for v in vals if v & 0xFF == REAL]
    n = len(vals)
    slots = sorted(w.sample(range(n), len(reals)))
    out = [0] * n
    for s, v in zip(slots, reals):
        out[s] = v
    return out


def run_index_uniformity(protocol: str, params: dict, trials: int,
                         rng_cls=RandomSource) -> dict:
    """Chi-square p-value, per corrupt server ``b``, of the first physical
    index that server serves, against the uniform distribution.

    ``protocol`` is ``"otm"`` (params ``n``, ``ell``), ``"compact"`` or
    ``"merge"`` (param ``n``).  Returns ``{b: p}``; empty if ``trials == 0``.
    """
    if trials <= 0:
        return {}
    n = params["n"]
    if protocol == "otm":
        buckets = 2 * n
        runs = [_otm_trial(n, params.get("ell", n), t, rng_cls) for t in range(trials)]
    elif protocol in ("compact", "merge"):
        buckets = n if protocol == "compact" else 2 * n
        runs = [_traversal_trial(protocol, n, t, rng_cls) for t in range(trials)]
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    out = {}
    for b in range(3):
        counts = np.zeros(buckets)
        for r in runs:
            counts[r[b][0]] += 1
        out[b] = float(stats.chisquare(counts).pvalue)
    return out


# -- bandwidth ----------------------------------------------------------------

ALPHA = 0.001


def flag_p_values(rep: AuditReport, alpha: float = ALPHA) -> None:
    """Record a violation for every p-value at or below ``alpha / m``, where
    ``m`` is the number of p-values in the report (Bonferroni)."""
    m = len(rep.chi_square_p)
    for name, p in rep.chi_square_p.items():
        if p <= alpha / max(m, 1):
            rep.violations.append(f"{name}: p = {p:.3g} <= {alpha}/{m}")


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Slope of log(y) against log(x); ``None`` with fewer than two points."""
    if len(xs) < 2:
        return None
    k, _ = np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)
    return float(k)


def big_block_payload(N: int) -> int:
    """Payload width for the large-block regime: ``log2(N)^2`` bytes."""
    D = max(1, N.bit_length() - 1)
    return 8 * D * D


def run_bandwidth_suite(sizes: Sequence[int], big_blocks: bool = False,
                        seed: int = 0, ops_factor: int = 4,
                        progress: Optional[Callable[[str], None]] = None) -> AuditReport:
    """Amortized ORAM cost over ``ops_factor * N`` uniform accesses per size.

    Reports blocks per access and bits moved per payload bit requested, and
    fits both against ``log2 N``.
    """
    rep = AuditReport()
    for N in sizes:
        payload = big_block_payload(N) if big_blocks else 64
        cfg = ExperimentConfig(N=N, ops=ops_factor * N, seed=seed, payload_bits=payload)
        reqs = make_workload(cfg)
        net = Network()
        oram = OramSystem(N, net, RandomSource(seed), payload)
        setup, setup_bits = net.meter.snapshot()
        for req in reqs:
            oram.access(req)
        total, total_bits = net.meter.snapshot()
        blocks = (total - setup) / len(reqs)
        bits = (total_bits - setup_bits) / len(reqs)
        row = {"N": N, "logN": oram.D, "accesses": len(reqs), "payload_bits": payload,
               "setup_blocks": setup, "blocks_per_access": blocks,
               "bits_per_access": bits, "blowup_bits": bits / payload}
        rep.bandwidth_table.append(row)
        if progress:
            progress(json.dumps(row))
    rows = [r for r in rep.bandwidth_table if r["logN"] > 0]
    logs = [r["logN"] for r in rows]
    rep.fitted_exponent["blocks_vs_logN"] = fit_exponent(logs, [r["blocks_per_access"] for r in rows])
    rep.fitted_exponent["blowup_vs_logN"] = fit_exponent(logs, [r["blowup_bits"] for r in rows])
    if len(rows) >= 3:
        # diagnostic: blocks/access as a polynomial in log N
        coef = np.polyfit(logs, [r["blocks_per_access"] for r in rows], 2)
        rep.stats["blocks_quadratic_in_logN"] = [float(c) for c in coef]
    return rep


def run_block_suite(protocol: str, sizes: Sequence[int], seed: int = 0) -> AuditReport:
    """Metered cost of one ``compact`` or ``merge`` (of two length-``n``
    inputs) per size, with the fitted exponent on ``n`` and doubling ratios."""
    rep = AuditReport()
    w = random.Random(seed)
    for n in sizes:
        codec = Codec.for_capacity(4 * n)
        net = Network()
        rng = RandomSource(seed, f"{protocol}:{n}")

        def layout():
            k = w.randrange(n + 1)
            keys = sorted(w.sample(range(4 * n), k))
            vals = _sprinkle([codec.pack(REAL, x) for x in keys] + [0] * (n - k), w)
            return share_new(net, codec.entry_width(), vals, rng)

        a = layout()
        b = layout() if protocol == "merge" else None
        before = net.meter.total
        if protocol == "compact":
            stable_compact(net, a, rng, codec)
        elif protocol == "merge":
            merge(net, a, b, rng, codec)
        else:
            raise ValueError(f"unknown protocol {protocol!r}")
        rep.bandwidth_table.append({"n": n, "blocks": net.meter.total - before})
    ns = [r["n"] for r in rep.bandwidth_table]
    cs = [r["blocks"] for r in rep.bandwidth_table]
    rep.fitted_exponent[f"{protocol}_vs_n"] = fit_exponent(ns, cs)
    rep.stats["doubling_ratios"] = [c2 / c1 for (n1, c1), (n2, c2)
                                    in zip(zip(ns, cs), zip(ns[1:], cs[1:])) if n2 == 2 * n1]
    return rep
