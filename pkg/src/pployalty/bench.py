"""Micro-benchmarks of the curve primitives and an operation-count cost model.

Rows time single primitive calls. The cost model then prices the Issuance
and Verification protocols by counting operations, and compares the
estimate with the measured wall-clock of the real protocol code.
"""

from __future__ import annotations

import json
import platform
import random
import statistics
import time
from dataclasses import asdict, dataclass, field

from . import _backend, crypto_core, pbsig
from .crypto_core import G1, G2, Message, hash_to_group, hash_to_scalar, scalar_inv, scalar_to_bytes

MIN_SAMPLES = 100
REPORT_VERSION = 1

# Row names, in report order.
G1_MUL = "G1 multiplication"
G2_MUL = "G2 multiplication"
G1_EXP = "G1 exponentiation"
G2_EXP = "G2 exponentiation"
G1_EXP_PRE = "G1 exponentiation (precomputed)"
PAIRING = "pairing"
PAIRING_PRE = "pairing (precomputed)"
HASH_SCALAR = "hash to scalar"
HASH_GROUP = "hash to group"
SCALAR_ADD = "scalar addition"
SCALAR_INV = "scalar inversion"

ROWS = (G1_MUL, G2_MUL, G1_EXP, G2_EXP, G1_EXP_PRE, PAIRING, PAIRING_PRE,
        HASH_SCALAR, HASH_GROUP, SCALAR_ADD, SCALAR_INV)

ISSUANCE = "issuance"
VERIFICATION = "verification"

# Published timings on a 512-bit Type-A symmetric pairing (jPBC, 2014 hardware).
# Context only: a different curve, library and machine.
REFERENCE_MS = {
    "multiplication": 0.09,
    "exponentiation": 17.2,
    "exponentiation (precomputed)": 2.48,
    "pairing": 20.8,
    "pairing (precomputed)": 10.76,
}
_REFERENCE_ROW = {
    G1_MUL: "multiplication",
    G1_EXP: "exponentiation",
    G1_EXP_PRE: "exponentiation (precomputed)",
    PAIRING: "pairing",
    PAIRING_PRE: "pairing (precomputed)",
}

# Operation counts per protocol run. Issuance exponentiations act on G2
# (blinded messages); the verification exponentiation acts on G1.
COST_MODEL = {
    ISSUANCE: {G2_EXP: 3, HASH_SCALAR: 1, SCALAR_ADD: 1, SCALAR_INV: 2},
    VERIFICATION: {G1_EXP: 1, G1_MUL: 1, HASH_GROUP: 1, HASH_SCALAR: 1, PAIRING: 2},
}


@dataclass(frozen=True)
class Stat:
    mean_ms: float
    median_ms: float
    stddev_ms: float
    samples: int

    @classmethod
    def of(cls, seconds):
        ms = [s * 1e3 for s in seconds]
        return cls(statistics.fmean(ms), statistics.median(ms),
                   statistics.stdev(ms) if len(ms) > 1 else 0.0, len(ms))


@dataclass(frozen=True)
class ProtocolCost:
    estimate_ms: float
    measured: Stat

    @property
    def ratio(self):
        return self.measured.median_ms / self.estimate_ms if self.estimate_ms else float("inf")

    def within(self, factor=2.0):
        return 1 / factor <= self.ratio <= factor


@dataclass
class BenchReport:
    backend: str
    samples: int
    rows: dict  # row name -> Stat
    protocols: dict = field(default_factory=dict)  # ISSUANCE/VERIFICATION -> ProtocolCost
    environment: dict = field(default_factory=dict)

    def ordering_holds(self):
        """pairing > exponentiation > multiplication, by median, in both groups."""
        med = {k: v.median_ms for k, v in self.rows.items()}
        return all(
            med[PAIRING] > med[exp] > med[mul]
            for exp, mul in ((G1_EXP, G1_MUL), (G2_EXP, G2_MUL))
        )

    def cost_model_holds(self, factor=2.0):
        return bool(self.protocols) and all(p.within(factor) for p in self.protocols.values())

    # -- serialization ---------------------------------------------------------

    def to_dict(self):
        return {
            "version": REPORT_VERSION,
            "backend": self.backend,
            "samples": self.samples,
            "rows": {k: asdict(v) for k, v in self.rows.items()},
            "protocols": {
                k: {"estimate_ms": p.estimate_ms, "measured": asdict(p.measured)}
                for k, p in self.protocols.items()
            },
            "reference_ms": dict(REFERENCE_MS),
            "environment": dict(self.environment),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version {d.get('version')!r}")
        return cls(
            backend=d["backend"],
            samples=d["samples"],
            rows={k: Stat(**v) for k, v in d["rows"].items()},
            protocols={
                k: ProtocolCost(p["estimate_ms"], Stat(**p["measured"]))
                for k, p in d["protocols"].items()
            },
            environment=d.get("environment", {}),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def table(self):
        head = f"{'operation':<34}{'mean ms':>11}{'median ms':>11}{'stddev ms':>11}{'reference ms':>14}"
        lines = [f"backend: {self.backend}, {self.samples} samples per row", head, "-" * len(head)]
        for name, s in self.rows.items():
            ref = REFERENCE_MS.get(_REFERENCE_ROW.get(name))
            ref_txt = f"{ref:>14.2f}" if ref is not None else f"{'':>14}"
            lines.append(f"{name:<34}{s.mean_ms:>11.4f}{s.median_ms:>11.4f}{s.stddev_ms:>11.4f}{ref_txt}")
        if self.protocols:
            lines.append("")
            lines.append(f"{'protocol':<34}{'model ms':>11}{'median ms':>11}{'ratio':>11}")
            for name, p in self.protocols.items():
                lines.append(f"{name:<34}{p.estimate_ms:>11.4f}{p.measured.median_ms:>11.4f}{p.ratio:>11.2f}")
        lines.append("")
        lines.append(f"ordering pairing > exp > mul: {'yes' if self.ordering_holds() else 'NO'}")
        return "\n".join(lines)


def _time(fn, args, samples, warmup):
    """Per-call wall-clock seconds; ``args`` is cycled so inputs vary."""
    for i in range(warmup):
        fn(*args[i % len(args)])
    out = []
    clock = time.perf_counter
    for i in range(samples):
        a = args[i % len(args)]
        t0 = clock()
        fn(*a)
        out.append(clock() - t0)
    return out


def measure_rows(params, samples, warmup=5, rng=None, pool=8):
    """Time every primitive row; no lower bound on ``samples``."""
    rng = rng or random.Random()
    be = params.backend
    scalars = [crypto_core.random_scalar(rng) for _ in range(pool)]
    sbytes = [scalar_to_bytes(k) for k in scalars]
    g1s = [params.g_pow(k).raw for k in scalars]
    g2s = [(params.h ** k).raw for k in scalars]
    msgs = [rng.randbytes(64) for _ in range(pool)]
    prepared = be.PreparedG2(g2s[0])
    q = params.q

    cases = {
        G1_MUL: (lambda a, b: a.add(b), [(g1s[i], g1s[i - 1]) for i in range(pool)]),
        G2_MUL: (lambda a, b: a.add(b), [(g2s[i], g2s[i - 1]) for i in range(pool)]),
        G1_EXP: (lambda a, e: a.mul(e), [(g1s[i], sbytes[i - 1]) for i in range(pool)]),
        G2_EXP: (lambda a, e: a.mul(e), [(g2s[i], sbytes[i - 1]) for i in range(pool)]),
        G1_EXP_PRE: (params._g_table.mul, [(e,) for e in sbytes]),
        PAIRING: (be.pairing, [(g1s[i], g2s[i - 1]) for i in range(pool)]),
        PAIRING_PRE: (prepared.pairing, [(a,) for a in g1s]),
        HASH_SCALAR: (hash_to_scalar, [(m,) for m in msgs]),
        HASH_GROUP: (lambda m: hash_to_group(m, be), [(m,) for m in msgs]),
        SCALAR_ADD: (lambda a, b: (a + b) % q, [(scalars[i], scalars[i - 1]) for i in range(pool)]),
        SCALAR_INV: (scalar_inv, [(k,) for k in scalars]),
    }
    return {name: Stat.of(_time(fn, args, samples, warmup)) for name, (fn, args) in cases.items()}


def estimate(rows, protocol):
    return sum(n * rows[op].median_ms for op, n in COST_MODEL[protocol].items())


def measure_protocols(params, samples, warmup=3, rng=None, pool=8):
    """Wall-clock of the real blind/sign/unblind and verify code paths."""
    rng = rng or random.Random()
    keys = pbsig.keygen(params, rng)
    runs = []
    for i in range(pool):
        c = f"bench-{i}"
        m = Message(crypto_core.random_scalar(rng), crypto_core.random_scalar(rng))
        runs.append((c, m, crypto_core.random_scalar(rng)))

    def issuance(c, m, r):
        # the customer's hash to group is outside the counted operations but inside the timing
        u, state = pbsig.blind(params, c, m, r)
        v = pbsig.sign_blinded(keys, c, u)
        return pbsig.unblind(v, state)

    sigs = [(c, m, issuance(c, m, r)) for c, m, r in runs]

    def verification(c, m, sig):
        if not pbsig.verify(params, keys.pk, c, m, sig):
            raise AssertionError("benchmark signature failed to verify")

    return {
        ISSUANCE: Stat.of(_time(issuance, runs, samples, warmup)),
        VERIFICATION: Stat.of(_time(verification, sigs, samples, warmup)),
    }


def run_bench(params=None, samples=MIN_SAMPLES, *, warmup=5, seed=None, backend=None):
    """Full report: primitive rows plus the protocol cost model."""
    if samples < MIN_SAMPLES:
        raise ValueError(f"at least {MIN_SAMPLES} samples per operation")
    if params is None:
        be = _backend.load(backend) if isinstance(backend, str) else backend
        params = crypto_core.setup(backend=be)
    rng = random.Random(seed)
    rows = measure_rows(params, samples, warmup, rng)
    measured = measure_protocols(params, samples, warmup, rng)
    protocols = {p: ProtocolCost(estimate(rows, p), measured[p]) for p in (ISSUANCE, VERIFICATION)}
    name = params.backend.__name__.rsplit(".", 1)[-1].lstrip("_")
    env = {"python": platform.python_version(), "machine": platform.machine(),
           "system": platform.system(), "curve": params.curve}
    return BenchReport(name if name != "purepy" else "python", samples, rows, protocols, env)
