"""Per-role cryptographic overhead benchmark for PP-SND and the baseline SND."""

from __future__ import annotations

import csv
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable

from .errors import ConfigurationError, SimulationError, SummaryError
from .protocol import Outcome, SessionConfig
from .pseudonym import KEY_BITS_TO_LEVEL, SECURITY_LEVELS
from .simnet import World

PROTOCOLS = ("snd", "ppsnd")
ROLES = ("initiator", "responder")
CSV_COLUMNS = ("protocol", "role", "key_bits", "trial", "time_s")
SUMMARY_COLUMNS = ("protocol", "role", "key_bits", "n", "mean", "ci95_low", "ci95_high")
Z95 = 1.96
DEFAULT_TRIALS = 200
BENCH_DISTANCE_M = 100.0


@dataclass(frozen=True)
class BenchConfig:
    protocol: str
    key_bits: int
    trials: int = DEFAULT_TRIALS
    seed: int = 0

    def __post_init__(self):
        protocol = self.protocol.lower().replace("-", "")
        if protocol not in PROTOCOLS:
            raise ConfigurationError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        object.__setattr__(self, "protocol", protocol)
        if self.key_bits not in KEY_BITS_TO_LEVEL:
            raise ConfigurationError(f"key_bits must be one of {sorted(KEY_BITS_TO_LEVEL)}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigurationError("trials must be a positive integer")

    @property
    def security_level(self) -> int:
        return KEY_BITS_TO_LEVEL[self.key_bits]

    @property
    def signature_scheme(self) -> str:
        return SECURITY_LEVELS[self.security_level][1]


@dataclass(frozen=True)
class BenchRecord:
    protocol: str
    role: str
    key_bits: int
    trial: int
    time_s: float

    def row(self) -> dict:
        return {"protocol": self.protocol, "role": self.role, "key_bits": self.key_bits,
                "trial": self.trial, "time_s": repr(self.time_s)}


@dataclass(frozen=True)
class SummaryRow:
    protocol: str
    role: str
    key_bits: int
    n: int
    mean: float
    ci95_low: float
    ci95_high: float

    def row(self) -> dict:
        return {name: getattr(self, name) for name in SUMMARY_COLUMNS}


class _Cell:
    """Two honest devices 100 m apart, with credentials issued up front."""

    def __init__(self, config: BenchConfig):
        self.config = config
        session_cfg = replace(SessionConfig(), paillier_bits=config.key_bits)
        self.spacing = session_cfg.tau_snd
        self.world = World(session_cfg, seed=config.seed)
        common = dict(protocol=config.protocol, signature_scheme=config.signature_scheme)
        if config.protocol == "ppsnd":
            # one pseudonym covering the whole run keeps issuance out of the loop
            common.update(k=1, tau=(config.trials + 2) * self.spacing, paillier_bits=config.key_bits)
        self.a = self.world.add_device("A", (0.0, 0.0), **common)
        self.b = self.world.add_device("B", (BENCH_DISTANCE_M, 0.0), **common)

    def trial(self, trial: int) -> list[BenchRecord]:
        a, b = self.a, self.b
        a.meter.reset()
        b.meter.reset()
        a.start_discovery(trial * self.spacing)
        self.world.run_until_idle()
        result = a.results[-1] if len(a.results) == trial + 1 else None
        if result is None or result.outcome is not Outcome.NEIGHBOR:
            raise SimulationError(f"benchmark trial {trial} did not complete: {result}")
        out = []
        for role, device in (("initiator", a), ("responder", b)):
            elapsed = device.meter.reset()
            if elapsed <= 0:
                raise SimulationError("timer resolution too coarse: non-positive crypto time")
            out.append(BenchRecord(self.config.protocol, role, self.config.key_bits, trial, elapsed))
        return out


def run_bench(config: BenchConfig) -> list[BenchRecord]:
    """Run ``config.trials`` sessions between two honest devices 100 m apart and
    return one record per role per trial. Only time spent in cryptographic code
    is counted; credential issuance happens before the first trial.
    """
    return run_sweep([config])


def run_sweep(configs: Iterable[BenchConfig]) -> list[BenchRecord]:
    """Benchmark several cells with their trials interleaved round-robin, so slow
    drift of the host (frequency scaling, noisy neighbours) hits every cell alike.
    """
    cells = [_Cell(c) for c in configs]
    records: list[BenchRecord] = []
    for trial in range(max((c.config.trials for c in cells), default=0)):
        for cell in cells:
            if trial < cell.config.trials:
                records.extend(cell.trial(trial))
    return records


def summarize(records: Iterable[BenchRecord]) -> list[SummaryRow]:
    """Mean and normal-approximation 95% CI per (protocol, role, key_bits)."""
    groups: dict[tuple, list[float]] = defaultdict(list)
    for rec in records:
        groups[(rec.protocol, rec.role, rec.key_bits)].append(rec.time_s)
    rows = []
    for key in sorted(groups):
        values = groups[key]
        if len(values) < 2:
            raise SummaryError(f"group {key} has {len(values)} record(s); need at least 2")
        mean = statistics.fmean(values)
        half = Z95 * statistics.stdev(values) / math.sqrt(len(values))
        rows.append(SummaryRow(*key, len(values), mean, mean - half, mean + half))
    return rows


def write_records(path, records: Iterable[BenchRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.row())


def read_records(path) -> list[BenchRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ConfigurationError(f"{path}: expected CSV header {','.join(CSV_COLUMNS)}")
        try:
            return [BenchRecord(r["protocol"], r["role"], int(r["key_bits"]), int(r["trial"]),
                                float(r["time_s"])) for r in reader]
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{path}: malformed record: {exc}") from exc


def write_summary(path, rows: Iterable[SummaryRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.row())


def format_summary(rows: Iterable[SummaryRow]) -> str:
    lines = [f"{'protocol':<8} {'role':<10} {'bits':>5} {'n':>6} {'mean_ms':>10} {'ci95_ms':>23}"]
    for r in rows:
        lines.append(f"{r.protocol:<8} {r.role:<10} {r.key_bits:>5} {r.n:>6} {r.mean * 1e3:>10.3f} "
                     f"[{r.ci95_low * 1e3:>9.3f}, {r.ci95_high * 1e3:>9.3f}]")
    return "\n".join(lines)


__all__ = ["BenchConfig", "BenchRecord", "SummaryRow", "run_bench", "run_sweep", "summarize", "write_records",
           "read_records", "write_summary", "format_summary"]
