"""Seeded Monte-Carlo sweeps written as CSV.

CSV columns (RFC 4180, header row first)::

    preset, scheme, sweep, value, realization, seed, status,
    rate_nats, rate_bps, iterations, trajectory_bps, wall_time_s

``trajectory_bps`` is the per-iteration objective joined with ``;``.
``wall_time_s`` stays empty unless timing is requested, so that repeated
runs produce byte-identical files. A failed run keeps its row with the
exception name in ``status`` and empty numeric fields.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..config import SystemConfig, dbm_to_watts
from ..metrics import LN2
from ..scenario import draw_realization, make_rng
from .schemes import SCHEMES, run_scheme

SWEEPS = ("m", "pmax_dbm", "nt", "irs_x")

# generator stream per scheme; the quantized schemes reuse the continuous
# design's stream so that they quantize the same solution
_SCHEME_STREAM = {
    "optimized-continuous": 1,
    "quantized-b1": 1,
    "quantized-b2": 1,
    "random-phase": 2,
    "no-irs": 3,
    "af-relay": 4,
}


@dataclass
class ExperimentSpec:
    preset: str
    base: str  # "single-user" or "multi-user"
    sweep: str
    values: Sequence[float]
    realizations: int = 50
    schemes: Sequence[str] = ("optimized-continuous",)
    seed: int = 0
    out: Optional[str] = None
    overrides: dict = field(default_factory=dict)
    record_time: bool = False

    def validate(self) -> None:
        if self.base not in ("single-user", "multi-user"):
            raise ValueError(f"unknown base scenario {self.base!r}")
        if self.sweep not in SWEEPS:
            raise ValueError(f"unknown sweep {self.sweep!r}; choose from {', '.join(SWEEPS)}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if len(self.values) == 0:
            raise ValueError("sweep values must be nonempty")
        if len(self.schemes) == 0:
            raise ValueError("scheme list must be nonempty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
        for v in self.values:
            self.config_for(v)  # bad overrides surface here, not inside a worker

    def config_for(self, value: float) -> SystemConfig:
        over = dict(self.overrides)
        over["seed"] = self.seed
        if self.sweep == "m":
            over["num_irs_elements"] = int(value)
        elif self.sweep == "nt":
            over["tx_antennas"] = int(value)
        elif self.sweep == "pmax_dbm":
            over["max_power"] = dbm_to_watts(float(value))
        elif self.sweep == "irs_x":
            base = SystemConfig.from_preset(self.base)
            pos = over.get("irs_position", base.irs_position)
            over["irs_position"] = (float(value), pos[1], pos[2])
        return SystemConfig.from_preset(self.base, **over)


@dataclass
class ResultRow:
    preset: str
    scheme: str
    sweep: str
    value: float
    realization: int
    seed: int
    status: str = "ok"
    rate_nats: Optional[float] = None
    rate_bps: Optional[float] = None
    iterations: Optional[int] = None
    trajectory_bps: tuple = ()
    wall_time_s: Optional[float] = None

    def __post_init__(self):
        if self.rate_nats is not None and self.rate_bps is None:
            self.rate_bps = self.rate_nats / LN2

    def to_record(self) -> list:
        def num(x):
            return "" if x is None else repr(float(x))

        return [
            self.preset, self.scheme, self.sweep, repr(float(self.value)), str(self.realization),
            str(self.seed), self.status, num(self.rate_nats), num(self.rate_bps),
            "" if self.iterations is None else str(self.iterations),
            ";".join(repr(float(t)) for t in self.trajectory_bps), num(self.wall_time_s),
        ]

    @classmethod
    def from_record(cls, rec: Sequence[str]) -> "ResultRow":
        def num(x):
            return None if x == "" else float(x)

        return cls(
            preset=rec[0], scheme=rec[1], sweep=rec[2], value=float(rec[3]), realization=int(rec[4]),
            seed=int(rec[5]), status=rec[6], rate_nats=num(rec[7]), rate_bps=num(rec[8]),
            iterations=None if rec[9] == "" else int(rec[9]),
            trajectory_bps=tuple(float(t) for t in rec[10].split(";")) if rec[10] else (),
            wall_time_s=num(rec[11]),
        )


HEADER = [f.name for f in fields(ResultRow)]


def _work(args) -> list[ResultRow]:
    """All schemes on one (sweep value, realization) draw."""
    spec, vidx, value, r = args
    config = spec.config_for(value)
    _, channels = draw_realization(config, 0xB0, r, vidx)
    rows = []
    # the quantized schemes start from the continuous design on the same
    # stream, so a continuous run earlier in this task is reused
    continuous = None
    for scheme in spec.schemes:
        rng = make_rng(spec.seed, 0xB1, r, vidx, _SCHEME_STREAM[scheme])
        row = ResultRow(spec.preset, scheme, spec.sweep, float(value), r, spec.seed)
        start = time.perf_counter()
        try:
            out = run_scheme(scheme, config, channels, rng, continuous)
            if scheme == "optimized-continuous" and not spec.record_time:
                continuous = out
        except Exception as exc:  # recorded, the sweep goes on
            row.status = type(exc).__name__
        else:
            row.rate_nats = out.rate
            row.rate_bps = out.rate / LN2
            row.iterations = out.iterations
            row.trajectory_bps = tuple(t / LN2 for t in out.trajectory)
        if spec.record_time:
            row.wall_time_s = time.perf_counter() - start
        rows.append(row)
    return rows


def collect_rows(spec: ExperimentSpec, workers: int = 1) -> list[ResultRow]:
    spec.validate()
    tasks = [(spec, i, v, r) for i, v in enumerate(spec.values) for r in range(spec.realizations)]
    if workers <= 1:
        chunks = map(_work, tasks)
        return [row for chunk in chunks for row in chunk]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps submission order, so the file does not depend on scheduling
        return [row for chunk in pool.map(_work, tasks) for row in chunk]


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(HEADER)
    for row in rows:
        w.writerow(row.to_record())
    return buf.getvalue()


def read_rows(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [ResultRow.from_record(rec) for rec in rd]


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> Path:
    """Run every scheme on every (value, realization) and write the CSV."""
    if spec.out is None:
        raise ValueError("spec.out must name the output file")
    rows = collect_rows(spec, workers)
    path = Path(spec.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(rows_to_csv(rows))
    return path


def summarize(rows: Sequence[ResultRow]) -> list[dict]:
    """Mean and standard error of the rate (bps/Hz) per scheme and value."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row.scheme, row.value), []).append(row)
    out = []
    for (scheme, value), grp in groups.items():
        rates = np.array([g.rate_bps for g in grp if g.status == "ok"], dtype=float)
        its = np.array([g.iterations for g in grp if g.status == "ok"], dtype=float)
        n = rates.size
        out.append({
            "scheme": scheme, "value": value, "runs": len(grp), "failed": len(grp) - n,
            "mean_bps": float(rates.mean()) if n else math.nan,
            "stderr_bps": float(rates.std(ddof=1) / np.sqrt(n)) if n > 1 else math.nan,
            "mean_iterations": float(its.mean()) if n else math.nan,
        })
    return out


def format_summary(summary: Sequence[dict]) -> str:
    lines = [f"{'scheme':<22}{'value':>10}{'runs':>6}{'fail':>6}{'mean bps/Hz':>14}{'stderr':>10}{'iters':>8}"]
    for s in summary:
        lines.append(f"{s['scheme']:<22}{s['value']:>10g}{s['runs']:>6}{s['failed']:>6}"
                     f"{s['mean_bps']:>14.4f}{s['stderr_bps']:>10.4f}{s['mean_iterations']:>8.2f}")
    return "\n".join(lines)
