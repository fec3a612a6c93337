"""Parameter sweeps over (B_P, P_S, N_C), run statistics and CSV persistence."""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from array import array
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple

from .sim_core import DelaySample, MacConfig, PpdModel, RngStream, derive_seed, run_trial

NOI = 0

SUMMARY_COLUMNS = ("b_p", "p_s", "n_c", "n_sent", "n_received", "plr", "psd_mean_us", "psd_sd_us", "seed")
RAW_COLUMNS = ("b_p", "p_s", "n_c", "trial", "node", "ppd_us", "mad_us", "ptd_us", "psd_us", "delivered")

GRID_BP = (1, 20, 1)
GRID_PS = (20, 120, 5)
GRID_NC = (1, 2, 4, 8)


class ParamPoint(NamedTuple):
    b_p: int
    p_s: int
    n_c: int

    def check_grid_range(self) -> None:
        if not 1 <= self.b_p <= 20:
            raise ValueError(f"b_p {self.b_p} outside [1, 20]")
        if not 20 <= self.p_s <= 120:
            raise ValueError(f"p_s {self.p_s} outside [20, 120]")
        if self.n_c not in GRID_NC:
            raise ValueError(f"n_c {self.n_c} not in {GRID_NC}")


def _span(lo: int, hi: int, step: int) -> list[int]:
    if step < 1 or hi < lo:
        raise ValueError(f"empty or invalid range {lo}:{hi}:{step}")
    return list(range(lo, hi + 1, step))


@dataclass(frozen=True)
class SweepConfig:
    b_p: tuple[int, int, int] = GRID_BP
    p_s: tuple[int, int, int] = GRID_PS
    n_c: tuple[int, ...] = GRID_NC
    samples_per_run: int = 1000
    master_seed: int = 0
    grid_ranges: bool = True

    def __post_init__(self):
        if self.samples_per_run < 1:
            raise ValueError("samples_per_run must be >= 1")
        if not self.n_c or min(self.n_c) < 1:
            raise ValueError("n_c set must be non-empty with members >= 1")
        _span(*self.b_p)
        _span(*self.p_s)

    def points(self) -> list[ParamPoint]:
        pts = [
            ParamPoint(b, p, n)
            for b, p, n in itertools.product(_span(*self.b_p), _span(*self.p_s), sorted(set(self.n_c)))
        ]
        if self.grid_ranges:
            for pt in pts:
                pt.check_grid_range()
        return pts


@dataclass
class RunResult:
    point: ParamPoint
    n_sent: int
    n_received: int | None
    plr: float | None
    psd_mean: float
    psd_sd: float
    seed: int | None = None
    # one tuple of per-node samples per trial, NOI first
    samples: list[tuple[DelaySample, ...]] | None = field(default=None, compare=False, repr=False)
    # compact NOI-only PSD record, for per-trial analysis of large sweeps
    psd_trace: array | None = field(default=None, compare=False, repr=False)

    def noi_psd(self) -> list[int]:
        if self.psd_trace is not None:
            return list(self.psd_trace)
        if self.samples is None:
            raise ValueError(f"run {tuple(self.point)} was executed without sample retention")
        return [trial[NOI].psd for trial in self.samples]


Dataset = list[RunResult]


def compute_plr(sent: int, received: int) -> float:
    if sent < 1:
        raise ValueError("PLR is undefined for zero sent packets")
    if not 0 <= received <= sent:
        raise ValueError(f"received count {received} outside [0, {sent}]")
    return (sent - received) / sent


def run_series(
    point: ParamPoint,
    n: int,
    seed: int,
    mac: MacConfig | None = None,
    ppd: PpdModel | None = None,
    keep_samples: bool = False,
    frozen_r: int | None = None,
    keep_psd_trace: bool = False,
) -> RunResult:
    """Run ``n`` independent event-shower trials at one constellation.

    Trials are independent: the inter-trigger guard is far longer than any
    trial, so no channel state carries over. Node 0 is the node of interest.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    mac = replace(mac or MacConfig(), b_p=point.b_p)
    ppd = ppd or PpdModel()
    base = RngStream(seed, frozen_r)

    received = 0
    total = 0
    total_sq = 0
    kept = [] if keep_samples else None
    trace = array("q") if keep_psd_trace else None
    for k in range(n):
        trial = run_trial(point.n_c, point.p_s, mac, ppd, base.substream(k))
        noi = trial[NOI]
        received += noi.delivered
        total += noi.psd
        total_sq += noi.psd * noi.psd
        if kept is not None:
            kept.append(tuple(trial))
        if trace is not None:
            trace.append(noi.psd)

    mean = total / n
    # integer sums keep the variance exact until the final division
    sd = math.sqrt((n * total_sq - total * total) / (n * (n - 1))) if n > 1 else 0.0
    return RunResult(point, n, received, compute_plr(n, received), mean, sd, seed, kept, trace)


def run_seed(master_seed: int, point: ParamPoint) -> int:
    return derive_seed("run", master_seed, *point)


def _run_job(args) -> RunResult:
    point, n, seed, mac, ppd, keep, keep_trace = args
    return run_series(point, n, seed, mac, ppd, keep, keep_psd_trace=keep_trace)


def default_workers() -> int:
    env = os.environ.get("WSN_PSM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(
    cfg: SweepConfig,
    mac: MacConfig | None = None,
    ppd: PpdModel | None = None,
    keep_samples: bool = False,
    workers: int | None = None,
    keep_psd_trace: bool = False,
) -> Dataset:
    """One RunResult per constellation, in (b_p, p_s, n_c) order."""
    jobs = [
        (pt, cfg.samples_per_run, run_seed(cfg.master_seed, pt), mac, ppd, keep_samples, keep_psd_trace)
        for pt in cfg.points()
    ]
    workers = workers or default_workers()
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order
        return list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (workers * 8))))


class CsvFormatError(ValueError):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def export_csv(dataset: Iterable[RunResult], destination: str | Path | io.TextIOBase) -> None:
    rows = (
        (r.point.b_p, r.point.p_s, r.point.n_c, r.n_sent, r.n_received, r.plr, r.psd_mean, r.psd_sd, r.seed)
        for r in dataset
    )
    _write(destination, SUMMARY_COLUMNS, rows)


def export_raw_csv(dataset: Iterable[RunResult], destination: str | Path | io.TextIOBase) -> None:
    def rows():
        for r in dataset:
            if r.samples is None:
                raise ValueError(f"run {tuple(r.point)} has no retained samples")
            for k, trial in enumerate(r.samples):
                for j, s in enumerate(trial):
                    yield (*r.point, k, j, s.ppd, s.mad, s.ptd, s.psd, int(s.delivered))

    _write(destination, RAW_COLUMNS, rows())


def _write(destination, header, rows) -> None:
    if isinstance(destination, (str, Path)):
        with open(destination, "w", newline="") as fh:
            _write(fh, header, rows)
        return
    w = csv.writer(destination, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def _read_rows(source, header) -> Iterable[tuple[int, list[str]]]:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    if not text:
        raise CsvFormatError("empty file: missing header")
    if not text.endswith("\n"):
        raise CsvFormatError("file does not end with a newline; refusing partial file")
    reader = csv.reader(io.StringIO(text))
    first = next(reader)
    if tuple(first) != header:
        raise CsvFormatError(f"line 1: expected header {','.join(header)}, got {','.join(first)}")
    for row in reader:
        lineno = reader.line_num
        if len(row) != len(header):
            raise CsvFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        yield lineno, row


def _opt(cast, text: str):
    return cast(text) if text != "" else None


def import_csv(source: str | Path | io.TextIOBase) -> Dataset:
    out = []
    for lineno, row in _read_rows(source, SUMMARY_COLUMNS):
        try:
            b_p, p_s, n_c, n_sent = (int(v) for v in row[:4])
            r = RunResult(
                ParamPoint(b_p, p_s, n_c),
                n_sent,
                _opt(int, row[4]),
                _opt(float, row[5]),
                float(row[6]),
                float(row[7]),
                _opt(int, row[8]),
            )
        except ValueError as exc:
            raise CsvFormatError(f"line {lineno}: {exc}") from None
        if r.n_received is not None and not 0 <= r.n_received <= r.n_sent:
            raise CsvFormatError(f"line {lineno}: n_received exceeds n_sent")
        if r.plr is not None and not 0.0 <= r.plr <= 1.0:
            raise CsvFormatError(f"line {lineno}: plr outside [0, 1]")
        out.append(r)
    return out


class RawRow(NamedTuple):
    point: ParamPoint
    trial: int
    node: int
    sample: DelaySample


def import_raw_csv(source: str | Path | io.TextIOBase) -> list[RawRow]:
    out = []
    for lineno, row in _read_rows(source, RAW_COLUMNS):
        try:
            v = [int(x) for x in row]
        except ValueError as exc:
            raise CsvFormatError(f"line {lineno}: {exc}") from None
        s = DelaySample(v[5], v[6], v[7], v[8], bool(v[9]))
        if s.psd != s.ppd + s.mad + s.ptd:
            raise CsvFormatError(f"line {lineno}: psd is not ppd + mad + ptd")
        out.append(RawRow(ParamPoint(*v[:3]), v[3], v[4], s))
    return out
