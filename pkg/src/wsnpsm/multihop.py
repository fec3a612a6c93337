"""End-to-end delay over tandem (chain) topologies and its linear-in-hops forecast."""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

from .experiment import ParamPoint
from .regress import Interval, RegressionModel, predict, t_quantile
from .sim_core import MacConfig, PpdModel, RngStream, compute_ppd, derive_seed, run_trial

DEFAULT_POINT = ParamPoint(10, 70, 1)
REPORT_COLUMNS = ("h", "predicted_us", "measured_mean_us", "ci_lo_us", "ci_hi_us", "overlap")


@dataclass(frozen=True)
class TandemConfig:
    hops: int = 1
    point: ParamPoint = DEFAULT_POINT
    samples: int = 1000
    mac: MacConfig = field(default_factory=MacConfig)
    ppd: PpdModel = field(default_factory=PpdModel)
    frozen_r: int | None = None

    def __post_init__(self):
        if self.hops < 1:
            raise ValueError(f"need at least one hop, got {self.hops}")
        if self.samples < 1:
            raise ValueError("need at least one sample")


def predict_e2ed(psd_model: RegressionModel | float, point: ParamPoint, h: int, ppd_model: PpdModel | None = None) -> float:
    """``h * (PSD + PPD_send / 2)``: every hop adds one send and one receive.

    ``psd_model`` may be a fitted PSD model or a known per-hop PSD in µs.
    """
    if h < 0:
        raise ValueError(f"hop count must be non-negative, got {h}")
    ppd_model = ppd_model or PpdModel()
    if isinstance(psd_model, RegressionModel):
        if psd_model.response != "psd":
            raise ValueError("end-to-end delay needs a PSD model")
        psd = predict(psd_model, point).value
    else:
        psd = float(psd_model)
    return h * (psd + 0.5 * ppd_model.send_mean(point.p_s))


def simulate_tandem(cfg: TandemConfig, seed: int) -> list[int]:
    """Measured E2ED per delivered packet, store-and-forward with one packet in flight.

    Each hop costs a full sending process at the forwarder plus the receive
    PPD at the next node (the destination included). Packets lost on any
    hop, only possible with N_C > 1, are dropped from the result.
    """
    mac = replace(cfg.mac, b_p=cfg.point.b_p)
    p_s, n_c = cfg.point.p_s, cfg.point.n_c
    base = RngStream(seed, cfg.frozen_r)
    out = []
    for k in range(cfg.samples):
        pkt = base.substream(k)
        total = 0
        for hop in range(cfg.hops):
            rng = pkt.substream(hop)
            sent = run_trial(n_c, p_s, mac, cfg.ppd, rng.substream("send"))[0]
            if not sent.delivered:
                break
            total += sent.psd + compute_ppd(p_s, cfg.ppd, "recv", rng.substream("recv"))
        else:
            out.append(total)
    return out


class ValidationRow(NamedTuple):
    h: int
    predicted_e2ed: float
    measured_mean: float
    measured_ci: Interval
    overlap: bool


@dataclass
class ValidationReport:
    rows: list[ValidationRow]

    @property
    def all_overlap(self) -> bool:
        return all(r.overlap for r in self.rows)


def mean_ci(values: list[float], level: float = 0.95) -> Interval:
    n = len(values)
    if n < 2:
        raise ValueError("need at least two measurements for a confidence interval")
    m = statistics.fmean(values)
    half = t_quantile(level, n - 1) * statistics.stdev(values) / math.sqrt(n)
    return Interval(m - half, m + half, level)


def validate(
    psd_model: RegressionModel | float,
    max_hops: int = 10,
    samples: int = 1000,
    seed: int = 0,
    point: ParamPoint = DEFAULT_POINT,
    mac: MacConfig | None = None,
    ppd: PpdModel | None = None,
    level: float = 0.95,
) -> ValidationReport:
    mac = mac or MacConfig()
    ppd = ppd or PpdModel()
    rows = []
    for h in range(1, max_hops + 1):
        cfg = TandemConfig(h, point, samples, mac, ppd)
        measured = simulate_tandem(cfg, derive_seed("tandem", seed, h))
        ci = mean_ci(measured, level)
        pred = predict_e2ed(psd_model, point, h, ppd)
        rows.append(ValidationRow(h, pred, statistics.fmean(measured), ci, pred in ci))
    return ValidationReport(rows)


def export_report_csv(report: ValidationReport, destination) -> None:
    if isinstance(destination, (str, Path)):
        with open(destination, "w", newline="") as fh:
            export_report_csv(report, fh)
        return
    w = csv.writer(destination, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.rows:
        w.writerow([r.h, repr(r.predicted_e2ed), repr(r.measured_mean), repr(r.measured_ci.lo),
                    repr(r.measured_ci.hi), str(r.overlap).lower()])
