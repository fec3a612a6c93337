"""Streaming inspection pipeline as it would run on a memory-starved mote.

Each parameter constellation keeps a running mean (plus, as an extra, the
running sum of squared deviations). Nothing else about the raw samples is
stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .experiment import Dataset, ParamPoint, RunResult, export_csv, import_csv
from .regress import VARIANTS, RegressionModel, fit_ols, predict

ConstellationKey = ParamPoint

N_PARAMS = 3
WORD_BYTES = 4
CELL_BYTES = (N_PARAMS + 2) * WORD_BYTES  # three parameters + mean + count


@dataclass
class StreamCell:
    key: ConstellationKey
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0


@dataclass
class PsmState:
    cells: dict[ConstellationKey, StreamCell] = field(default_factory=dict)


def observe(state: PsmState, key: ConstellationKey, psd_sample: float) -> PsmState:
    """Fold one PSD observation into its constellation's running moments."""
    if psd_sample < 0:
        raise ValueError(f"PSD sample must be non-negative, got {psd_sample}")
    key = ConstellationKey(*key)
    cell = state.cells.get(key)
    if cell is None:
        cell = state.cells[key] = StreamCell(key)
    cell.count += 1
    delta = psd_sample - cell.mean
    cell.mean += delta / cell.count
    cell.m2 += delta * (psd_sample - cell.mean)
    return state


def snapshot_means(state: PsmState) -> list[tuple[ConstellationKey, float, int]]:
    return [(k, c.mean, c.count) for k, c in sorted(state.cells.items())]


def memory_footprint(state: PsmState, with_variance: bool = False) -> int:
    """Logical storage in bytes; the m2 accumulator is only counted on request."""
    per_cell = CELL_BYTES + (WORD_BYTES if with_variance else 0)
    return per_cell * len(state.cells)


def fit_incremental(state: PsmState, variant: int, count_weighted: bool = False) -> RegressionModel:
    """PSD model over the per-constellation means, one row per key."""
    names = VARIANTS.get(variant)
    if names is None:
        raise ValueError(f"unknown model variant {variant}; expected 1..7")
    snap = snapshot_means(state)
    if len(snap) < len(names) + 2:
        raise ValueError(f"need at least {len(names) + 2} constellations for variant {variant}, have {len(snap)}")
    rows = [(tuple(float(getattr(k, n)) for n in names), mean) for k, mean, _ in snap]
    weights = [float(c) for _, _, c in snap] if count_weighted else None
    return fit_ols(rows, variant, "psd", weights)


def assess(model: RegressionModel, requirement: float, p_s: int, n_c: int) -> list[int]:
    """Backoff periods in [1, 20] whose predicted PSD meets ``requirement``."""
    if "b_p" not in model.predictors:
        raise ValueError(f"model variant {model.variant} does not use b_p")
    if model.coefficients[1 + model.predictors.index("b_p")] <= 0:
        raise ValueError("b_p coefficient must be positive for the feasible set to be a prefix")
    return [
        b for b in range(1, 21) if predict(model, ParamPoint(b, p_s, n_c)).value <= requirement
    ]


def to_run_results(state: PsmState) -> list[RunResult]:
    """Mean-only run summaries; loss counts are unknown to the stream."""
    return [
        RunResult(c.key, c.count, None, None, c.mean, math.sqrt(c.variance))
        for _, c in sorted(state.cells.items())
    ]


def save_state(state: PsmState, destination) -> None:
    export_csv(to_run_results(state), destination)


def load_state(source) -> PsmState:
    """Rebuild cells from a run-summary file (means, counts and spreads)."""
    return state_from_dataset(import_csv(source))


def state_from_dataset(dataset: Dataset) -> PsmState:
    state = PsmState()
    for r in dataset:
        m2 = r.psd_sd ** 2 * (r.n_sent - 1) if r.n_sent > 1 else 0.0
        state.cells[r.point] = StreamCell(r.point, r.n_sent, r.psd_mean, m2)
    return state
