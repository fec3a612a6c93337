"""Acceptance gate: one pass/fail line per criterion, each at its stated tolerance."""
import math
import random
import time

import numpy as np
import pytest

from oracles import backoff_moments, normal_equation_solve
from wsnpsm.cli import main
from wsnpsm.experiment import ParamPoint, run_series
from wsnpsm.multihop import validate
from wsnpsm.psm_node import PsmState, fit_incremental, memory_footprint, observe, snapshot_means
from wsnpsm.regress import coef_confidence_intervals, fit_dataset, fit_ols, residuals
from wsnpsm.sim_core import MacConfig, PpdModel, draw_backoff

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def omegas(full_sweep):
    data, _ = full_sweep
    return {resp: {v: fit_dataset(data, v, resp).omega for v in range(1, 8)} for resp in ("psd", "plr")}


def test_ac1_frozen_backoff(criterion):
    t0 = time.perf_counter()
    got = draw_backoff(100, 31, MacConfig(b_p=10, b_min=10)).us
    elapsed = time.perf_counter() - t0
    criterion(1, "frozen backoff is 3520 us", got == 3520 and elapsed < 1e-3,
              f"got {got} us in {elapsed * 1e6:.1f} us")


def test_ac2_backoff_distribution(criterion):
    window = 31 * 20
    theory = math.sqrt((window ** 2 - 1) / 12) * 32
    _, exact = backoff_moments(window)
    t0 = time.perf_counter()
    run = run_series(ParamPoint(20, 20, 1), 100_000, seed=2, ppd=PpdModel(jitter_sd=0))
    elapsed = time.perf_counter() - t0
    ok = abs(theory - 5727) < 1 and abs(run.psd_sd - theory) <= 0.05 * theory
    criterion(2, "PSD spread matches uniform backoff", ok,
              f"sd {run.psd_sd:.1f} us vs theory {theory:.1f} us (exact 16-bit {exact:.1f}), {elapsed:.1f} s")


def test_ac3_ols_oracle(criterion):
    rng = random.Random(2024)
    cases = []
    for _ in range(100):
        m = rng.randint(1, 3)
        n = rng.randint(m + 2, 50)
        xs = [[rng.uniform(-10, 10) for _ in range(m)] for _ in range(n)]
        beta = [rng.uniform(-5, 5) for _ in range(m + 1)]
        ys = [beta[0] + sum(b * x for b, x in zip(beta[1:], row)) + rng.gauss(0, 2) for row in xs]
        cases.append((m, list(zip(xs, ys))))
    variant = {1: 1, 2: 4, 3: 7}
    t0 = time.perf_counter()
    models = [fit_ols(rows, variant[m]) for m, rows in cases]
    elapsed = time.perf_counter() - t0
    worst_coef = worst_resid = 0.0
    for (m, rows), model in zip(cases, models):
        expected = np.array(normal_equation_solve([r[0] for r in rows], [r[1] for r in rows]))
        rel = np.abs(np.array(model.coefficients) - expected) / np.maximum(np.abs(expected), 1e-300)
        worst_coef = max(worst_coef, float(rel.max()))
        e = residuals(model, rows)
        worst_resid = max(worst_resid, abs(e.sum()) / np.abs([y for _, y in rows]).sum())
    ok = worst_coef <= 1e-9 and worst_resid <= 1e-6 and elapsed < 1.0
    criterion(3, "OLS matches normal-equation oracle", ok,
              f"max coef rel err {worst_coef:.2e}, max residual sum {worst_resid:.2e}, fit time {elapsed:.3f} s")


def test_ac4_nested_omega(criterion, omegas):
    ok = all(o[7] >= o[5] >= o[1] and o[7] >= o[4] >= o[2] for o in omegas.values())
    detail = "; ".join(f"{r}: " + " ".join(f"psi{v}={o[v]:.4f}" for v in (1, 2, 4, 5, 7)) for r, o in omegas.items())
    criterion(4, "nested models never lose omega", ok, detail)


def test_ac5_qualitative_ordering(criterion, omegas, full_sweep):
    _, elapsed = full_sweep
    psd, plr = omegas["psd"], omegas["plr"]
    ok = (
        max(psd, key=psd.get) == 7
        and psd[7] >= 0.90
        and psd[1] > max(psd[2], psd[3])
        and plr[3] > max(plr[1], plr[2])
        and plr[2] <= 0.05
        and elapsed < 600
    )
    table = " ".join(f"psi{v}={100 * psd[v]:.2f}/{100 * plr[v]:.2f}" for v in range(1, 8))
    criterion(5, "omega ordering and bands", ok, f"PSD/PLR %: {table}; sweep {elapsed:.0f} s")


def test_ac6_plr_behaviour(criterion, full_sweep):
    data, _ = full_sweep
    solo = [r.plr for r in data if r.point.n_c == 1]
    heavy = {r.point.b_p: r.plr for r in data if r.point.p_s == 20 and r.point.n_c == 8}
    narrow = np.mean([heavy[b] for b in range(1, 6)])
    wide = np.mean([heavy[b] for b in range(16, 21)])
    slice8 = max(r.plr for r in data if r.point.n_c == 8)
    overall = max(r.plr for r in data)
    ok = all(p == 0.0 for p in solo) and narrow > wide and overall <= 1.0 and slice8 >= 0.3
    criterion(6, "PLR behaviour", ok,
              f"solo max {max(solo)}, P_S=20 N_C=8 narrow {narrow:.3f} > wide {wide:.3f}, N_C=8 max {slice8:.3f}")


def test_ac7_multihop(criterion, full_sweep):
    data, _ = full_sweep
    m7 = fit_dataset(data, 7, "psd")
    t0 = time.perf_counter()
    report = validate(m7, max_hops=10, samples=1000, seed=0)
    elapsed = time.perf_counter() - t0
    misses = [r.h for r in report.rows if not r.overlap]
    last = report.rows[-1]
    criterion(7, "E2ED forecast inside tandem CI for h=1..10", report.all_overlap and elapsed < 60,
              f"misses {misses or 'none'}; h=10 predicted {last.predicted_e2ed:.0f} us, "
              f"CI [{last.measured_ci.lo:.0f}, {last.measured_ci.hi:.0f}]; {elapsed:.1f} s")


def test_ac8_streaming_vs_batch(criterion, full_sweep):
    data, _ = full_sweep
    state = PsmState()
    for r in data:
        for v in r.psd_trace:
            observe(state, r.point, v)
    batch = {r.point: r.psd_mean for r in data}
    worst = max(abs(mean - batch[k]) / batch[k] for k, mean, _ in snapshot_means(state))
    inc = fit_incremental(state, 7)
    ref = fit_dataset(data, 7, "psd", per_trial=True)
    inside = all(c in ci for c, ci in zip(inc.coefficients, coef_confidence_intervals(ref, 0.95)))
    footprint = memory_footprint(state)
    ok = worst <= 1e-9 and inside and footprint == 20 * len(data)
    criterion(8, "streaming pipeline matches batch", ok,
              f"max mean rel err {worst:.1e}; coefficients inside per-trial CIs: {inside}; "
              f"{footprint} bytes for {len(data)} constellations")


def test_ac9_determinism(criterion, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        assert main(["sweep", "--samples", "20", "--seed", "7", "--threads", "1", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    rows = len(outs[0].splitlines()) - 1
    criterion(9, "sweep output is byte-identical across invocations", outs[0] == outs[1],
              f"{len(outs[0])} bytes, {rows} rows")
