import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import backoff_moments
from wsnpsm.sim_core import (
    MacConfig,
    PpdModel,
    RngStream,
    compute_ppd,
    compute_ptd,
    draw_backoff,
    run_trial,
    trace_trial,
)

NO_JITTER = PpdModel(jitter_sd=0)


@pytest.mark.parametrize(
    "r, z, b_p, slots, us",
    [
        (100, 31, 10, 110, 3520),
        (0, 7, 1, 10, 320),
        (65535, 7, 20, 25, 800),
    ],
)
def test_draw_backoff_examples(r, z, b_p, slots, us):
    assert draw_backoff(r, z, MacConfig(b_p=b_p)) == (slots, us)


@pytest.mark.parametrize("b_p", [1, 7, 20])
@pytest.mark.parametrize("z", [31, 7])
def test_draw_backoff_range_exhaustive(b_p, z):
    cfg = MacConfig(b_p=b_p)
    got = {draw_backoff(r, z, cfg).slots for r in range(65536)}
    assert min(got) == cfg.b_min
    assert max(got) == z * b_p - 1 + cfg.b_min


def test_draw_backoff_rejects_bad_inputs():
    cfg = MacConfig()
    with pytest.raises(ValueError):
        draw_backoff(65536, 31, cfg)
    with pytest.raises(ValueError):
        draw_backoff(5, 13, cfg)


@pytest.mark.parametrize("p_s, us", [(20, 640), (0, 0), (128, 4096), (70, 2240)])
def test_compute_ptd(p_s, us):
    assert compute_ptd(p_s, MacConfig()) == us


def test_compute_ptd_rejects_oversized_frame():
    with pytest.raises(ValueError):
        compute_ptd(129, MacConfig())


def test_compute_ppd_examples():
    assert compute_ppd(20, NO_JITTER, "send") == 360
    assert compute_ppd(0, PpdModel(c0_send=0, jitter_sd=0), "send") == 0
    assert compute_ppd(70, NO_JITTER, "recv") == 380


def test_ppd_jitter_spread():
    rng = RngStream(3)
    xs = [compute_ppd(70, PpdModel(), "send", rng) for _ in range(20000)]
    assert statistics.fmean(xs) == pytest.approx(760, abs=0.5)
    assert statistics.stdev(xs) == pytest.approx(11, rel=0.03)


def test_config_invariants():
    with pytest.raises(ValueError):
        MacConfig(b_p=0)
    with pytest.raises(ValueError):
        MacConfig(z_initial=7, z_congestion=7)
    with pytest.raises(ValueError):
        PpdModel(recv_factor=0)


def test_frozen_single_sender_components():
    [s] = run_trial(1, 70, MacConfig(b_p=10), NO_JITTER, RngStream(1, frozen_r=100))
    assert (s.ppd, s.mad, s.ptd, s.psd, s.delivered) == (760, 3520, 2240, 6520, True)


@given(seed=st.integers(0, 2**64 - 1), b_p=st.integers(1, 20), p_s=st.integers(0, 128))
@settings(max_examples=50, deadline=None)
def test_sole_sender_always_delivered(seed, b_p, p_s):
    [s] = run_trial(1, p_s, MacConfig(b_p=b_p), PpdModel(), RngStream(seed))
    assert s.delivered


@given(
    seed=st.integers(0, 2**64 - 1),
    n_c=st.integers(1, 10),
    b_p=st.integers(1, 20),
    p_s=st.integers(20, 120),
)
@settings(max_examples=80, deadline=None)
def test_sample_invariants(seed, n_c, b_p, p_s):
    cfg = MacConfig(b_p=b_p)
    samples = run_trial(n_c, p_s, cfg, PpdModel(), RngStream(seed))
    assert len(samples) == n_c
    for s in samples:
        assert s.psd == s.ppd + s.mad + s.ptd
        assert s.mad >= cfg.b_min * cfg.slot_us
        assert s.ptd == p_s * 32
    assert run_trial(n_c, p_s, cfg, PpdModel(), RngStream(seed)) == samples


def _identical_draw_seed(b_p: int) -> int:
    window = 31 * b_p
    for seed in range(10_000):
        base = RngStream(seed)
        if base.substream(0).draw_r() % window == base.substream(1).draw_r() % window:
            return seed
    raise AssertionError("no seed found")


def test_identical_initial_backoffs_collide():
    seed = _identical_draw_seed(10)
    a, b = run_trial(2, 70, MacConfig(b_p=10), NO_JITTER, RngStream(seed))
    assert a.mad == b.mad
    assert not a.delivered and not b.delivered


def test_sender_inside_turnaround_window_is_not_sensed():
    # the second node's CCA ends before the first transmission is on air
    cfg = MacConfig(b_p=10)
    for seed in range(2000):
        tr = trace_trial(2, 70, cfg, NO_JITTER, RngStream(seed))
        gap = abs(tr.tx_start[0] - tr.tx_start[1])
        if gap <= cfg.turnaround_us:
            assert not any(s.delivered for s in tr.samples)
        elif gap >= tr.ptd:
            assert all(s.delivered for s in tr.samples)


def test_mad_mean_matches_uniform_backoff():
    b_p = 10
    cfg = MacConfig(b_p=b_p)
    base = RngStream(11)
    mads = [run_trial(1, 20, cfg, NO_JITTER, base.substream(k))[0].mad for k in range(100_000)]
    target = ((31 * b_p - 1) / 2 + cfg.b_min) * 32
    assert statistics.fmean(mads) == pytest.approx(target, rel=0.01)
    exact_mean, _ = backoff_moments(31 * b_p)
    assert statistics.fmean(mads) == pytest.approx(exact_mean, rel=0.005)


def test_busy_time_non_decreasing_in_contenders():
    cfg = MacConfig(b_p=5)
    base = RngStream(2024)
    totals = []
    for n_c in (1, 2, 4, 8):
        totals.append(sum(trace_trial(n_c, 50, cfg, PpdModel(), base.substream(k)).busy_time() for k in range(300)))
    assert totals == sorted(totals)


def test_rng_stream_is_reproducible_and_16_bit():
    a, b = RngStream(99), RngStream(99)
    xs = [a.draw_r() for _ in range(1000)]
    assert xs == [b.draw_r() for _ in range(1000)]
    assert all(0 <= x <= 0xFFFF for x in xs)
    assert len({RngStream(99).substream(k).draw_r() for k in range(50)}) > 40
    assert [RngStream(5, frozen_r=100).draw_r() for _ in range(3)] == [100, 100, 100]
