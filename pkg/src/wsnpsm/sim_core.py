"""Discrete-event model of N senders contending for one ideal radio channel.

All times are integer microseconds counted from the shared trigger at t=0.
"""
from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple

SYMBOL_US = 16
SLOT_US = 2 * SYMBOL_US
MAX_FRAME_BYTES = 128
R_MAX = 0xFFFF

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class MacConfig:
    b_p: int = 10
    b_min: int = 10
    z_initial: int = 31
    z_congestion: int = 7
    slot_us: int = SLOT_US
    cca_us: int = 128
    turnaround_us: int = 12 * SYMBOL_US
    rate_bits_per_us: float = 0.25

    def __post_init__(self):
        if self.b_p < 1:
            raise ValueError(f"b_p must be >= 1, got {self.b_p}")
        if self.b_min < 0:
            raise ValueError(f"b_min must be >= 0, got {self.b_min}")
        if not self.z_initial > self.z_congestion > 0:
            raise ValueError("need z_initial > z_congestion > 0")
        if self.slot_us <= 0 or self.rate_bits_per_us <= 0:
            raise ValueError("slot_us and rate_bits_per_us must be positive")
        if self.cca_us < 0 or self.turnaround_us < 0:
            raise ValueError("cca_us and turnaround_us must be non-negative")


@dataclass(frozen=True)
class PpdModel:
    c0_send: float = 200.0
    c1_send: float = 8.0
    recv_factor: float = 0.5
    jitter_sd: float = 11.0

    def __post_init__(self):
        if min(self.c0_send, self.c1_send, self.jitter_sd) < 0:
            raise ValueError("PPD constants must be non-negative")
        if not 0 < self.recv_factor <= 1:
            raise ValueError(f"recv_factor must lie in (0, 1], got {self.recv_factor}")

    def send_mean(self, p_s: int) -> float:
        return self.c0_send + self.c1_send * p_s


@dataclass(frozen=True, slots=True)
class DelaySample:
    ppd: int
    mad: int
    ptd: int
    psd: int
    delivered: bool


class Backoff(NamedTuple):
    slots: int
    us: int


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from an arbitrary tuple of ints/strings."""
    text = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


class RngStream:
    """Counter-based random stream.

    Draw k is a pure function of (seed, k), so substreams can be handed to
    nodes, trials or worker processes without sharing state. With
    ``frozen_r`` set, every backoff draw returns that value while Gaussian
    jitter keeps coming from the stream.
    """

    __slots__ = ("seed", "frozen_r", "_key", "_counter", "_buf")

    def __init__(self, seed: int, frozen_r: int | None = None):
        if frozen_r is not None and not 0 <= frozen_r <= R_MAX:
            raise ValueError(f"frozen r must be a 16-bit value, got {frozen_r}")
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self.frozen_r = frozen_r
        self._key = self.seed.to_bytes(8, "little")
        self._counter = 0
        self._buf: list[int] = []

    def _word(self) -> int:
        if not self._buf:
            block = hashlib.blake2b(self._counter.to_bytes(8, "little"), key=self._key).digest()
            self._counter += 1
            self._buf = [int.from_bytes(block[i:i + 8], "little") for i in range(56, -8, -8)]
        return self._buf.pop()

    def draw_r(self) -> int:
        if self.frozen_r is not None:
            return self.frozen_r
        return self._word() & R_MAX

    def uniform(self) -> float:
        # open interval (0, 1); inv_cdf rejects the endpoints
        return ((self._word() >> 11) + 0.5) / (1 << 53)

    def gauss(self, sd: float) -> float:
        if sd == 0:
            return 0.0
        return sd * _STD_NORMAL.inv_cdf(self.uniform())

    def substream(self, *key: object) -> RngStream:
        return RngStream(derive_seed(self.seed, *key), self.frozen_r)


def draw_backoff(r: int, z: int, cfg: MacConfig) -> Backoff:
    if not 0 <= r <= R_MAX:
        raise ValueError(f"r must be a 16-bit value, got {r}")
    if z not in (cfg.z_initial, cfg.z_congestion):
        raise ValueError(f"z must be {cfg.z_initial} or {cfg.z_congestion}, got {z}")
    slots = r % (z * cfg.b_p) + cfg.b_min
    return Backoff(slots, slots * cfg.slot_us)


def compute_ptd(p_s: int, cfg: MacConfig) -> int:
    if not 0 <= p_s <= MAX_FRAME_BYTES:
        raise ValueError(f"packet size must lie in [0, {MAX_FRAME_BYTES}] bytes, got {p_s}")
    return int(round(p_s * 8 / cfg.rate_bits_per_us))


def _round_us(x: float) -> int:
    return max(0, math.floor(x + 0.5))


def compute_ppd(p_s: int, model: PpdModel, direction: str, rng: RngStream | None = None) -> int:
    if p_s < 0:
        raise ValueError(f"packet size must be non-negative, got {p_s}")
    base = model.send_mean(p_s)
    if direction == "recv":
        base *= model.recv_factor
    elif direction != "send":
        raise ValueError(f"direction must be 'send' or 'recv', got {direction!r}")
    jitter = rng.gauss(model.jitter_sd) if rng is not None else 0.0
    return _round_us(base + jitter)


@dataclass(frozen=True, slots=True)
class TrialTrace:
    """Per-node timeline of one trial, kept for channel-level checks."""

    samples: tuple[DelaySample, ...]
    tx_start: tuple[int, ...]
    ptd: int

    def busy_time(self) -> int:
        """Length of the union of all transmission intervals."""
        total = 0
        cur_lo = cur_hi = None
        for s in sorted(self.tx_start):
            e = s + self.ptd
            if cur_hi is None or s > cur_hi:
                if cur_hi is not None:
                    total += cur_hi - cur_lo
                cur_lo, cur_hi = s, e
            else:
                cur_hi = max(cur_hi, e)
        if cur_hi is not None:
            total += cur_hi - cur_lo
        return total


def trace_trial(n_c: int, p_s: int, cfg: MacConfig, ppd: PpdModel, rng: RngStream) -> TrialTrace:
    if n_c < 1:
        raise ValueError(f"need at least one contender, got {n_c}")
    ptd = compute_ptd(p_s, cfg)
    cca = cfg.cca_us
    turnaround = cfg.turnaround_us
    # congestion redraws dominate the cost under heavy load; inlined draw_backoff
    cong_window = cfg.z_congestion * cfg.b_p
    b_min, slot = cfg.b_min, cfg.slot_us

    streams = [rng.substream(j) for j in range(n_c)]
    ppds = [compute_ppd(p_s, ppd, "send", s) for s in streams]

    # (backoff_end, node, backoff_start); ties resolve by node id
    events = []
    for j, s in enumerate(streams):
        d = draw_backoff(s.draw_r(), cfg.z_initial, cfg).us
        events.append((ppds[j] + d, j, ppds[j]))
    heapq.heapify(events)

    tx_start = [0] * n_c
    on_air: list[tuple[int, int]] = []
    while events:
        t, j, b_start = heapq.heappop(events)
        # CCA runs at the tail of the backoff, followed by the RX/TX turnaround
        win_hi = t - turnaround
        win_lo = max(win_hi - cca, b_start)
        win_hi = max(win_hi, win_lo + 1)
        busy = False
        for s, e in on_air:
            if s < win_hi and e > win_lo:
                busy = True
                break
        if busy:
            d = (streams[j].draw_r() % cong_window + b_min) * slot
            heapq.heappush(events, (t + d, j, t))
        else:
            tx_start[j] = t
            on_air.append((t, t + ptd))

    samples = []
    for j in range(n_c):
        s_j = tx_start[j]
        e_j = s_j + ptd
        clean = True
        for k in range(n_c):
            if k != j and tx_start[k] < e_j and s_j < tx_start[k] + ptd:
                clean = False
                break
        mad = s_j - ppds[j]
        samples.append(DelaySample(ppds[j], mad, ptd, ppds[j] + mad + ptd, clean))
    return TrialTrace(tuple(samples), tuple(tx_start), ptd)


def run_trial(n_c: int, p_s: int, cfg: MacConfig, ppd: PpdModel, rng: RngStream) -> list[DelaySample]:
    """Simulate one event shower: all ``n_c`` nodes get a send request at t=0.

    Every node sends exactly once (no ACKs, no retransmission). A packet is
    lost whenever its airtime overlaps any other transmission.
    """
    return list(trace_trial(n_c, p_s, cfg, ppd, rng).samples)
