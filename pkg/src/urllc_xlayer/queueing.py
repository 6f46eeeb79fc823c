"""Queueing analytics, transmit/drop policies, and frame-level simulation.

Analytics: the M/D/1 stationary queue-length pmf and delay CCDF, and the
effective-bandwidth exponential bound on delay violation.

Policies: threshold-power / channel-inversion power allocation and proactive
dropping, both driven by queue length and instantaneous gain.

Simulation: three engines behind one ``simulate`` entry point.

* constant-service fluid ("fluid" mode, no policy): per-packet Lindley
  recursion with arrivals placed continuously inside each frame.  This is the
  continuous-time single-server queue the analytic formulas describe; the
  delay CCDF is reported at queue-length lattice thresholds L (delay L/s
  frames), where the queue-length/delay mapping is exact.  Frame-end batching
  was measured to bias the small-threshold CCDF by several percent, far
  beyond sampling noise at 1e8 frames, so it is not used here.
* policy fluid ("fluid" mode with a policy): vectorized frame-level engine.
  Arrivals batch at frame boundaries (a packet arriving mid-frame can first
  be sent in the next frame); service is fluid.  Under the threshold policy
  total departures equal min(Q, s) regardless of the channel, so the queue
  trajectory is a constant-drain Lindley recursion and the channel only
  splits departures into transmitted vs proactively dropped.
* packet ("packet" mode): exact per-frame reference loop with an integer
  queue, FIFO arrival tags, head-of-line deadline drops, and whole-packet
  service metered by a busy-period credit accumulator (the fractional
  per-frame budget is floored cumulatively, which stays conservative).
  Intended for cross-checks and for service rates of at least a packet per
  frame; quantization distorts sub-packet-per-frame scenarios.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from mpmath import mp
from scipy import optimize

from .errors import InstabilityError
from .phy_rate import ChannelModel, SpectrumAllocation, fbl_packets, inverse_q, sample_gain
from .traffic import ArrivalModel, generate_arrivals, initial_phase, sample_arrivals

LN2 = math.log(2.0)

__all__ = [
    "md1_queue_pmf",
    "md1_delay_ccdf",
    "delay_violation_upper_bound",
    "PolicyConfig",
    "s_threshold",
    "power_policy",
    "drop_policy",
    "QueueState",
    "step_queue",
    "LossCounters",
    "SimResult",
    "simulate",
    "export_delay_ccdf_csv",
]


# ---------------------------------------------------------------------------
# analytics
# ---------------------------------------------------------------------------

def md1_queue_pmf(utilization: float, max_length: int) -> np.ndarray:
    """Stationary M/D/1 queue-length probabilities pi_0 .. pi_max_length.

    Uses the classic alternating sum; evaluated in extended precision because
    the terms grow like exp(l * utilization) while pi_l shrinks.
    """
    if utilization < 0:
        raise ValueError("utilization must be nonnegative")
    if utilization >= 1:
        raise InstabilityError(f"utilization {utilization} >= 1 has no stationary queue")
    if max_length < 0:
        raise ValueError("max_length must be >= 0")
    digits = 30 + int(0.45 * max_length * utilization) + max_length // 8
    with mp.workdps(digits):
        x = mp.mpf(utilization)
        pis = [mp.mpf(1) - x]
        if max_length >= 1:
            pis.append((1 - x) * (mp.exp(x) - 1))
        for l in range(2, max_length + 1):
            acc = mp.exp(l * x)
            for j in range(1, l):
                acc += mp.exp(j * x) * (-1) ** (l - j) * (
                    (j * x) ** (l - j) / mp.factorial(l - j)
                    + (j * x) ** (l - j - 1) / mp.factorial(l - j - 1)
                )
            pis.append((1 - x) * acc)
        out = np.array([float(p) for p in pis])
    return out


def md1_delay_ccdf(arrival_rate: float, service_rate: float, delay_frames: float) -> float:
    """Pr{queueing delay > delay_frames} for Poisson arrivals at constant service.

    Rates in packets/frame, delay in frames.  The delay threshold maps to the
    queue length L = floor(service_rate * delay_frames); the mapping is exact
    at lattice thresholds L / service_rate.
    """
    if service_rate <= 0:
        raise ValueError("service rate must be positive")
    if arrival_rate >= service_rate:
        raise InstabilityError("arrival rate must be below the service rate")
    if delay_frames < 0:
        raise ValueError("delay threshold must be nonnegative")
    xi = arrival_rate / service_rate
    L = int(math.floor(service_rate * delay_frames + 1e-9))
    return float(max(1.0 - md1_queue_pmf(xi, L).sum(), 0.0))


def delay_violation_upper_bound(theta: float, eb_packets_per_s: float, delay_s: float) -> float:
    """Effective-bandwidth bound exp(-theta E^B D), clamped to [0, 1]."""
    if theta <= 0 or eb_packets_per_s <= 0:
        raise ValueError("theta and effective bandwidth must be positive")
    if delay_s < 0:
        raise ValueError("delay must be nonnegative")
    return float(min(1.0, math.exp(-theta * eb_packets_per_s * delay_s)))


# ---------------------------------------------------------------------------
# policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolicyConfig:
    """Operating point of the threshold-power transmit/drop policy.

    service_per_frame is the constant departure budget (T_f E^B, packets per
    frame).  required_snr must be consistent with error_prob and the budget
    through the finite-blocklength rate relation (checked at construction,
    with the high-SNR dispersion-one convention used by the design equations).
    """

    threshold_power_w: float
    required_snr: float
    service_per_frame: float
    error_prob: float
    spectrum: SpectrumAllocation
    channel: ChannelModel
    packet_bits: float

    def __post_init__(self):
        if min(self.threshold_power_w, self.required_snr, self.service_per_frame,
               self.packet_bits) <= 0:
            raise ValueError("policy parameters must be positive")
        if not 0.0 < self.error_prob <= 0.5:
            raise ValueError("error_prob must be in (0, 0.5]")
        n_s = self.spectrum.blocklength
        lhs = math.log1p(self.required_snr)
        rhs = (self.packet_bits * LN2 * self.service_per_frame / n_s
               + math.sqrt(1.0 / n_s) * inverse_q(self.error_prob))
        if abs(lhs - rhs) > 1e-6 * max(abs(lhs), abs(rhs)):
            raise ValueError(
                f"required_snr inconsistent with service/error target: "
                f"log1p(snr)={lhs:.9g} vs required {rhs:.9g}"
            )

    @property
    def gain_threshold(self) -> float:
        """Gain below which threshold power cannot sustain the budget."""
        return (self.channel.noise_psd_w_per_hz * self.spectrum.total_bandwidth_hz
                * self.required_snr / (self.channel.average_gain * self.threshold_power_w))


def s_threshold(policy: PolicyConfig, g):
    """Packets deliverable this frame at threshold power and gain g (clamped at 0)."""
    return fbl_packets(policy.spectrum, policy.channel, policy.threshold_power_w, g,
                       policy.packet_bits, policy.error_prob)


def power_policy(policy: PolicyConfig, queue_packets: float, g: float) -> float:
    """Transmit power for the current queue length and gain.

    Empty queue: zero power.  Backlog at or above the budget: threshold power
    in deep fades, channel inversion otherwise.  Small backlog: the least
    power that clears the queue, capped at threshold power.
    """
    if queue_packets < 0 or g < 0:
        raise ValueError("queue length and gain must be nonnegative")
    if queue_packets == 0:
        return 0.0
    g_star = policy.gain_threshold
    if queue_packets >= policy.service_per_frame:
        if g < g_star:
            return policy.threshold_power_w
        return (policy.channel.noise_psd_w_per_hz * policy.spectrum.total_bandwidth_hz
                * policy.required_snr / (policy.channel.average_gain * g))
    if g == 0.0 or s_threshold(policy, g) <= queue_packets:
        return policy.threshold_power_w

    def gap(p):
        return fbl_packets(policy.spectrum, policy.channel, p, g,
                           policy.packet_bits, policy.error_prob) - queue_packets

    return float(optimize.brentq(gap, 0.0, policy.threshold_power_w, xtol=1e-15, rtol=1e-12))


def drop_policy(policy: PolicyConfig, queue_packets: float, g: float) -> float:
    """Packets proactively dropped this frame."""
    if queue_packets < 0 or g < 0:
        raise ValueError("queue length and gain must be nonnegative")
    sth = s_threshold(policy, g)
    budget = min(queue_packets, policy.service_per_frame)
    return max(budget - sth, 0.0)


# ---------------------------------------------------------------------------
# queue state
# ---------------------------------------------------------------------------

@dataclass
class QueueState:
    """Queue contents: fluid length, optional FIFO arrival-frame tags."""

    packets: float = 0.0
    tags: Optional[deque] = None

    def __post_init__(self):
        if self.packets < 0:
            raise ValueError("queue length must be nonnegative")


def step_queue(state: QueueState, arrivals: float, served: float, dropped: float) -> QueueState:
    """One frame of queue evolution: departures from the head, then arrivals.

    `served` and `dropped` are offered amounts; capability beyond the backlog
    idles (the max() below), so actual departures are min(queue, served+dropped).
    """
    if min(arrivals, served, dropped) < 0:
        raise ValueError("arrivals, served, dropped must be nonnegative")
    departures = min(state.packets, served + dropped)
    new_q = max(state.packets - (served + dropped), 0.0) + arrivals
    tags = state.tags
    if tags is not None:
        for _ in range(min(int(round(departures)), len(tags))):
            tags.popleft()
    return QueueState(new_q, tags)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@dataclass
class LossCounters:
    """Per-packet accounting over a simulation run."""

    arrived: int = 0
    delivered: int = 0
    dropped_proactive: int = 0
    dropped_deadline: int = 0
    errored_transmission: int = 0
    still_queued: int = 0
    frames: int = 0

    def check_conservation(self):
        total = (self.delivered + self.dropped_proactive + self.dropped_deadline
                 + self.errored_transmission + self.still_queued)
        if total != self.arrived:
            raise AssertionError(f"loss accounting leak: {total} != {self.arrived}")


@dataclass
class SimResult:
    counters: LossCounters
    thresholds_frames: np.ndarray        # delay thresholds of the CCDF rows
    ccdf: np.ndarray                     # Pr{delay > threshold}
    batch_exceed: np.ndarray             # (n_batches, n_thresholds) exceed counts
    batch_packets: np.ndarray            # packets counted per batch
    eps_c_emp: float = 0.0
    eps_q_emp: float = 0.0
    eps_h_emp: float = 0.0               # drop-mass ratio: sum b^d(n) / arrivals
    intuitive_drop_mass: float = 0.0     # drops if sub-threshold fades dropped the whole budget
    proactive_drop_mass: float = 0.0
    batch_drop_mass: Optional[np.ndarray] = None
    batch_arrived: Optional[np.ndarray] = None

    def ccdf_stderr(self) -> np.ndarray:
        """Batch-means standard error of each CCDF point (correlation-aware)."""
        totals = self.batch_packets.astype(float)
        keep = totals > 0
        if keep.sum() < 2:
            return np.full_like(self.ccdf, np.nan)
        frac = self.batch_exceed[keep] / totals[keep, None]
        return frac.std(axis=0, ddof=1) / math.sqrt(keep.sum())

    def eps_h_stderr(self) -> float:
        """Batch-means standard error of the drop-mass ratio."""
        if self.batch_drop_mass is None or self.batch_arrived is None:
            return math.nan
        keep = self.batch_arrived > 0
        if keep.sum() < 2:
            return math.nan
        ratios = self.batch_drop_mass[keep] / self.batch_arrived[keep]
        return float(ratios.std(ddof=1) / math.sqrt(keep.sum()))


def _lindley(increments: np.ndarray, start: float) -> np.ndarray:
    """y[k] = max(y[k-1] + increments[k], 0) with y[-1] = start, vectorized."""
    t = np.cumsum(increments)
    running_min = np.minimum.accumulate(t)
    return t + np.maximum(start, -np.minimum(running_min, 0.0))


def _batch_positions(counts: np.ndarray):
    """Per-packet frame index and 0-based position within its frame's batch."""
    total = int(counts.sum())
    frames_idx = np.repeat(np.arange(counts.size), counts)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    within = np.arange(total) - np.repeat(starts, counts)
    return frames_idx, within


def _simulate_constant_fluid(arrival: ArrivalModel, frames: int, service: float,
                             rng: np.random.Generator, hist_len: int,
                             chunk_frames: int, warmup_frames: int) -> SimResult:
    if service <= 0:
        raise ValueError("service rate must be positive")
    counters = LossCounters(frames=frames)
    thresholds = np.arange(hist_len) / service     # L / s frames
    batch_exceed, batch_packets = [], []
    state = None
    # Lindley recursion on work ahead of each packet (excluding itself):
    # V_i = max(V_{i-1} + 1 - s * gap_i, 0).  Seeding V_prev = -1 makes the
    # system exactly empty at t = 0 (no phantom predecessor work).
    wait = -1.0
    last_arrival_t = 0.0       # global arrival time, in frames
    done = 0
    while done < frames:
        n = min(chunk_frames, frames - done)
        counts, state = generate_arrivals(arrival, n, rng, state)
        total = int(counts.sum())
        if total == 0:
            done += n
            continue
        frames_idx, _ = _batch_positions(counts)
        t = done + frames_idx + rng.random(total)
        t.sort()
        gaps = np.diff(np.concatenate(([last_arrival_t], t)))
        last_arrival_t = t[-1]
        ahead = _lindley(1.0 - service * gaps, wait)   # work ahead of each packet
        wait = ahead[-1]
        live = t >= warmup_frames
        counters.arrived += int(live.sum())
        unfinished = t + ahead / service > frames      # not yet transmitting at horizon
        counters.still_queued += int((live & unfinished).sum())
        counters.delivered += int((live & ~unfinished).sum())
        a = ahead[live]
        exceed = (a[None, :] > np.arange(hist_len)[:, None]).sum(axis=1)
        batch_exceed.append(exceed)
        batch_packets.append(int(live.sum()))
        done += n
    if not batch_exceed:
        batch_exceed, batch_packets = [np.zeros(hist_len, dtype=np.int64)], [0]
    be = np.asarray(batch_exceed)
    bp = np.asarray(batch_packets)
    total_pk = bp.sum()
    ccdf = be.sum(axis=0) / total_pk if total_pk else np.zeros(hist_len)
    counters.check_conservation()
    return SimResult(counters, thresholds, ccdf, be, bp)


def _simulate_policy_fluid(arrival: ArrivalModel, frames: int, policy: PolicyConfig,
                           rng: np.random.Generator, deadline_frames: Optional[int],
                           hist_len: int, chunk_frames: int,
                           warmup_frames: int) -> SimResult:
    """Vectorized frame-level policy simulation.

    The queue trajectory is the constant-drain Lindley recursion (departures
    min(Q, s) every frame); the channel splits each frame's departing mass
    into transmitted and dropped.  The reported eps_h is the drop-mass ratio,
    the quantity the analytic drop probability approximates.  Packet-level
    accounting maps each packet's body onto the departure stream: its delay is
    the frame its transmission starts (cumulative departures pass its queue
    position) and its fate is decided where its body completes; deadline
    violations are classified after the fact, which leaves the rare late
    packets' service in the trajectory (an O(eps_q) distortion; the packet
    engine enforces head-of-line deadline drops exactly).
    """
    chan = policy.channel
    s = policy.service_per_frame
    g_star = policy.gain_threshold
    coher = chan.coherence_frames
    chunk_frames = max(coher, (chunk_frames // coher) * coher)
    counters = LossCounters(frames=frames)
    thresholds = np.arange(hist_len, dtype=float)
    batch_exceed, batch_packets = [], []
    batch_drop, batch_arr = [], []
    eps_c = policy.error_prob

    state = None
    leftover = 0.0            # queue left after the current frame's departures
    prev_arrivals = 0.0       # arrivals appended at the end of the previous frame
    dep_cum = 0.0             # global departed mass
    arrived_cum = 0           # global packet count
    pend_g = np.empty(0, dtype=np.int64)   # pending packet queue positions
    pend_n = np.empty(0, dtype=np.int64)   # their arrival frames
    pend_m = np.empty(0, dtype=np.int64)   # transmission-start frame, -1 if unknown
    proact_mass = 0.0
    intuit_mass = 0.0
    done = 0
    while done < frames:
        n = min(chunk_frames, frames - done)
        counts, state = generate_arrivals(arrival, n, rng, state)
        n_blocks = -(-n // coher)
        g_blocks = sample_gain(chan, rng, n_blocks)
        g = np.repeat(g_blocks, coher)[:n]
        err_flag = rng.random(n) < eps_c

        shifted = np.concatenate(([prev_arrivals], counts[:-1].astype(float)))
        lo = _lindley(shifted - s, leftover)           # leftover after each frame
        q = np.concatenate(([leftover], lo[:-1])) + shifted
        b = np.maximum(q - lo, 0.0)                    # departures per frame
        leftover = float(lo[-1])
        prev_arrivals = float(counts[-1])

        sth = s_threshold(policy, g)
        transmitted = np.minimum(b, sth)
        live_frames = (done + np.arange(n)) >= warmup_frames
        drop_chunk = float(np.sum((b - transmitted)[live_frames]))
        proact_mass += drop_chunk
        intuit_mass += float(np.sum(np.where(g < g_star, b, b - transmitted)[live_frames]))

        dep_local = dep_cum + np.cumsum(b)
        frames_idx, _ = _batch_positions(counts)
        new_g = arrived_cum + np.arange(frames_idx.size)
        new_n = done + frames_idx
        arrived_cum += frames_idx.size
        all_g = np.concatenate((pend_g, new_g))
        all_n = np.concatenate((pend_n, new_n))
        all_m = np.concatenate((pend_m, np.full(new_g.size, -1, dtype=np.int64)))
        # transmission starts once cumulative departures pass the queue position
        started = (all_m < 0) & (all_g < dep_local[-1] - 1e-9)
        all_m[started] = done + np.searchsorted(dep_local, all_g[started], side="right")
        # the packet is fully departed once its body end has been metered out
        finished = all_g + 1.0 <= dep_local[-1] + 1e-9
        pend_g, pend_n, pend_m = all_g[~finished], all_n[~finished], all_m[~finished]
        gi, ni, mi = all_g[finished], all_n[finished], all_m[finished]
        m_end = np.searchsorted(dep_local, gi + 1.0 - 1e-9, side="left")
        m_end = np.minimum(m_end, n - 1)
        dep_before = np.where(m_end > 0, dep_local[np.maximum(m_end - 1, 0)], dep_cum)
        end_offset = (gi + 1.0) - dep_before          # body end inside that frame's departures
        is_tx = end_offset <= transmitted[m_end] + 1e-9
        delay = mi - ni
        live = ni >= warmup_frames
        counters.arrived += int(live.sum())
        late = delay > deadline_frames if deadline_frames is not None else np.zeros_like(delay, bool)
        counters.dropped_deadline += int((live & late).sum())
        ok = live & ~late
        tx_ok = ok & is_tx
        errored = tx_ok & err_flag[m_end]
        counters.errored_transmission += int(errored.sum())
        counters.delivered += int((tx_ok & ~errored).sum())
        counters.dropped_proactive += int((ok & ~is_tx).sum())
        d = delay[live]
        exceed = (d[None, :] > np.arange(hist_len)[:, None]).sum(axis=1)
        batch_exceed.append(exceed)
        batch_packets.append(int(live.sum()))
        batch_drop.append(drop_chunk)
        batch_arr.append(int((new_n >= warmup_frames).sum()))
        dep_cum = float(dep_local[-1])
        done += n
    counters.still_queued = int((pend_n >= warmup_frames).sum())
    counters.arrived += counters.still_queued
    be = np.asarray(batch_exceed) if batch_exceed else np.zeros((1, hist_len), dtype=np.int64)
    bp = np.asarray(batch_packets) if batch_packets else np.zeros(1, dtype=np.int64)
    total_pk = bp.sum()
    ccdf = be.sum(axis=0) / total_pk if total_pk else np.zeros(hist_len)
    counters.check_conservation()
    arrived = max(counters.arrived, 1)
    res = SimResult(counters, thresholds, ccdf, be, bp,
                    eps_c_emp=counters.errored_transmission / arrived,
                    eps_q_emp=counters.dropped_deadline / arrived,
                    eps_h_emp=proact_mass / arrived,
                    intuitive_drop_mass=intuit_mass,
                    proactive_drop_mass=proact_mass,
                    batch_drop_mass=np.asarray(batch_drop),
                    batch_arrived=np.asarray(batch_arr, dtype=np.int64))
    return res


def _simulate_packet(arrival: ArrivalModel, frames: int, rng: np.random.Generator,
                     service: Optional[float], policy: Optional[PolicyConfig],
                     deadline_frames: Optional[int], hist_len: int,
                     warmup_frames: int) -> SimResult:
    if policy is not None:
        budget_rate = policy.service_per_frame
        chan = policy.channel
        coher = chan.coherence_frames
        eps_c = policy.error_prob
    else:
        budget_rate = float(service)
        chan = None
        coher = 0
        eps_c = 0.0
    counters = LossCounters(frames=frames)
    exceed = np.zeros(hist_len, dtype=np.int64)
    n_batches = 16
    batch_edges = np.linspace(0, frames, n_batches + 1).astype(int)
    batch_exceed = np.zeros((n_batches, hist_len), dtype=np.int64)
    batch_packets = np.zeros(n_batches, dtype=np.int64)
    tags: deque = deque()
    credit = 0.0
    phase = initial_phase(arrival, rng)
    g = 1.0
    batch = 0

    def record(delay_frames: int):
        exceed[: min(delay_frames, hist_len)] += 1
        batch_exceed[batch, : min(delay_frames, hist_len)] += 1
        batch_packets[batch] += 1

    for n in range(frames):
        while batch + 1 < n_batches and n >= batch_edges[batch + 1]:
            batch += 1
        if chan is not None and n % coher == 0:
            g = float(sample_gain(chan, rng))
        if deadline_frames is not None:
            while tags and n - tags[0] > deadline_frames:
                t0 = tags.popleft()
                if t0 >= warmup_frames:
                    counters.dropped_deadline += 1
                    record(n - t0)
        if tags:
            credit += budget_rate
            allowed = min(len(tags), int(credit))
            credit -= allowed
            if policy is not None:
                cap = int(s_threshold(policy, g) + 1e-12)
                sent = min(allowed, cap)
            else:
                sent = allowed
            block_errored = sent > 0 and rng.random() < eps_c
            for _ in range(sent):
                t0 = tags.popleft()
                if t0 >= warmup_frames:
                    record(n - t0)
                    if block_errored:
                        counters.errored_transmission += 1
                    else:
                        counters.delivered += 1
            for _ in range(allowed - sent):
                t0 = tags.popleft()
                if t0 >= warmup_frames:
                    record(n - t0)
                    counters.dropped_proactive += 1
        else:
            credit = 0.0
        k, phase = sample_arrivals(arrival, phase, rng)
        if n >= warmup_frames:
            counters.arrived += k
        tags.extend([n] * k)
    counters.still_queued = sum(1 for t0 in tags if t0 >= warmup_frames)
    counters.check_conservation()
    total = batch_packets.sum()
    ccdf = exceed / total if total else np.zeros(hist_len)
    arrived = max(counters.arrived, 1)
    return SimResult(counters, np.arange(hist_len, dtype=float), ccdf,
                     batch_exceed, batch_packets,
                     eps_c_emp=counters.errored_transmission / arrived,
                     eps_q_emp=counters.dropped_deadline / arrived,
                     eps_h_emp=counters.dropped_proactive / arrived)


def simulate(arrival: ArrivalModel, frames: int, seed: int, *,
             service_per_frame: Optional[float] = None,
             policy: Optional[PolicyConfig] = None,
             mode: str = "fluid",
             deadline_frames: Optional[int] = None,
             hist_len: int = 64,
             chunk_frames: int = 1 << 20,
             warmup_frames: int = 0) -> SimResult:
    """Run a frame-level queueing simulation; see the module docstring.

    Exactly one of service_per_frame (constant-rate service, bound validation)
    or policy (threshold-power operation) must be given.  The generator is a
    counter-based Philox keyed by `seed`; identical arguments reproduce
    identical results bit for bit.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if (service_per_frame is None) == (policy is None):
        raise ValueError("give exactly one of service_per_frame or policy")
    if mode not in ("fluid", "packet"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    if mode == "packet":
        return _simulate_packet(arrival, frames, rng, service_per_frame, policy,
                                deadline_frames, hist_len, warmup_frames)
    chunk = max(1, min(chunk_frames, -(-frames // 16)))
    if policy is None:
        return _simulate_constant_fluid(arrival, frames, service_per_frame, rng,
                                        hist_len, chunk, warmup_frames)
    return _simulate_policy_fluid(arrival, frames, policy, rng, deadline_frames,
                                  hist_len, chunk, warmup_frames)


def export_delay_ccdf_csv(path, result: SimResult,
                          bound: Optional[Callable[[float], float]] = None):
    """Write threshold_frames, empirical_ccdf, analytic_bound rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold_frames", "empirical_ccdf", "analytic_bound"])
        for t, c in zip(result.thresholds_frames, result.ccdf):
            row = [f"{t:.12g}", f"{c:.12e}"]
            row.append(f"{bound(t):.12e}" if bound is not None else "nan")
            writer.writerow(row)
