"""Cross-layer design core: minimum-power operating points under a loss budget.

The loss budget eps_D splits into a transmission-error share (eps_c), a
queueing-delay-violation share (eps_q) and a proactive-drop share (eps_h).
For a fixed drop share the required SNR is convex in the remaining split, so a
1-D golden-section finds it; an outer scalar search over the drop share and a
bisection for the threshold power complete the single-user solve.  Multi-user
bandwidth allocation grants subcarriers greedily by steepest total-power
descent, with an exhaustive enumerator as the optimality oracle.

Design equations use the high-SNR convention dispersion = 1; the exact
dispersion is available through a fixed-point option for sensitivity checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate

from .errors import InfeasibleError, SolverError
from .phy_rate import (
    ChannelModel,
    SpectrumAllocation,
    fbl_packets,
    gain_pdf,
    gain_quantile,
    inverse_q,
    path_loss_gain,
)
from .queueing import PolicyConfig
from .traffic import ArrivalModel, qos_exponent

LN2 = math.log(2.0)

EPS_MIN = 1e-12          # open-interval guard for probability searches
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_THRESHOLD_POWER_W = 1e6
_MAX_LOG_SNR = 700.0     # beyond this expm1 overflows; treat as infeasible

__all__ = [
    "QosRequirement",
    "ReliabilitySplit",
    "LinkAllocation",
    "UserLink",
    "MultiUserScenario",
    "MultiUserSolution",
    "EpsilonSplit",
    "FrequencySelectiveAllocation",
    "required_snr",
    "drop_probability",
    "drop_probability_bound",
    "threshold_power",
    "solve_epsilon_split",
    "solve_single_user",
    "solve_multi_user",
    "exhaustive_multi_user",
    "solve_frequency_selective",
    "EPS_MIN",
]


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QosRequirement:
    """End-to-end delay bound, overall loss budget, and frame timing."""

    delay_bound_s: float      # radio-access delay bound (uplink+downlink+queue)
    loss_budget: float        # overall packet loss probability budget
    frame_s: float
    data_phase_s: float

    def __post_init__(self):
        if not 0.0 < self.loss_budget < 1.0:
            raise ValueError("loss budget must be in (0, 1)")
        if self.queue_delay_bound_s <= 0:
            raise ValueError("delay bound leaves no queueing headroom (needs > 2 frames)")
        if not 0.0 < self.data_phase_s < self.frame_s:
            raise ValueError("data phase must be positive and shorter than the frame")

    @property
    def queue_delay_bound_s(self) -> float:
        """Queueing delay bound: total bound minus one uplink and one downlink frame."""
        return self.delay_bound_s - 2.0 * self.frame_s

    @property
    def deadline_frames(self) -> int:
        return int(round(self.queue_delay_bound_s / self.frame_s))


@dataclass(frozen=True)
class ReliabilitySplit:
    eps_c: float
    eps_q: float
    eps_h: float

    def __post_init__(self):
        if min(self.eps_c, self.eps_q, self.eps_h) <= 0:
            raise ValueError("all loss shares must be positive")
        if max(self.eps_c, self.eps_q, self.eps_h) >= 1:
            raise ValueError("loss shares must be below 1")

    @property
    def total(self) -> float:
        return self.eps_c + self.eps_q + self.eps_h


@dataclass(frozen=True)
class LinkAllocation:
    """Solved operating point for one link (or one subchannel)."""

    user: int
    subcarriers: int
    split: ReliabilitySplit
    required_snr: float
    threshold_power_w: float
    theta: float
    eb_packets_per_s: float   # service share carried by this allocation
    spectrum: SpectrumAllocation
    channel: ChannelModel
    packet_bits: float

    def validate(self, qos: QosRequirement, drop_rel_tol: float = 2e-3):
        """Check the defining relations this allocation claims to satisfy."""
        if self.split.total > qos.loss_budget * (1.0 + 1e-9):
            raise AssertionError("reliability split exceeds the loss budget")
        n_s = self.spectrum.blocklength
        lhs = math.log1p(self.required_snr)
        rhs = (qos.frame_s * self.packet_bits * LN2 * self.eb_packets_per_s / n_s
               + math.sqrt(1.0 / n_s) * inverse_q(self.split.eps_c))
        if abs(lhs - rhs) > 1e-9 * max(lhs, rhs):
            raise AssertionError(f"required-SNR relation residual: {lhs} vs {rhs}")
        eps_h = drop_probability(self.required_snr, self.threshold_power_w,
                                 self.spectrum, self.channel)
        if abs(eps_h - self.split.eps_h) > drop_rel_tol * self.split.eps_h:
            raise AssertionError(
                f"threshold power misses the drop target: {eps_h} vs {self.split.eps_h}")

    def to_policy(self, qos: QosRequirement) -> PolicyConfig:
        return PolicyConfig(
            threshold_power_w=self.threshold_power_w,
            required_snr=self.required_snr,
            service_per_frame=qos.frame_s * self.eb_packets_per_s,
            error_prob=self.split.eps_c,
            spectrum=self.spectrum,
            channel=self.channel,
            packet_bits=self.packet_bits,
        )


@dataclass(frozen=True)
class UserLink:
    """One served user: traffic model plus path loss (distance or gain)."""

    arrival: ArrivalModel
    distance_m: Optional[float] = None
    average_gain: Optional[float] = None

    def __post_init__(self):
        if (self.distance_m is None) == (self.average_gain is None):
            raise ValueError("give exactly one of distance_m or average_gain")

    @property
    def gain(self) -> float:
        if self.average_gain is not None:
            return self.average_gain
        return path_loss_gain(self.distance_m)


@dataclass(frozen=True)
class MultiUserScenario:
    users: tuple
    qos: QosRequirement
    subcarrier_bandwidth_hz: float
    max_subcarriers: int
    antennas: int
    noise_psd_w_per_hz: float
    packet_bits: float
    nakagami_m: int = 1
    coherence_frames: int = 10
    max_total_power_w: Optional[float] = None

    def __post_init__(self):
        if len(self.users) < 1:
            raise ValueError("need at least one user")
        if self.max_subcarriers < len(self.users):
            raise ValueError("need at least one subcarrier per user")

    def spectrum_for(self, n_subcarriers: int) -> SpectrumAllocation:
        return SpectrumAllocation(self.subcarrier_bandwidth_hz, n_subcarriers,
                                  self.qos.data_phase_s)

    def channel_for(self, user: int) -> ChannelModel:
        return ChannelModel(self.antennas, self.users[user].gain,
                            self.noise_psd_w_per_hz, self.nakagami_m,
                            self.coherence_frames)


class EpsilonSplit(NamedTuple):
    eps_c: float
    eps_q: float
    gamma: float
    theta: float
    eb_packets_per_s: float


class MultiUserSolution(NamedTuple):
    allocations: list
    total_power_w: float
    exceeds_power_budget: bool


class FrequencySelectiveAllocation(NamedTuple):
    per_subchannel: LinkAllocation
    subchannel_count: int
    total_threshold_power_w: float


# ---------------------------------------------------------------------------
# scalar search helpers
# ---------------------------------------------------------------------------

def _golden_min(f, lo: float, hi: float, tol: float):
    """Golden-section minimum of a unimodal scalar function on [lo, hi]."""
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def _scan_then_golden(f, lo: float, hi: float, n_scan: int, tol: float):
    """Coarse scan for the best cell, then golden-section inside it.

    Returns (x, f(x), scan_was_unimodal).  The unimodality flag reports whether
    the scanned values decrease then increase with a single turning point.
    """
    xs = np.linspace(lo, hi, n_scan)
    vals = np.array([f(x) for x in xs])
    k = int(np.argmin(vals))
    finite = vals[np.isfinite(vals)]
    sign_changes = int(np.sum(np.diff(np.sign(np.diff(finite))) != 0)) if finite.size > 2 else 0
    unimodal = sign_changes <= 1
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, n_scan - 1)]
    x, fx = _golden_min(f, a, b, tol)
    if vals[k] < fx:
        x, fx = xs[k], vals[k]
    return x, fx, unimodal


# ---------------------------------------------------------------------------
# operating-point relations
# ---------------------------------------------------------------------------

def _log_snr_required(eps_c: float, eb_packets_per_s: float,
                      spec: SpectrumAllocation, qos: QosRequirement,
                      packet_bits: float, dispersion_value: float = 1.0) -> float:
    n_s = spec.blocklength
    return (qos.frame_s * packet_bits * LN2 * eb_packets_per_s / n_s
            + math.sqrt(dispersion_value / n_s) * inverse_q(eps_c))


def required_snr(eps_c: float, eb_packets_per_s: float, spec: SpectrumAllocation,
                 qos: QosRequirement, packet_bits: float,
                 exact_dispersion: bool = False) -> float:
    """SNR needed to carry the effective-bandwidth load at error share eps_c.

    Uses dispersion = 1 (the high-SNR convention of the design equations);
    with exact_dispersion=True the dispersion is solved self-consistently by
    fixed-point iteration.
    """
    if not 0.0 < eps_c <= 0.5:
        raise ValueError("eps_c must be in (0, 0.5]")
    if eb_packets_per_s <= 0:
        raise ValueError("effective bandwidth must be positive")
    log_snr = _log_snr_required(eps_c, eb_packets_per_s, spec, qos, packet_bits)
    if log_snr > _MAX_LOG_SNR:
        raise InfeasibleError(f"required SNR overflows (log(1+snr) = {log_snr:.3g})")
    gamma = math.expm1(log_snr)
    if not exact_dispersion:
        return gamma
    for _ in range(200):
        v = 1.0 - 1.0 / (1.0 + gamma) ** 2
        nxt = math.expm1(_log_snr_required(eps_c, eb_packets_per_s, spec, qos,
                                           packet_bits, dispersion_value=v))
        if abs(nxt - gamma) <= 1e-12 * max(gamma, 1.0):
            return nxt
        gamma = nxt
    raise SolverError("dispersion fixed point did not converge")


def _gain_threshold(gamma: float, p_th: float, spec: SpectrumAllocation,
                    chan: ChannelModel) -> float:
    return (chan.noise_psd_w_per_hz * spec.total_bandwidth_hz * gamma
            / (chan.average_gain * p_th))


def drop_probability(gamma: float, p_th: float, spec: SpectrumAllocation,
                     chan: ChannelModel) -> float:
    """Proactive-drop probability of the threshold policy at (gamma, p_th).

    Integrates the shortfall fraction 1 - log(1+snr(g))/log(1+gamma) over the
    sub-threshold fades, on the unit interval after rescaling for stable
    adaptive quadrature.
    """
    if gamma <= 0 or p_th <= 0:
        raise ValueError("gamma and threshold power must be positive")
    g_star = _gain_threshold(gamma, p_th, spec, chan)
    # beyond this quantile the gain density carries no double-precision mass
    g_cap = min(g_star, gain_quantile(chan, 1.0 - 1e-16))
    if g_cap <= 0:
        return 0.0
    log_gamma = math.log1p(gamma)

    def integrand(u):
        g = g_cap * u
        shortfall = 1.0 - np.log1p(gamma * g / g_star) / log_gamma
        return shortfall * gain_pdf(chan, g) * g_cap

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=200)
    return float(val)


def drop_probability_bound(gamma: float, p_th: float, spec: SpectrumAllocation,
                           chan: ChannelModel, service_per_frame: float,
                           packet_bits: float, error_prob: float) -> float:
    """Upper bound on the drop probability using the exact threshold rate.

    Integrates max(1 - s_th(g)/service, 0) over sub-threshold fades, where
    s_th is the finite-blocklength rate at threshold power (not the high-SNR
    simplification used by ``drop_probability``).
    """
    if gamma <= 0 or p_th <= 0 or service_per_frame <= 0:
        raise ValueError("gamma, threshold power and service must be positive")
    g_star = _gain_threshold(gamma, p_th, spec, chan)
    g_cap = min(g_star, gain_quantile(chan, 1.0 - 1e-16))
    if g_cap <= 0:
        return 0.0

    def integrand(u):
        g = g_cap * u
        sth = fbl_packets(spec, chan, p_th, g, packet_bits, error_prob)
        return max(1.0 - sth / service_per_frame, 0.0) * gain_pdf(chan, g) * g_cap

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=200)
    return float(val)


def threshold_power(gamma: float, target_eps_h: float, spec: SpectrumAllocation,
                    chan: ChannelModel, rel_tol: float = 1e-3) -> float:
    """Smallest threshold power whose drop probability meets target_eps_h.

    The drop probability is strictly decreasing in the power, so bisection in
    log power applies; the bracket grows geometrically from channel inversion
    at the median gain.
    """
    if not 0.0 < target_eps_h < 1.0:
        raise ValueError("target drop probability must be in (0, 1)")
    p0 = _gain_threshold(gamma, 1.0, spec, chan) / gain_quantile(chan, 0.5)

    def excess(p):
        return drop_probability(gamma, p, spec, chan) - target_eps_h

    p_lo, p_hi = p0, p0
    e0 = excess(p0)
    if e0 > 0:
        while True:
            p_hi *= 4.0
            if p_hi > _MAX_THRESHOLD_POWER_W:
                raise InfeasibleError(
                    f"drop target {target_eps_h:.3g} unreachable below "
                    f"{_MAX_THRESHOLD_POWER_W:.0e} W")
            if excess(p_hi) <= 0:
                break
    else:
        while True:
            p_lo /= 4.0
            if p_lo < 1e-30:
                raise SolverError("threshold-power bracket collapsed toward zero")
            if excess(p_lo) > 0:
                break
    for _ in range(200):
        p_mid = math.sqrt(p_lo * p_hi)
        e = excess(p_mid)
        if abs(e) <= rel_tol * target_eps_h:
            return p_mid
        if e > 0:
            p_lo = p_mid
        else:
            p_hi = p_mid
    raise SolverError("threshold-power bisection did not converge")


# ---------------------------------------------------------------------------
# reliability-split optimization
# ---------------------------------------------------------------------------

def split_objective(eps_c: float, eps_q: float, arrival: ArrivalModel,
                    spec: SpectrumAllocation, qos: QosRequirement,
                    packet_bits: float, eb_scale: float = 1.0) -> float:
    """log(1 + required SNR) for a candidate (eps_c, eps_q) split."""
    _, eb = qos_exponent(arrival, qos.queue_delay_bound_s, eps_q, qos.frame_s)
    return _log_snr_required(eps_c, eb * eb_scale, spec, qos, packet_bits)


def solve_epsilon_split(budget: float, spec: SpectrumAllocation, qos: QosRequirement,
                        arrival: ArrivalModel, packet_bits: float,
                        eb_scale: float = 1.0) -> EpsilonSplit:
    """Minimize the required SNR over eps_c + eps_q = budget.

    The constraint is tight at the optimum because the objective falls in each
    share separately.  Golden-section runs on log eps_c after a coarse scan
    locates the best cell (the scan is redundant for the convex Poisson
    objective but guards the numerically solved IPP/SPP variants).
    """
    if not 2.0 * EPS_MIN < budget < 1.0:
        raise InfeasibleError(f"split budget {budget:.3g} leaves no feasible shares")

    def obj_log(x):
        eps_c = math.exp(x)
        return split_objective(eps_c, budget - eps_c, arrival, spec, qos,
                               packet_bits, eb_scale)

    lo = math.log(EPS_MIN)
    hi = math.log(budget - EPS_MIN)
    x, _, _ = _scan_then_golden(obj_log, lo, hi, n_scan=33, tol=1e-4)
    eps_c = math.exp(x)
    eps_q = budget - eps_c
    theta, eb = qos_exponent(arrival, qos.queue_delay_bound_s, eps_q, qos.frame_s)
    log_snr = _log_snr_required(eps_c, eb * eb_scale, spec, qos, packet_bits)
    if log_snr > _MAX_LOG_SNR:
        raise InfeasibleError(f"required SNR overflows (log(1+snr) = {log_snr:.3g})")
    return EpsilonSplit(eps_c, eps_q, math.expm1(log_snr), theta, eb * eb_scale)


def _solve_two_step(arrival: ArrivalModel, spec: SpectrumAllocation,
                    chan: ChannelModel, qos: QosRequirement, packet_bits: float,
                    eb_scale: float = 1.0):
    """Two-step search: outer drop share, inner split + power bisection."""
    eps_d = qos.loss_budget

    def power_at(log_eps_h):
        eps_h = math.exp(log_eps_h)
        try:
            split = solve_epsilon_split(eps_d - eps_h, spec, qos, arrival,
                                        packet_bits, eb_scale)
            return threshold_power(split.gamma, eps_h, spec, chan)
        except InfeasibleError:
            return math.inf

    lo = math.log(EPS_MIN)
    hi = math.log(eps_d - 2.0 * EPS_MIN)
    x, p_th, _ = _scan_then_golden(power_at, lo, hi, n_scan=25, tol=1e-3)
    if not math.isfinite(p_th):
        raise InfeasibleError("no feasible drop share found")
    eps_h = math.exp(x)
    split = solve_epsilon_split(eps_d - eps_h, spec, qos, arrival, packet_bits, eb_scale)
    p_th = threshold_power(split.gamma, eps_h, spec, chan)
    return ReliabilitySplit(split.eps_c, split.eps_q, eps_h), split, p_th


def solve_single_user(scenario: MultiUserScenario, user: int = 0,
                      n_subcarriers: Optional[int] = None) -> LinkAllocation:
    """Minimum-threshold-power operating point for one user on n_subcarriers."""
    if n_subcarriers is None:
        n_subcarriers = scenario.max_subcarriers
    spec = scenario.spectrum_for(n_subcarriers)
    chan = scenario.channel_for(user)
    arrival = scenario.users[user].arrival
    split3, inner, p_th = _solve_two_step(arrival, spec, chan, scenario.qos,
                                          scenario.packet_bits)
    alloc = LinkAllocation(
        user=user, subcarriers=n_subcarriers, split=split3,
        required_snr=inner.gamma, threshold_power_w=p_th,
        theta=inner.theta, eb_packets_per_s=inner.eb_packets_per_s,
        spectrum=spec, channel=chan, packet_bits=scenario.packet_bits,
    )
    alloc.validate(scenario.qos)
    return alloc


def solve_multi_user(scenario: MultiUserScenario, cache: Optional[dict] = None) -> MultiUserSolution:
    """Greedy subcarrier allocation by steepest total-power descent.

    Every user starts with one subcarrier; each remaining subcarrier goes to
    the user whose re-solve lowers the total power most (ties to the lowest
    user index).  Single-user solves are cached by (user, count).
    """
    if cache is None:
        cache = {}
    k_users = len(scenario.users)

    def solve(user, n_c):
        key = (user, n_c)
        if key not in cache:
            cache[key] = solve_single_user(scenario, user, n_c)
        return cache[key]

    counts = [1] * k_users
    for user in range(k_users):
        try:
            solve(user, 1)
        except InfeasibleError as exc:
            raise InfeasibleError(f"user {user} infeasible on a single subcarrier: {exc}")
    for _ in range(scenario.max_subcarriers - k_users):
        deltas = [solve(u, counts[u] + 1).threshold_power_w
                  - solve(u, counts[u]).threshold_power_w
                  for u in range(k_users)]
        best = int(np.argmin(deltas))
        counts[best] += 1
    allocations = [solve(u, counts[u]) for u in range(k_users)]
    total = sum(a.threshold_power_w for a in allocations)
    exceeds = (scenario.max_total_power_w is not None
               and total > scenario.max_total_power_w)
    return MultiUserSolution(allocations, total, exceeds)


def exhaustive_multi_user(scenario: MultiUserScenario,
                          cache: Optional[dict] = None) -> MultiUserSolution:
    """Global optimum over all ways to distribute the remaining subcarriers."""
    k_users = len(scenario.users)
    remaining = scenario.max_subcarriers - k_users
    if k_users ** max(remaining, 1) > 1e6:
        raise ValueError("exhaustive search space exceeds the 1e6 guard")
    if cache is None:
        cache = {}

    def solve(user, n_c):
        key = (user, n_c)
        if key not in cache:
            cache[key] = solve_single_user(scenario, user, n_c)
        return cache[key]

    best_total = math.inf
    best_counts = None
    # stars and bars: compositions of `remaining` into k_users nonnegative parts
    for dividers in itertools.combinations(range(remaining + k_users - 1), k_users - 1):
        edges = (-1,) + dividers + (remaining + k_users - 1,)
        counts = [1 + (edges[i + 1] - edges[i] - 1) for i in range(k_users)]
        total = 0.0
        try:
            for u in range(k_users):
                total += solve(u, counts[u]).threshold_power_w
                if total >= best_total:
                    break
        except InfeasibleError:
            continue
        if total < best_total:
            best_total = total
            best_counts = counts
    if best_counts is None:
        raise InfeasibleError("no feasible subcarrier assignment")
    allocations = [solve(u, best_counts[u]) for u in range(k_users)]
    total = sum(a.threshold_power_w for a in allocations)
    exceeds = (scenario.max_total_power_w is not None
               and total > scenario.max_total_power_w)
    return MultiUserSolution(allocations, total, exceeds)


def solve_frequency_selective(scenario: MultiUserScenario, subchannel_bandwidth_hz: float,
                              subchannel_count: int, user: int = 0) -> FrequencySelectiveAllocation:
    """Two-step solve on a frequency-selective partition of the user's band.

    Each subchannel is coded independently over bandwidth W_c and carries an
    equal share E^B / N^sc of the service; thresholds are per subchannel and
    the reported total assumes i.i.d. subchannel gains.
    """
    total_bw = scenario.subcarrier_bandwidth_hz * scenario.max_subcarriers
    if not math.isclose(subchannel_bandwidth_hz * subchannel_count, total_bw, rel_tol=1e-9):
        raise ValueError("subchannel partition must cover the allocated bandwidth")
    spec_sub = SpectrumAllocation(subchannel_bandwidth_hz, 1, scenario.qos.data_phase_s)
    chan = scenario.channel_for(user)
    arrival = scenario.users[user].arrival
    split3, inner, p_th = _solve_two_step(arrival, spec_sub, chan, scenario.qos,
                                          scenario.packet_bits,
                                          eb_scale=1.0 / subchannel_count)
    alloc = LinkAllocation(
        user=user, subcarriers=1, split=split3, required_snr=inner.gamma,
        threshold_power_w=p_th, theta=inner.theta,
        eb_packets_per_s=inner.eb_packets_per_s,
        spectrum=spec_sub, channel=chan, packet_bits=scenario.packet_bits,
    )
    alloc.validate(scenario.qos)
    return FrequencySelectiveAllocation(alloc, subchannel_count,
                                        subchannel_count * p_th)
