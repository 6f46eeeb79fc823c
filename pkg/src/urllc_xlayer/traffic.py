"""Arrival processes (Poisson, IPP, SPP), their effective bandwidths, and
QoS-exponent solvers.

Rates are stored in packets per frame; constructors accept packets per second
together with the frame duration.  The IPP/SPP phase processes are discretized
to one transition opportunity per frame (probability 1 - exp(-rate)), which is
accurate when the mean sojourn times span many frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import optimize

from .errors import SolverError

__all__ = [
    "Poisson",
    "IPP",
    "SPP",
    "ArrivalModel",
    "QosExponentResult",
    "mean_rate",
    "peak_rate",
    "effective_bandwidth",
    "qos_exponent",
    "variance_coefficient",
    "initial_phase",
    "sample_arrivals",
    "generate_arrivals",
]


@dataclass(frozen=True)
class Poisson:
    """Poisson arrivals at `rate` packets/frame."""

    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("arrival rate must be nonnegative")

    @classmethod
    def from_rate_per_s(cls, rate_per_s: float, frame_s: float) -> "Poisson":
        return cls(rate_per_s * frame_s)


@dataclass(frozen=True)
class IPP:
    """Interrupted Poisson process: ON/OFF phases with exponential sojourns.

    on_rate: packets/frame while ON.
    off_to_on / on_to_off: phase-leave rates in 1/frames (mean OFF duration is
        1/off_to_on frames, mean ON duration 1/on_to_off frames).
    """

    on_rate: float
    off_to_on: float
    on_to_off: float

    def __post_init__(self):
        if self.on_rate < 0:
            raise ValueError("arrival rate must be nonnegative")
        if self.off_to_on <= 0 or self.on_to_off <= 0:
            raise ValueError("phase rates must be positive")

    @classmethod
    def from_rate_per_s(cls, on_rate_per_s: float, frame_s: float,
                        off_to_on: float, on_to_off: float) -> "IPP":
        return cls(on_rate_per_s * frame_s, off_to_on, on_to_off)

    @property
    def burstiness_ratio(self) -> float:
        """delta = on_to_off / off_to_on; mean rate is on_rate / (1 + delta)."""
        return self.on_to_off / self.off_to_on


@dataclass(frozen=True)
class SPP:
    """Switched Poisson process: two phases, each Poisson, exponential sojourns.

    Canonical ordering rate_1 <= rate_2 is enforced by swapping the
    (rate, leave-rate) pairs on construction.
    """

    rate_1: float
    rate_2: float
    leave_1: float
    leave_2: float

    def __post_init__(self):
        if self.rate_1 < 0 or self.rate_2 < 0:
            raise ValueError("arrival rates must be nonnegative")
        if self.leave_1 <= 0 or self.leave_2 <= 0:
            raise ValueError("phase rates must be positive")
        if self.rate_1 > self.rate_2:
            r1, r2 = self.rate_2, self.rate_1
            l1, l2 = self.leave_2, self.leave_1
            object.__setattr__(self, "rate_1", r1)
            object.__setattr__(self, "rate_2", r2)
            object.__setattr__(self, "leave_1", l1)
            object.__setattr__(self, "leave_2", l2)


ArrivalModel = Union[Poisson, IPP, SPP]


class QosExponentResult(NamedTuple):
    theta: float                  # 1/packet
    effective_bandwidth: float    # packets/second


def mean_rate(model: ArrivalModel) -> float:
    """Stationary mean arrival rate in packets/frame."""
    if isinstance(model, Poisson):
        return model.rate
    if isinstance(model, IPP):
        return model.on_rate * model.off_to_on / (model.off_to_on + model.on_to_off)
    p1 = model.leave_2 / (model.leave_1 + model.leave_2)
    return p1 * model.rate_1 + (1.0 - p1) * model.rate_2


def peak_rate(model: ArrivalModel) -> float:
    """Largest per-phase rate in packets/frame."""
    if isinstance(model, Poisson):
        return model.rate
    if isinstance(model, IPP):
        return model.on_rate
    return model.rate_2


def _ipp_omega(model: IPP, theta: float) -> float:
    x = math.expm1(theta) * model.on_rate
    ab = model.off_to_on + model.on_to_off
    return 0.5 * (x - ab + math.sqrt((x - ab) ** 2 + 4.0 * model.off_to_on * x))


def effective_bandwidth(model: ArrivalModel, theta: float, frame_s: float) -> float:
    """Effective bandwidth in packets/second at QoS exponent `theta`.

    Poisson: lam (e^theta - 1) / (theta T_f).  IPP: the two-phase
    Markov-modulated closed form.  SPP: conservative upper bound, the Poisson
    value at the larger phase rate.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if isinstance(model, Poisson):
        lam = model.rate
    elif isinstance(model, SPP):
        lam = model.rate_2
    else:
        return _ipp_omega(model, theta) / (theta * frame_s)
    return lam * math.expm1(theta) / (theta * frame_s)


def variance_coefficient(model: IPP) -> float:
    """Variance coefficient C^2 = 1 + 2 delta on_rate / ((1 + delta)^2 alpha)."""
    if not isinstance(model, IPP):
        raise ValueError("variance coefficient is defined for IPP models")
    delta = model.burstiness_ratio
    return 1.0 + 2.0 * delta * model.on_rate / ((1.0 + delta) ** 2 * model.off_to_on)


def _poisson_exponent(rate_per_frame: float, delay_bound_s: float,
                      violation_prob: float, frame_s: float) -> QosExponentResult:
    log_inv_eps = -math.log(violation_prob)
    theta = math.log(frame_s * log_inv_eps / (rate_per_frame * delay_bound_s) + 1.0)
    eb = log_inv_eps / (delay_bound_s * theta)
    return QosExponentResult(theta, eb)


def qos_exponent(model: ArrivalModel, delay_bound_s: float, violation_prob: float,
                 frame_s: float) -> QosExponentResult:
    """Solve exp(-theta E^B(theta) D) = violation_prob for theta.

    Closed form for Poisson (and the SPP upper bound); bisection for IPP.
    """
    if not 0.0 < violation_prob < 1.0:
        raise ValueError("violation probability must be in (0, 1)")
    if delay_bound_s <= 0:
        raise ValueError("delay bound must be positive")
    if isinstance(model, Poisson):
        return _poisson_exponent(model.rate, delay_bound_s, violation_prob, frame_s)
    if isinstance(model, SPP):
        return _poisson_exponent(model.rate_2, delay_bound_s, violation_prob, frame_s)

    target = -math.log(violation_prob)

    def residual(theta: float) -> float:
        return theta * effective_bandwidth(model, theta, frame_s) * delay_bound_s - target

    lo, hi = 1e-9, 50.0
    for _ in range(60):
        if residual(hi) > 0:
            break
        hi *= 2.0
    else:
        raise SolverError(f"no QoS-exponent root in bracket [{lo}, {hi}]")
    if residual(lo) > 0:
        raise SolverError(f"QoS-exponent residual positive at theta={lo}")
    theta = optimize.brentq(residual, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    return QosExponentResult(theta, effective_bandwidth(model, theta, frame_s))


def _phase_params(model: ArrivalModel):
    """(rates per phase, leave probabilities per phase) for the per-frame chain."""
    if isinstance(model, IPP):
        rates = (0.0, model.on_rate)
        leave = (-math.expm1(-model.off_to_on), -math.expm1(-model.on_to_off))
    else:
        rates = (model.rate_1, model.rate_2)
        leave = (-math.expm1(-model.leave_1), -math.expm1(-model.leave_2))
    return rates, leave


def initial_phase(model: ArrivalModel, rng: np.random.Generator):
    """Stationary phase draw (None for Poisson)."""
    if isinstance(model, Poisson):
        return None
    _, (p0, p1) = _phase_params(model)
    return 1 if rng.random() < p0 / (p0 + p1) else 0


def sample_arrivals(model: ArrivalModel, state, rng: np.random.Generator):
    """One frame of arrivals: returns (count, new_state).

    Two-phase models first take their per-frame transition opportunity, then
    emit a Poisson count at the current phase rate.
    """
    if isinstance(model, Poisson):
        return int(rng.poisson(model.rate)), None
    rates, leave = _phase_params(model)
    if rng.random() < leave[state]:
        state = 1 - state
    return int(rng.poisson(rates[state])), state


def generate_arrivals(model: ArrivalModel, n_frames: int, rng: np.random.Generator,
                      state=None):
    """Vectorized per-frame arrival counts; returns (counts, final_state).

    Distributionally equivalent to iterating ``sample_arrivals`` and uses the
    same carried state (phase the last frame emitted at): the first frame takes
    its transition opportunity here, subsequent transitions are encoded as
    geometric phase sojourns, and the truncated final sojourn is simply
    dropped, which the memoryless property makes exact.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if isinstance(model, Poisson):
        return rng.poisson(model.rate, n_frames), None
    if state is None:
        state = initial_phase(model, rng)
    rates, leave = _phase_params(model)
    if rng.random() < leave[state]:
        state = 1 - state
    phase = np.empty(n_frames, dtype=np.int8)
    pos = 0
    while pos < n_frames:
        run = int(rng.geometric(leave[state]))
        take = min(run, n_frames - pos)
        phase[pos:pos + take] = state
        pos += take
        state = 1 - state
    counts = rng.poisson(np.asarray(rates, dtype=float)[phase])
    return counts, int(phase[-1])
