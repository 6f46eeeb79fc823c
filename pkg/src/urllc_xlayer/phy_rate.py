"""Achievable-rate models (Shannon and finite-blocklength) and fading-gain laws.

Rates are expressed in packets per frame.  The finite-blocklength rate is the
normal approximation: the Shannon term minus a dispersion penalty that scales
with 1/sqrt(blocklength).  Channel power gains follow a gamma family that
covers both maximum-ratio combining over ``antennas`` i.i.d. Rayleigh branches
(shape = antennas, scale = 1) and Nakagami-m single-antenna fading
(shape = m, scale = 1/m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import UnsupportedFadingError

LN2 = math.log(2.0)

__all__ = [
    "SpectrumAllocation",
    "ChannelModel",
    "path_loss_gain",
    "q_function",
    "inverse_q",
    "dispersion",
    "snr",
    "shannon_packets",
    "fbl_packets",
    "fbl_packets_fs_joint",
    "fbl_packets_fs_indep",
    "gain_pdf",
    "gain_cdf",
    "gain_quantile",
    "sample_gain",
]


@dataclass(frozen=True)
class SpectrumAllocation:
    """Bandwidth assignment for one link.

    subcarrier_bandwidth_hz: spacing B of one subcarrier.
    subcarrier_count: number of subcarriers N^c assigned to the link.
    data_phase_s: data-transmission portion of each frame.
    subchannel_bandwidth_hz / subchannel_count: optional frequency-selective
        partition of the same total bandwidth into flat-fading subchannels.
    """

    subcarrier_bandwidth_hz: float
    subcarrier_count: int
    data_phase_s: float
    subchannel_bandwidth_hz: float | None = None
    subchannel_count: int | None = None

    def __post_init__(self):
        if self.subcarrier_bandwidth_hz <= 0:
            raise ValueError("subcarrier bandwidth must be positive")
        if self.subcarrier_count < 1:
            raise ValueError("subcarrier count must be >= 1")
        if self.data_phase_s <= 0:
            raise ValueError("data phase must be positive")
        fs = (self.subchannel_bandwidth_hz, self.subchannel_count)
        if (fs[0] is None) != (fs[1] is None):
            raise ValueError("subchannel bandwidth and count must be given together")
        if fs[0] is not None:
            if fs[0] <= 0 or fs[1] < 1:
                raise ValueError("invalid subchannel partition")
            if not math.isclose(fs[0] * fs[1], self.total_bandwidth_hz, rel_tol=1e-9):
                raise ValueError("subchannel partition must cover the allocated bandwidth")

    @property
    def total_bandwidth_hz(self) -> float:
        return self.subcarrier_bandwidth_hz * self.subcarrier_count

    @property
    def blocklength(self) -> float:
        """Coded symbols available per frame (data phase x total bandwidth)."""
        return self.data_phase_s * self.total_bandwidth_hz


@dataclass(frozen=True)
class ChannelModel:
    """Block-fading channel for one link.

    average_gain: mean path gain (linear), e.g. from ``path_loss_gain``.
    noise_psd_w_per_hz: single-sided noise spectral density.
    coherence_frames: frames per fading block; gains are i.i.d. across blocks.
    Multi-antenna (antennas > 1) is supported for Rayleigh branches only
    (nakagami_m == 1); single-antenna supports any integer nakagami_m >= 1.
    """

    antennas: int
    average_gain: float
    noise_psd_w_per_hz: float
    nakagami_m: int = 1
    coherence_frames: int = 1

    def __post_init__(self):
        if self.antennas < 1:
            raise ValueError("antenna count must be >= 1")
        if self.average_gain <= 0:
            raise ValueError("average gain must be positive")
        if self.noise_psd_w_per_hz <= 0:
            raise ValueError("noise PSD must be positive")
        if self.nakagami_m < 1:
            raise ValueError("nakagami m must be >= 1")
        if self.coherence_frames < 1:
            raise ValueError("coherence interval must span >= 1 frame")
        if self.antennas > 1 and self.nakagami_m > 1:
            raise UnsupportedFadingError(
                "multi-antenna Nakagami-m (antennas > 1 and m > 1) is not supported"
            )

    @property
    def gain_shape(self) -> int:
        return self.antennas if self.antennas > 1 else self.nakagami_m

    @property
    def gain_scale(self) -> float:
        return 1.0 if self.antennas > 1 else 1.0 / self.nakagami_m


def path_loss_gain(distance_m: float) -> float:
    """Average linear channel gain at `distance_m` from the 35.3 + 37.6 lg(d) dB law."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    pl_db = 35.3 + 37.6 * math.log10(distance_m)
    return 10.0 ** (-pl_db / 10.0)


def q_function(x):
    """Gaussian tail probability Q(x) = 0.5 erfc(x / sqrt(2))."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


# Rational approximation of the inverse standard-normal CDF (relative error
# ~1.15e-9), refined below by one Halley step to machine precision.
_ICDF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
           1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ICDF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
           6.680131188771972e+01, -1.328068155288572e+01)
_ICDF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
           -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ICDF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
           3.754408661907416e+00)
_ICDF_PLOW = 0.02425


def _inverse_normal_cdf(p: float) -> float:
    a, b, c, d = _ICDF_A, _ICDF_B, _ICDF_C, _ICDF_D
    if p < _ICDF_PLOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - _ICDF_PLOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def inverse_q(p: float) -> float:
    """Inverse of the Gaussian Q-function, accurate to better than 1e-9 relative.

    Rational initial estimate plus one Halley refinement against erfc; the
    refinement is evaluated in log space so tail arguments do not overflow.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("inverse_q requires 0 < p < 1")
    x = -_inverse_normal_cdf(p)  # Q(x) = p  <=>  Phi(-x) = p
    e = 0.5 * math.erfc(x / math.sqrt(2.0)) - p
    if e != 0.0:
        # u = e / phi(x), with phi the standard normal density
        log_u = math.log(abs(e)) + 0.5 * x * x + 0.5 * math.log(2.0 * math.pi)
        u = math.copysign(math.exp(log_u), e)
        x = x + u / (1.0 - 0.5 * x * u)
    return x


def dispersion(snr_linear):
    """Channel dispersion V = 1 - (1 + snr)^-2, in [0, 1)."""
    snr_arr = np.asarray(snr_linear, dtype=float)
    if np.any(snr_arr < 0):
        raise ValueError("snr must be nonnegative")
    v = 1.0 - 1.0 / (1.0 + snr_arr) ** 2
    return float(v) if np.ndim(snr_linear) == 0 else v


def snr(spec: SpectrumAllocation, chan: ChannelModel, power_w, g):
    """Received SNR over the allocated band for transmit power and gain sample."""
    return chan.average_gain * np.asarray(power_w, dtype=float) * g / (
        chan.noise_psd_w_per_hz * spec.total_bandwidth_hz)


def shannon_packets(spec: SpectrumAllocation, chan: ChannelModel,
                    power_w, g, packet_bits: float):
    """Infinite-blocklength packets per frame at the given power and gain."""
    if packet_bits <= 0:
        raise ValueError("packet size must be positive")
    if np.any(np.asarray(power_w) < 0):
        raise ValueError("power must be nonnegative")
    out = spec.blocklength / (packet_bits * LN2) * np.log1p(snr(spec, chan, power_w, g))
    return float(out) if np.ndim(out) == 0 else out


def fbl_packets(spec: SpectrumAllocation, chan: ChannelModel, power_w, g,
                packet_bits: float, error_prob: float, clamp: bool = True):
    """Finite-blocklength packets per frame at block-error probability `error_prob`.

    The normal approximation can go negative at very low SNR where it is not
    meaningful; by default the result is clamped at zero.  Pass clamp=False to
    see the raw value (negative means the clamp was active).  Accepts scalar
    or array power/gain.
    """
    if not 0.0 < error_prob <= 0.5:
        raise ValueError("block error probability must be in (0, 0.5]")
    if packet_bits <= 0:
        raise ValueError("packet size must be positive")
    if np.any(np.asarray(power_w) < 0):
        raise ValueError("power must be nonnegative")
    n_s = spec.blocklength
    rho = snr(spec, chan, power_w, g)
    v = 1.0 - 1.0 / (1.0 + rho) ** 2
    penalty = np.sqrt(v / n_s) * inverse_q(error_prob)
    out = n_s / (packet_bits * LN2) * (np.log1p(rho) - penalty)
    if clamp:
        out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _fs_snrs(spec: SpectrumAllocation, chan: ChannelModel, powers_w, gains):
    if spec.subchannel_bandwidth_hz is None:
        raise ValueError("spectrum allocation has no subchannel partition")
    powers_w = np.asarray(powers_w, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if powers_w.shape != (spec.subchannel_count,) or gains.shape != (spec.subchannel_count,):
        raise ValueError("power and gain vectors must have one entry per subchannel")
    return chan.average_gain * powers_w * gains / (
        chan.noise_psd_w_per_hz * spec.subchannel_bandwidth_hz)


def fbl_packets_fs_joint(spec: SpectrumAllocation, chan: ChannelModel,
                         powers_w, gains, packet_bits: float, error_prob: float) -> float:
    """Packets per frame with one code block spanning all subchannels."""
    if not 0.0 < error_prob <= 0.5:
        raise ValueError("block error probability must be in (0, 0.5]")
    rho = _fs_snrs(spec, chan, powers_w, gains)
    n_sub = spec.data_phase_s * spec.subchannel_bandwidth_hz
    v = spec.subchannel_count - np.sum(1.0 / (1.0 + rho) ** 2)
    return float(n_sub / (packet_bits * LN2)
                 * (np.sum(np.log1p(rho)) - math.sqrt(v / n_sub) * inverse_q(error_prob)))


def fbl_packets_fs_indep(spec: SpectrumAllocation, chan: ChannelModel,
                         powers_w, gains, packet_bits: float, error_prob: float) -> float:
    """Packets per frame with each subchannel coded as its own (shorter) block."""
    if not 0.0 < error_prob <= 0.5:
        raise ValueError("block error probability must be in (0, 0.5]")
    rho = _fs_snrs(spec, chan, powers_w, gains)
    n_sub = spec.data_phase_s * spec.subchannel_bandwidth_hz
    v = 1.0 - 1.0 / (1.0 + rho) ** 2
    terms = np.log1p(rho) - np.sqrt(v / n_sub) * inverse_q(error_prob)
    return float(n_sub / (packet_bits * LN2) * np.sum(terms))


def gain_pdf(chan: ChannelModel, g):
    """Density of the normalized instantaneous power gain."""
    g_arr = np.asarray(g, dtype=float)
    if np.any(g_arr < 0):
        raise ValueError("gain must be nonnegative")
    k, scale = chan.gain_shape, chan.gain_scale
    out = g_arr ** (k - 1) * np.exp(-g_arr / scale) / (special.gamma(k) * scale ** k)
    return float(out) if np.ndim(g) == 0 else out


def gain_cdf(chan: ChannelModel, g):
    """CDF of the gain: regularized lower incomplete gamma."""
    g_arr = np.asarray(g, dtype=float)
    if np.any(g_arr < 0):
        raise ValueError("gain must be nonnegative")
    out = special.gammainc(chan.gain_shape, g_arr / chan.gain_scale)
    return float(out) if np.ndim(g) == 0 else out


def gain_quantile(chan: ChannelModel, p: float) -> float:
    """Inverse gain CDF (p=0.5 gives the median fade depth)."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level must be in (0, 1)")
    return float(special.gammaincinv(chan.gain_shape, p) * chan.gain_scale)


def sample_gain(chan: ChannelModel, rng: np.random.Generator, size=None):
    """Draw gain samples; mutates only the caller-supplied generator."""
    return rng.gamma(chan.gain_shape, chan.gain_scale, size=size)
