import numpy as np
import pytest

import urllc_xlayer as ux

NOISE_PSD = 10.0 ** ((-173.0 - 30.0) / 10.0)  # -173 dBm/Hz in W/Hz


@pytest.fixture(scope="session")
def qos_default():
    """1 ms bound, 1e-7 budget, 0.1 ms frames, 0.06 ms data phase."""
    return ux.QosRequirement(delay_bound_s=1e-3, loss_budget=1e-7,
                             frame_s=1e-4, data_phase_s=0.06e-3)


@pytest.fixture(scope="session")
def qos_relaxed():
    """Same timing with a 1e-3 loss budget (drops countable at desk scale)."""
    return ux.QosRequirement(delay_bound_s=1e-3, loss_budget=1e-3,
                             frame_s=1e-4, data_phase_s=0.06e-3)


def make_scenario(qos, arrival=None, distance_m=200.0, antennas=8,
                  max_subcarriers=4, nakagami_m=1, coherence_frames=10):
    if arrival is None:
        arrival = ux.Poisson(0.1)
    return ux.MultiUserScenario(
        users=(ux.UserLink(arrival=arrival, distance_m=distance_m),),
        qos=qos,
        subcarrier_bandwidth_hz=0.15e6,
        max_subcarriers=max_subcarriers,
        antennas=antennas,
        noise_psd_w_per_hz=NOISE_PSD,
        packet_bits=160.0,
        nakagami_m=nakagami_m,
        coherence_frames=coherence_frames,
    )


@pytest.fixture(scope="session")
def fig6_scenario(qos_default):
    """Cell-edge user, 4 subcarriers of 0.15 MHz, Poisson 0.1 packets/frame."""
    return make_scenario(qos_default)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))
