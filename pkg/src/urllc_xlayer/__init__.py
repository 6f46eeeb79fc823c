"""Cross-layer minimum-power design for low-latency, high-reliability radio links.

Finite-blocklength rate models, effective-bandwidth queueing analysis,
threshold-power transmit/drop policies with their loss analytics, the
reliability-split and bandwidth optimizers, and a frame-level Monte-Carlo
simulator that validates every analytic quantity.
"""

__version__ = "0.1.0"

from .errors import InfeasibleError, InstabilityError, SolverError, UnsupportedFadingError
from .phy_rate import (
    ChannelModel,
    SpectrumAllocation,
    dispersion,
    fbl_packets,
    fbl_packets_fs_indep,
    fbl_packets_fs_joint,
    gain_cdf,
    gain_pdf,
    gain_quantile,
    inverse_q,
    path_loss_gain,
    q_function,
    sample_gain,
    shannon_packets,
    snr,
)
from .traffic import (
    IPP,
    SPP,
    ArrivalModel,
    Poisson,
    QosExponentResult,
    effective_bandwidth,
    generate_arrivals,
    initial_phase,
    mean_rate,
    peak_rate,
    qos_exponent,
    sample_arrivals,
    variance_coefficient,
)
from .queueing import (
    LossCounters,
    PolicyConfig,
    QueueState,
    SimResult,
    delay_violation_upper_bound,
    drop_policy,
    export_delay_ccdf_csv,
    md1_delay_ccdf,
    md1_queue_pmf,
    power_policy,
    s_threshold,
    simulate,
    step_queue,
)
from .optimizer import (
    EPS_MIN,
    EpsilonSplit,
    FrequencySelectiveAllocation,
    LinkAllocation,
    MultiUserScenario,
    MultiUserSolution,
    QosRequirement,
    ReliabilitySplit,
    UserLink,
    drop_probability,
    drop_probability_bound,
    exhaustive_multi_user,
    required_snr,
    solve_epsilon_split,
    solve_frequency_selective,
    solve_multi_user,
    solve_single_user,
    split_objective,
    threshold_power,
)
from .scenario import ScenarioFile, ScenarioError, SimSettings, load_scenario
