from .ope import (
    BandwidthGrid,
    Kernel,
    cnf_cb_empirical,
    cnf_cb_theoretical,
    empirical_cnf,
    kernel_eval,
    kernel_ips,
    kernel_ips_terms,
    slope_bandwidth,
)
from .sim import (
    CbDataset,
    CbWorld,
    ConstantPolicy,
    DeterministicPolicy,
    LinearSigmoidPolicy,
    OptimalPolicy,
    StochasticPolicy,
    TreePolicy,
    log_data,
    monte_carlo_value,
    optimal_action,
    reward,
    soften,
    train_policy,
)
