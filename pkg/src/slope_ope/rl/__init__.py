from .envs import (
    TabularEnv,
    TabularPolicy,
    TrajectoryBatch,
    epsilon_greedy_policy,
    exact_q,
    exact_value,
    graph_env,
    graph_pomdp_env,
    gridworld_env,
    hybrid_env,
    hybrid_policies,
    load_grid_map,
    optimal_q,
    sample_trajectories,
    static_policy,
)
from .ope import (
    DirectModel,
    HorizonBundle,
    WeightProfile,
    bias_bound,
    cnf_rl_empirical,
    cnf_rl_theoretical,
    direct_estimate,
    exact_model,
    fit_fqe,
    fit_mle_model,
    fit_qpi_lambda,
    horizon_bundle,
    ips,
    mle_tables,
    p_max_of,
    partial_dr,
    partial_dr_values,
    plan_in_model,
    slope_horizon,
    variance_range_bounds,
    wdr,
)
