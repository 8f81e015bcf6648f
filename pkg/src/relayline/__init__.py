"""Gaussian multi-relay line networks: rates, placement, as-you-go deployment.

The package splits into four layers:

* :mod:`relayline.channel` - gains, decode-and-forward rates, and the
  closed-form optimal sum-power allocation for a fixed layout.
* :mod:`relayline.placement` - optimal relay positions on a line of known
  length, plus the uniform-placement large-N limit.
* :mod:`relayline.mdp` - the sequential-deployment Markov decision process on
  a discretized state space, solved by value iteration.
* :mod:`relayline.simulate` - seeded Monte Carlo deployment, offline
  comparison, and relay-price calibration.

``relayline.cli`` exposes all of it as the ``relayline`` command.
"""

from .channel import (
    ChannelParams,
    GainTable,
    NodeLayout,
    PowerAllocation,
    achievable_rate_raw,
    attenuation_H,
    bruteforce_max_min,
    build_gain_table,
    capacity,
    optimal_allocation,
    optimized_rate,
    relaying_gain,
    snr_terms,
)
from .mdp import (
    MdpConfig,
    MdpSolution,
    analytic_bounds,
    bellman_update,
    solve,
    stage_value,
    state_transition,
)
from .placement import (
    PlacementProblem,
    PlacementSolution,
    SingleRelayOptimum,
    grid_oracle_placement,
    optimize_placement,
    single_relay_optimum,
    uniform_rate_factor,
)
from .simulate import (
    CalibrationResult,
    ComparisonStats,
    DeploymentTrace,
    calibrate_relay_price,
    compare_with_offline,
    deploy_on_line,
    expected_relay_count,
    sample_line_lengths,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "NodeLayout",
    "GainTable",
    "PowerAllocation",
    "capacity",
    "build_gain_table",
    "snr_terms",
    "achievable_rate_raw",
    "optimal_allocation",
    "attenuation_H",
    "optimized_rate",
    "relaying_gain",
    "bruteforce_max_min",
    "PlacementProblem",
    "PlacementSolution",
    "SingleRelayOptimum",
    "single_relay_optimum",
    "optimize_placement",
    "grid_oracle_placement",
    "uniform_rate_factor",
    "MdpConfig",
    "MdpSolution",
    "state_transition",
    "stage_value",
    "bellman_update",
    "solve",
    "analytic_bounds",
    "DeploymentTrace",
    "ComparisonStats",
    "CalibrationResult",
    "sample_line_lengths",
    "deploy_on_line",
    "compare_with_offline",
    "expected_relay_count",
    "calibrate_relay_price",
]
