"""Power-of-choice load balancing queues and their rank-based diffusion limits.

The compiled core exposes the prelimit discrete-event simulator, the
Skorokhod map, the Euler scheme for the rank-based SDE/SDI, and the
statistical harness primitives.
"""

from ._core import (
    DiffusionParams,
    EventLog,
    IcSpec,
    ModelParams,
    ScaledPath,
    SdePath,
    ServiceLaw,
    diffusion_params,
    idle_fraction,
    in_drift_hull,
    integrate,
    integrate_coupled,
    ks_critical_5pct,
    ks_statistic,
    martingale_residual,
    modulus_of_continuity,
    occupation_near_tie,
    occupation_near_tie_knots,
    permissible_permutations,
    poc_probabilities,
    rank_vector,
    ranked_marginals,
    reflect_step,
    run_experiment,
    scaled_path,
    simulate,
    skorokhod_map,
    verify_event_log,
)

__all__ = [
    "DiffusionParams",
    "EventLog",
    "IcSpec",
    "ModelParams",
    "ScaledPath",
    "SdePath",
    "ServiceLaw",
    "diffusion_params",
    "idle_fraction",
    "in_drift_hull",
    "integrate",
    "integrate_coupled",
    "ks_critical_5pct",
    "ks_statistic",
    "martingale_residual",
    "modulus_of_continuity",
    "occupation_near_tie",
    "occupation_near_tie_knots",
    "permissible_permutations",
    "poc_probabilities",
    "rank_vector",
    "ranked_marginals",
    "reflect_step",
    "run_experiment",
    "scaled_path",
    "simulate",
    "skorokhod_map",
    "verify_event_log",
]
