"""Analysis and simulation of cache-enabled cellular networks with dynamic
per-cell traffic: load-state probabilities, packet loss rates with and
without cached-interference cancellation, and a Monte Carlo cross-check.
"""

from .analytical import (
    AveragingConvention,
    CellLoadProbabilities,
    NetworkParams,
    PlrReport,
    active_density,
    average_plr,
    empty_queue_prob_conditional,
    free_load_prob,
    full_load_prob,
    interference_laplace,
    load_probabilities,
    make_network,
    modest_load_prob,
    plr_cache_enabled,
    plr_cache_enabled_closed,
    plr_report,
    plr_untenable,
    plr_untenable_closed,
    serving_distance_pdf,
    stability_threshold,
    user_count_pmf,
)
from .simulator import Deployment, SimConfig, SimReport, build_deployment, run_simulation
from .special_functions import QuadratureConfig, gauss_2f1_neg, integrate_semi_infinite, ln_gamma, z1
from .traffic_model import (
    CacheConfig,
    PopularityModel,
    TrafficParams,
    effective_rate,
    hit_ratio,
    split_fractions,
    zipf_popularity,
)

__version__ = "0.1.0"
