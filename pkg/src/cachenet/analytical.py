"""Closed-form and numeric evaluation of the network model: per-cell user
counts, full/free/modest load-state probabilities, active-station density,
and packet loss rates with and without cached-interference cancellation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .special_functions import QuadratureConfig, integrate_semi_infinite, ln_gamma, z1
from .traffic_model import (
    CacheConfig,
    PopularityModel,
    TrafficParams,
    split_fractions,
    zipf_popularity,
)

__all__ = [
    "StabilityError",
    "ConsistencyError",
    "NetworkParams",
    "CellLoadProbabilities",
    "AveragingConvention",
    "PlrReport",
    "make_network",
    "user_count_pmf",
    "user_count_head",
    "pmf_tail_cutoff",
    "stability_threshold",
    "full_load_prob",
    "empty_queue_prob_conditional",
    "free_load_prob",
    "modest_load_prob",
    "load_probabilities",
    "active_density",
    "interference_laplace",
    "serving_distance_pdf",
    "plr_untenable",
    "plr_cache_enabled",
    "plr_untenable_closed",
    "plr_cache_enabled_closed",
    "average_plr",
    "plr_report",
]

# cumulative user-count mass considered "all of it" when truncating series
TAIL_EPS = 1e-12
TAIL_CAP = 100_000

# guard for ceil(1/x) when 1/x is representable slightly above an integer
_CEIL_GUARD = 1.0 - 1e-12


class StabilityError(ValueError):
    """Queue-state quantity requested for a cell outside stochastic equilibrium."""


class ConsistencyError(ArithmeticError):
    """Derived probabilities violate an internal identity."""


@dataclass(frozen=True)
class NetworkParams:
    """All physical and traffic scalars of one network scenario.

    Intensities are in nodes/m^2, powers in watts, bandwidth in Hz, the slot
    in seconds and the packet size in Mbits.  `cell_shape_k` is the shape
    parameter of the gamma fit to planar Voronoi cell areas.
    """

    user_intensity: float
    bs_intensity: float
    path_loss: float
    tx_power: float
    noise_power: float
    bandwidth: float
    slot_duration: float
    packet_size_mbits: float
    traffic: TrafficParams
    cache: CacheConfig
    popularity: PopularityModel
    cell_shape_k: float = 3.575

    def __post_init__(self):
        if not self.user_intensity > 0.0:
            raise ValueError("user_intensity must be > 0")
        if not self.bs_intensity > 0.0:
            raise ValueError("bs_intensity must be > 0")
        if not self.path_loss > 2.0:
            raise ValueError(f"path_loss must exceed 2, got {self.path_loss}")
        if not self.tx_power > 0.0:
            raise ValueError("tx_power must be > 0")
        if self.noise_power < 0.0:
            raise ValueError("noise_power must be >= 0")
        if not self.bandwidth > 0.0:
            raise ValueError("bandwidth must be > 0")
        if not self.slot_duration > 0.0:
            raise ValueError("slot_duration must be > 0")
        if not self.packet_size_mbits > 0.0:
            raise ValueError("packet_size_mbits must be > 0")
        if not self.cell_shape_k > 0.0:
            raise ValueError("cell_shape_k must be > 0")
        if self.cache.cache_slots > self.popularity.catalog_size:
            raise ValueError(
                f"cache_slots ({self.cache.cache_slots}) exceeds catalog size "
                f"({self.popularity.catalog_size})"
            )
        if self.traffic.slot_duration != self.slot_duration:
            raise ValueError("traffic.slot_duration disagrees with slot_duration")

    @property
    def packet_size_bits(self) -> float:
        return self.packet_size_mbits * 1e6

    @property
    def sinr_threshold(self) -> float:
        """Minimum SINR that lets a whole packet through in one slot."""
        return 2.0 ** (self.packet_size_bits / (self.slot_duration * self.bandwidth)) - 1.0

    @property
    def load_per_user(self) -> float:
        """Offered over-the-air load of one user, in packets per slot."""
        return self.traffic.effective_rate * self.slot_duration


@dataclass(frozen=True)
class CellLoadProbabilities:
    """Probabilities that a randomly chosen cell is full-, free- or modest-load."""

    p_full: float
    p_free: float
    p_modest: float

    def __post_init__(self):
        for name in ("p_full", "p_free", "p_modest"):
            v = getattr(self, name)
            if not -1e-9 <= v <= 1.0 + 1e-9:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.p_full + self.p_free + self.p_modest - 1.0) > 1e-9:
            raise ValueError("load-state probabilities must sum to 1")


class AveragingConvention(enum.Enum):
    """How the network-average loss rate weighs the user classes.

    ALL_REQUESTS averages over every request, counting cache hits as
    zero-loss successes; OVER_AIR_REQUESTS conditions on the request actually
    being served by a base station.
    """

    ALL_REQUESTS = "all_requests"
    OVER_AIR_REQUESTS = "over_air_requests"


DEFAULT_CONVENTION = AveragingConvention.ALL_REQUESTS


@dataclass(frozen=True)
class PlrReport:
    """Analytic loss rates for one scenario.

    `plr_cache_enabled` is None when the scenario has no cache-enabled users.
    """

    plr_untenable: float
    plr_cache_enabled: float | None
    avg_plr: float
    sinr_threshold: float
    active_density: float
    averaging_convention: AveragingConvention


def make_network(
    *,
    user_intensity: float,
    bs_intensity: float,
    path_loss: float,
    tx_power: float,
    noise_power: float,
    bandwidth: float,
    slot_duration: float,
    packet_size_mbits: float,
    request_rate: float,
    alpha: float,
    cache_slots: int,
    zipf_exponent: float,
    catalog_size: int,
    cell_shape_k: float = 3.575,
) -> NetworkParams:
    """Assemble a validated NetworkParams from scenario scalars."""
    popularity = zipf_popularity(zipf_exponent, catalog_size)
    cache = CacheConfig(alpha=float(alpha), cache_slots=int(cache_slots))
    traffic = TrafficParams.from_popularity(request_rate, slot_duration, popularity, cache)
    return NetworkParams(
        user_intensity=float(user_intensity),
        bs_intensity=float(bs_intensity),
        path_loss=float(path_loss),
        tx_power=float(tx_power),
        noise_power=float(noise_power),
        bandwidth=float(bandwidth),
        slot_duration=float(slot_duration),
        packet_size_mbits=float(packet_size_mbits),
        traffic=traffic,
        cache=cache,
        popularity=popularity,
        cell_shape_k=float(cell_shape_k),
    )


# ---------------------------------------------------------------------------
# Per-cell user-count distribution (gamma-mixed Poisson)
# ---------------------------------------------------------------------------


def _log_pmf_terms(params: NetworkParams, count: int) -> np.ndarray:
    """log PMF of the per-cell user count at n = 0 .. count-1.

    Uses the exact term recurrence
    log p(n+1) - log p(n) = log(phi_u) + log(k+n) - log(phi_u + k phi_b) - log(n+1)
    so the whole head is one cumulative sum; the scalar user_count_pmf keeps
    the direct gamma form, and the two are cross-checked in the tests.
    """
    k = params.cell_shape_k
    log_u = math.log(params.user_intensity)
    log_sum = math.log(params.user_intensity + k * params.bs_intensity)
    first = k * (math.log(k * params.bs_intensity) - log_sum)
    if count == 1:
        return np.array([first])
    n = np.arange(count - 1, dtype=float)
    increments = log_u + np.log(k + n) - log_sum - np.log1p(n)
    out = np.empty(count)
    out[0] = first
    np.cumsum(increments, out=out[1:])
    out[1:] += first
    return out


def user_count_pmf(n: int, params: NetworkParams) -> float:
    """Probability that a cell covers exactly n users.

    Computed in log space; the gamma-area mixture of the Poisson count gives
    a negative-binomial-shaped law with mean user_intensity/bs_intensity.
    """
    if n < 0:
        raise ValueError(f"user count must be >= 0, got {n}")
    k = params.cell_shape_k
    log_p = (
        n * math.log(params.user_intensity)
        + k * math.log(k * params.bs_intensity)
        + ln_gamma(k + n)
        - (k + n) * math.log(params.user_intensity + k * params.bs_intensity)
        - ln_gamma(n + 1.0)
        - ln_gamma(k)
    )
    return math.exp(log_p)


def user_count_head(params: NetworkParams, count: int) -> np.ndarray:
    """PMF values at n = 0 .. count-1 as one vector."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return np.empty(0)
    return np.exp(_log_pmf_terms(params, count))


def pmf_tail_cutoff(params: NetworkParams) -> int:
    """Smallest N with cumulative user-count mass >= 1 - TAIL_EPS (capped)."""
    count = 2048
    while True:
        cum = np.cumsum(user_count_head(params, count))
        hit = np.nonzero(cum >= 1.0 - TAIL_EPS)[0]
        if hit.size:
            return int(hit[0]) + 1
        if count >= TAIL_CAP:
            return TAIL_CAP
        count = min(2 * count, TAIL_CAP)


# ---------------------------------------------------------------------------
# Load-state probabilities
# ---------------------------------------------------------------------------


def stability_threshold(params: NetworkParams) -> int:
    """Smallest user count that pushes a cell out of equilibrium.

    Cells with `n * load_per_user >= 1` cannot drain their queues.  The
    guard factor keeps the ceiling stable when 1/load lands on an integer up
    to float rounding.
    """
    load = params.load_per_user
    if not load > 0.0:
        raise ValueError("per-user load must be > 0")
    return max(1, math.ceil(_CEIL_GUARD / load))


def _head_count(params: NetworkParams) -> int:
    """Summation length for the equilibrium head: the stability threshold,
    shortened where the count distribution has no mass left anyway."""
    thr = stability_threshold(params)
    if thr <= 4096:
        return thr
    return min(thr, pmf_tail_cutoff(params))


def full_load_prob(params: NetworkParams) -> float:
    """Probability that a cell's offered load is at or past saturation.

    Evaluated as the complement of the finite head sum, which avoids
    truncating the infinite tail.
    """
    head = user_count_head(params, _head_count(params))
    return float(min(1.0, max(0.0, 1.0 - math.fsum(head))))


def empty_queue_prob_conditional(n: int, params: NetworkParams) -> float:
    """Stationary empty-queue probability of an equilibrium cell with n users."""
    if n < 0:
        raise ValueError(f"user count must be >= 0, got {n}")
    occupancy = n * params.load_per_user
    if occupancy >= 1.0:
        raise StabilityError(
            f"cell with n={n} users has offered load {occupancy:.4f} >= 1; "
            "no stationary queue distribution exists"
        )
    return 1.0 - occupancy


def free_load_prob(params: NetworkParams) -> float:
    """Probability that a cell is in equilibrium with an empty queue."""
    count = _head_count(params)
    head = user_count_head(params, count)
    load = params.load_per_user
    empties = 1.0 - np.arange(count, dtype=float) * load
    return float(math.fsum(head * empties))


def modest_load_prob(params: NetworkParams) -> float:
    """Probability that a cell is in equilibrium with a backlog."""
    return load_probabilities(params).p_modest


def load_probabilities(params: NetworkParams) -> CellLoadProbabilities:
    """Full/free/modest-load probabilities of a randomly chosen cell."""
    p_full = full_load_prob(params)
    p_free = free_load_prob(params)
    if p_full + p_free > 1.0 + 1e-9:
        raise ConsistencyError(
            f"p_full + p_free = {p_full + p_free!r} exceeds 1"
        )
    return CellLoadProbabilities(
        p_full=p_full,
        p_free=p_free,
        p_modest=max(0.0, 1.0 - p_full - p_free),
    )


def active_density(params: NetworkParams, loads: CellLoadProbabilities) -> float:
    """Intensity of stations transmitting in a slot, as a thinned point process."""
    return (1.0 - loads.p_free + loads.p_free * loads.p_full) * params.bs_intensity


# ---------------------------------------------------------------------------
# Loss rates
# ---------------------------------------------------------------------------


def interference_laplace(r: float, t_bar: float, beta: float, density: float) -> float:
    """Laplace transform of the aggregate interference at the decoding point.

    Equals exp(-pi * density * r^2 * z1(t_bar, beta)) for interferers of the
    given intensity beyond serving distance r under Rayleigh fading.
    """
    if not r > 0.0:
        raise ValueError(f"distance must be > 0, got {r}")
    if density < 0.0:
        raise ValueError(f"density must be >= 0, got {density}")
    if density == 0.0 or t_bar == 0.0:
        return 1.0
    return math.exp(-math.pi * density * r * r * z1(t_bar, beta))


def serving_distance_pdf(r: float, bs_intensity: float) -> float:
    """Density of the distance to the nearest station from a uniform point."""
    if r < 0.0:
        raise ValueError(f"distance must be >= 0, got {r}")
    if not bs_intensity > 0.0:
        raise ValueError("bs_intensity must be > 0")
    return 2.0 * math.pi * bs_intensity * r * math.exp(-math.pi * bs_intensity * r * r)


def _plr_integral(
    params: NetworkParams, interferer_density: float, quad_cfg: QuadratureConfig | None
) -> float:
    """Success probability integral shared by both loss-rate theorems."""
    t_bar = params.sinr_threshold
    if t_bar == 0.0:
        return 0.0
    beta = params.path_loss
    phi_b = params.bs_intensity
    kernel = z1(t_bar, beta) * interferer_density + phi_b
    noise_coeff = t_bar * params.noise_power / params.tx_power

    def integrand(r: float) -> float:
        return (
            2.0 * math.pi * phi_b * r
            * math.exp(-(r ** beta) * noise_coeff - math.pi * r * r * kernel)
        )

    success = integrate_semi_infinite(integrand, quad_cfg)
    return float(min(1.0, max(0.0, 1.0 - success)))


def plr_untenable(
    params: NetworkParams,
    active_density_value: float,
    quad_cfg: QuadratureConfig | None = None,
) -> float:
    """Loss rate of a user without caching, all active stations interfering."""
    if active_density_value < 0.0:
        raise ValueError("active density must be >= 0")
    return _plr_integral(params, active_density_value, quad_cfg)


def plr_cache_enabled(
    params: NetworkParams,
    active_density_value: float,
    w_uncached: float,
    quad_cfg: QuadratureConfig | None = None,
) -> float:
    """Loss rate of a cache-enabled user after cancelling cached-set interferers.

    Only the uncached share of the active stations contributes interference.
    """
    if active_density_value < 0.0:
        raise ValueError("active density must be >= 0")
    if not 0.0 <= w_uncached <= 1.0:
        raise ValueError(f"w_uncached must lie in [0, 1], got {w_uncached}")
    return _plr_integral(params, w_uncached * active_density_value, quad_cfg)


def plr_untenable_closed(t_bar: float, p_free: float, p_full: float) -> float:
    """Interference-limited loss rate in closed form (path loss 4, no noise)."""
    if t_bar < 0.0:
        raise ValueError(f"SINR threshold must be >= 0, got {t_bar}")
    if t_bar == 0.0:
        return 0.0
    ratio = 1.0 - p_free + p_free * p_full
    grow = ratio * math.sqrt(t_bar) * math.atan(math.sqrt(t_bar))
    return 1.0 / (1.0 / grow + 1.0)


def plr_cache_enabled_closed(
    t_bar: float, p_free: float, p_full: float, alpha: float, delta: float
) -> float:
    """Closed-form cache-enabled loss rate: untenable form with the active
    density thinned to its uncached share (1-delta)/(1-alpha*delta)."""
    if t_bar < 0.0:
        raise ValueError(f"SINR threshold must be >= 0, got {t_bar}")
    if t_bar == 0.0:
        return 0.0
    w_uncached, _ = split_fractions(alpha, delta)
    ratio = (1.0 - p_free + p_free * p_full) * w_uncached
    if ratio == 0.0:
        return 0.0
    grow = ratio * math.sqrt(t_bar) * math.atan(math.sqrt(t_bar))
    return 1.0 / (1.0 / grow + 1.0)


def average_plr(
    alpha: float,
    delta: float,
    plr_cache: float | None,
    plr_untenable_value: float,
    convention: AveragingConvention = DEFAULT_CONVENTION,
) -> float:
    """Network-average loss rate across user classes.

    Cache hits never lose packets; under ALL_REQUESTS they stay in the
    denominator as successes, under OVER_AIR_REQUESTS they are excluded.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if not 0.0 <= plr_untenable_value <= 1.0:
        raise ValueError("plr values must lie in [0, 1]")
    cache_term = 0.0
    if alpha > 0.0 and delta < 1.0:
        if plr_cache is None:
            raise ValueError("plr_cache is required when alpha > 0 and delta < 1")
        if not 0.0 <= plr_cache <= 1.0:
            raise ValueError("plr values must lie in [0, 1]")
        cache_term = alpha * (1.0 - delta) * plr_cache
    over_all = cache_term + (1.0 - alpha) * plr_untenable_value
    if convention is AveragingConvention.ALL_REQUESTS:
        return over_all
    carried = 1.0 - alpha * delta
    if carried <= 0.0:
        raise ValueError("alpha*delta = 1 leaves no over-the-air requests to average")
    return over_all / carried


def plr_report(
    params: NetworkParams,
    loads: CellLoadProbabilities | None = None,
    convention: AveragingConvention = DEFAULT_CONVENTION,
    quad_cfg: QuadratureConfig | None = None,
) -> PlrReport:
    """Evaluate both loss rates and the network average for one scenario."""
    if loads is None:
        loads = load_probabilities(params)
    phi_a = active_density(params, loads)
    plr_u = plr_untenable(params, phi_a, quad_cfg)
    alpha = params.cache.alpha
    delta = params.traffic.hit_ratio
    plr_c: float | None = None
    if alpha > 0.0:
        w_uncached, w_cached = split_fractions(alpha, delta)
        plr_c = plr_cache_enabled(params, phi_a, w_uncached, quad_cfg)
        # margin above the default quadrature tolerance, so a vanishing
        # cancellable share cannot trip the check on integration noise
        if w_cached > 0.0 and plr_c > plr_u + 1e-7:
            raise ConsistencyError(
                f"cache-enabled loss rate {plr_c!r} exceeds untenable rate {plr_u!r}"
            )
    avg = average_plr(alpha, delta, plr_c, plr_u, convention)
    return PlrReport(
        plr_untenable=plr_u,
        plr_cache_enabled=plr_c,
        avg_plr=avg,
        sinr_threshold=params.sinr_threshold,
        active_density=phi_a,
        averaging_convention=convention,
    )
