"""Slot-based Monte Carlo counterpart of the analytical model.

Stations and users are dropped as Poisson point processes on a square,
users attach to the nearest station, and each station serves one queued
request per slot.  Receivers see Rayleigh-faded interference from every
other transmitting station; cache-equipped receivers subtract interferers
whose current packet they already hold.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .analytical import NetworkParams, stability_threshold
from .traffic_model import split_fractions

__all__ = [
    "DeploymentError",
    "SimConfig",
    "Deployment",
    "SimState",
    "SimReport",
    "sample_ppp",
    "build_deployment",
    "new_state",
    "generate_arrivals",
    "advance_queues",
    "compute_slot_sinr",
    "record_loss",
    "classify_cells_empirical",
    "simulate_queue_lengths",
    "run_simulation",
]


class DeploymentError(RuntimeError):
    """Deployment sampling failed (e.g. no stations after repeated draws)."""


@dataclass(frozen=True)
class SimConfig:
    """Scale, seeding and mode switches for a simulation run."""

    deployments: int = 30
    slots: int = 800
    warmup: int = 500
    seed: int = 1
    area_side: float = 1e4
    edge_mode: str = "torus"  # "torus" | "guard"
    cancellation: bool = True
    measure_plr: bool = True
    bs_resample_limit: int = 100

    def __post_init__(self):
        if self.deployments < 1:
            raise ValueError("deployments must be >= 1")
        if self.slots < 1:
            raise ValueError("slots must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if not self.area_side > 0.0:
            raise ValueError("area_side must be > 0")
        if self.edge_mode not in ("torus", "guard"):
            raise ValueError(f"edge_mode must be 'torus' or 'guard', got {self.edge_mode!r}")
        if self.bs_resample_limit < 1:
            raise ValueError("bs_resample_limit must be >= 1")

    @property
    def torus(self) -> bool:
        return self.edge_mode == "torus"


@dataclass
class Deployment:
    """One sampled geometry: points, association and cache flags."""

    area_side: float
    bs_xy: np.ndarray  # (n_bs, 2)
    user_xy: np.ndarray  # (n_users, 2)
    cache_enabled: np.ndarray  # (n_users,) bool
    serving_bs: np.ndarray  # (n_users,) int
    serving_dist: np.ndarray  # (n_users,) float
    cell_user_count: np.ndarray  # (n_bs,) int
    measured_bs: np.ndarray  # (n_bs,) bool
    measured_user: np.ndarray  # (n_users,) bool

    @property
    def n_bs(self) -> int:
        return len(self.bs_xy)

    @property
    def n_users(self) -> int:
        return len(self.user_xy)

    def cell_members(self, station: int) -> np.ndarray:
        """Indices of the users attached to one station."""
        return np.nonzero(self.serving_bs == station)[0]


@dataclass
class SimState:
    """Queue state of one deployment while slots advance.

    `queue_len` holds committed end-of-previous-slot lengths; arrivals of
    the running slot are staged in `pending` until advance_queues commits
    them, so heads served in a slot always predate that slot's arrivals.
    FIFO entries are (user index, packet rank); ranks are 0-based, so the
    cached set of a cache-enabled user is exactly the ranks below its
    cache capacity.  Random streams are owned by the run orchestration,
    one per purpose, not by the state.
    """

    deployment: Deployment
    is_full_load: np.ndarray  # (n_bs,) bool, structural saturation flag
    queue_len: np.ndarray  # (n_bs,) int64
    pending: np.ndarray  # (n_bs,) int64
    fifo: list[deque] | None  # per-station (user, packet) pairs; None = counts only
    slot_index: int = 0


def sample_ppp(intensity: float, area_side: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson point process on [0, area_side)^2; returns an (n, 2) array."""
    if intensity < 0.0:
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    if not area_side > 0.0:
        raise ValueError(f"area_side must be > 0, got {area_side}")
    n = rng.poisson(intensity * area_side * area_side)
    return rng.uniform(0.0, area_side, size=(n, 2))


def _guard_width(params: NetworkParams) -> float:
    return 5.0 / math.sqrt(math.pi * params.bs_intensity)


def build_deployment(
    params: NetworkParams, cfg: SimConfig, rng: np.random.Generator
) -> Deployment:
    """Sample stations and users, attach users to their nearest station.

    Under the torus edge mode distances wrap around the square, so every
    point sees statistically identical surroundings; under guard mode the
    metric is plain Euclidean and only the central region is measured.
    """
    bs_xy = sample_ppp(params.bs_intensity, cfg.area_side, rng)
    attempts = 1
    while len(bs_xy) == 0:
        if attempts >= cfg.bs_resample_limit:
            raise DeploymentError(
                f"no stations sampled after {attempts} attempts "
                f"(intensity {params.bs_intensity}, area {cfg.area_side})"
            )
        bs_xy = sample_ppp(params.bs_intensity, cfg.area_side, rng)
        attempts += 1
    user_xy = sample_ppp(params.user_intensity, cfg.area_side, rng)
    cache_enabled = rng.random(len(user_xy)) < params.cache.alpha

    if cfg.torus:
        tree = cKDTree(bs_xy, boxsize=cfg.area_side)
    else:
        tree = cKDTree(bs_xy)
    if len(user_xy):
        serving_dist, serving_bs = tree.query(user_xy)
    else:
        serving_dist = np.empty(0)
        serving_bs = np.empty(0, dtype=np.intp)
    cell_user_count = np.bincount(serving_bs, minlength=len(bs_xy))

    if cfg.torus:
        measured_bs = np.ones(len(bs_xy), dtype=bool)
        measured_user = np.ones(len(user_xy), dtype=bool)
    else:
        g = min(_guard_width(params), 0.45 * cfg.area_side)
        lo, hi = g, cfg.area_side - g
        measured_bs = np.all((bs_xy >= lo) & (bs_xy <= hi), axis=1)
        measured_user = np.all((user_xy >= lo) & (user_xy <= hi), axis=1)

    return Deployment(
        area_side=cfg.area_side,
        bs_xy=bs_xy,
        user_xy=user_xy,
        cache_enabled=cache_enabled,
        serving_bs=serving_bs.astype(np.int64),
        serving_dist=serving_dist,
        cell_user_count=cell_user_count.astype(np.int64),
        measured_bs=measured_bs,
        measured_user=measured_user,
    )


def new_state(params: NetworkParams, dep: Deployment, track_requests: bool) -> SimState:
    n_bs = dep.n_bs
    if params.traffic.effective_rate > 0.0:
        is_full = dep.cell_user_count >= stability_threshold(params)
    else:
        # everything is cache-served, so no cell can saturate
        is_full = np.zeros(n_bs, dtype=bool)
    return SimState(
        deployment=dep,
        is_full_load=is_full,
        queue_len=np.zeros(n_bs, dtype=np.int64),
        pending=np.zeros(n_bs, dtype=np.int64),
        fifo=[deque() for _ in range(n_bs)] if track_requests else None,
    )


def generate_arrivals(
    state: SimState, params: NetworkParams, rng: np.random.Generator
) -> tuple[np.ndarray, int, int]:
    """Draw this slot's requests and stage the over-the-air ones.

    Each user issues Poisson(request_rate * slot) requests with Zipf-ranked
    packets; requests a cache-enabled user can serve locally are absorbed on
    the spot.  Implemented by drawing the superposed request count once and
    attributing requests uniformly, which is the same process.  Returns
    (per-station staged counts, absorbed hits, enabled-user requests).
    """
    dep = state.deployment
    n_users = dep.n_users
    counts = np.zeros(dep.n_bs, dtype=np.int64)
    if n_users == 0:
        state.pending += counts
        return counts, 0, 0

    lam_slot = params.traffic.request_rate * params.slot_duration
    total = int(rng.poisson(n_users * lam_slot))
    if total == 0:
        return counts, 0, 0
    users = rng.integers(0, n_users, size=total)
    cum = np.cumsum(params.popularity.probs)
    packets = np.searchsorted(cum, rng.random(total), side="right")
    np.minimum(packets, params.popularity.catalog_size - 1, out=packets)

    enabled = dep.cache_enabled[users]
    hit = enabled & (packets < params.cache.cache_slots)
    keep = ~hit
    kept_users = users[keep]
    kept_bs = dep.serving_bs[kept_users]
    counts = np.bincount(kept_bs, minlength=dep.n_bs).astype(np.int64)
    if state.fifo is not None:
        kept_packets = packets[keep]
        fifo = state.fifo
        for b, u, p in zip(kept_bs, kept_users, kept_packets):
            fifo[b].append((int(u), int(p)))
    state.pending += counts
    return counts, int(hit.sum()), int(enabled.sum())


def advance_queues(state: SimState) -> list[tuple[int, int, int]]:
    """Serve one head per backlogged station and commit staged arrivals.

    Heads are removed whether or not their transmission succeeded.  Returns
    the served (station, user, packet) triples when request tracking is on,
    else an empty list.
    """
    q_start = state.queue_len
    served: list[tuple[int, int, int]] = []
    if state.fifo is not None:
        for b in np.nonzero(q_start > 0)[0]:
            user, packet = state.fifo[b].popleft()
            served.append((int(b), user, packet))
    state.queue_len = np.maximum(q_start - 1, 0) + state.pending
    state.pending = np.zeros_like(state.pending)
    state.slot_index += 1
    return served


def _pairwise_dist_sq(a_xy: np.ndarray, b_xy: np.ndarray, wrap: float | None) -> np.ndarray:
    d = np.abs(a_xy[:, None, :] - b_xy[None, :, :])
    if wrap is not None:
        np.minimum(d, wrap - d, out=d)
    return np.einsum("ijk,ijk->ij", d, d)


def _sinr_from_power(
    power: np.ndarray,
    sig_col: np.ndarray,
    tx_cached: np.ndarray,
    receiver_cancels: np.ndarray,
    noise_power: float,
) -> np.ndarray:
    rows = np.arange(power.shape[0])
    signal = power[rows, sig_col]
    interference = np.maximum(power.sum(axis=1) - signal, 0.0)
    cached_power = power @ tx_cached.astype(float) - signal * tx_cached[sig_col]
    interference = np.where(
        receiver_cancels, np.maximum(interference - cached_power, 0.0), interference
    )
    denom = interference + noise_power
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(denom > 0.0, signal / denom, np.inf)
    return np.where(signal == np.inf, np.inf, sinr)


def _slot_sinr_batch(
    dep: Deployment,
    params: NetworkParams,
    recv_users: np.ndarray,
    active_bs: np.ndarray,
    tx_cached: np.ndarray,
    rng: np.random.Generator,
    cancellation: bool,
    torus: bool,
) -> np.ndarray:
    """SINR of every scheduled receiver; fading is redrawn per link per slot."""
    wrap = dep.area_side if torus else None
    d2 = _pairwise_dist_sq(dep.user_xy[recv_users], dep.bs_xy[active_bs], wrap)
    fades = rng.exponential(1.0, size=d2.shape)
    with np.errstate(divide="ignore"):
        power = params.tx_power * fades * d2 ** (-params.path_loss / 2.0)
    col_of = np.full(dep.n_bs, -1, dtype=np.int64)
    col_of[active_bs] = np.arange(len(active_bs))
    sig_col = col_of[dep.serving_bs[recv_users]]
    cancels = dep.cache_enabled[recv_users] if cancellation else np.zeros(len(recv_users), bool)
    return _sinr_from_power(power, sig_col, tx_cached, cancels, params.noise_power)


def compute_slot_sinr(
    dep: Deployment,
    params: NetworkParams,
    receiver: int,
    active_bs: np.ndarray,
    tx_cached: np.ndarray,
    signal_fade: float,
    interference_fades: np.ndarray,
    *,
    cancellation: bool = True,
    torus: bool = True,
) -> float:
    """SINR of one receiver given explicit fading draws.

    `active_bs` must contain the receiver's serving station; the fading entry
    at its position is replaced by `signal_fade`.  Cache-held interferers
    (tx_cached True) are excluded for a cache-enabled receiver when
    cancellation is on.
    """
    active_bs = np.asarray(active_bs, dtype=np.int64)
    serving = int(dep.serving_bs[receiver])
    pos = np.nonzero(active_bs == serving)[0]
    if pos.size != 1:
        raise ValueError("active_bs must contain the receiver's serving station once")
    wrap = dep.area_side if torus else None
    d2 = _pairwise_dist_sq(dep.user_xy[receiver : receiver + 1], dep.bs_xy[active_bs], wrap)
    fades = np.asarray(interference_fades, dtype=float).copy()
    fades[pos[0]] = signal_fade
    with np.errstate(divide="ignore"):
        power = params.tx_power * fades[None, :] * d2 ** (-params.path_loss / 2.0)
    cancels = np.array([bool(dep.cache_enabled[receiver]) and cancellation])
    sinr = _sinr_from_power(
        power, np.array([pos[0]]), np.asarray(tx_cached, bool), cancels, params.noise_power
    )
    return float(sinr[0])


def record_loss(sinr: float, params: NetworkParams) -> bool:
    """Packet is lost iff the slot cannot carry it: SINR below the threshold."""
    return sinr < params.sinr_threshold


def classify_cells_empirical(
    state: SimState, params: NetworkParams
) -> tuple[int, int, int]:
    """Count measured cells by load state at the current service instant.

    Saturated cells are classed structurally by their user count; the rest
    are free when their queue is empty, modest otherwise.
    """
    dep = state.deployment
    m = dep.measured_bs
    full = state.is_full_load
    n_full = int(np.sum(m & full))
    empty = state.queue_len == 0
    n_free = int(np.sum(m & ~full & empty))
    n_modest = int(np.sum(m & ~full & ~empty))
    return n_full, n_free, n_modest


def simulate_queue_lengths(
    arrival_rate: float, n_slots: int, rng: np.random.Generator, q0: int = 0
) -> np.ndarray:
    """End-of-slot lengths of one serve-one-per-slot queue under Poisson input.

    Uses the running-maximum form of the queue recursion, so the whole
    trajectory is vectorized; exact integer arithmetic throughout.
    """
    if arrival_rate < 0.0:
        raise ValueError("arrival_rate must be >= 0")
    if q0 < 0:
        raise ValueError("q0 must be >= 0")
    a = rng.poisson(arrival_rate, n_slots).astype(np.int64)
    c = np.cumsum(a - 1)
    d = np.concatenate(([np.int64(q0)], a - c))
    return c + np.maximum.accumulate(d)[1:]


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimReport:
    """Aggregated estimates; standard errors are across deployments."""

    est_p_full: float
    est_p_free: float
    est_p_modest: float
    se_p_full: float
    se_p_free: float
    se_p_modest: float
    est_active_fraction: float
    est_plr_untenable: float | None
    se_plr_untenable: float | None
    est_plr_cache_enabled: float | None
    se_plr_cache_enabled: float | None
    est_avg_plr_all: float | None
    est_avg_plr_air: float | None
    est_cached_tx_fraction: float | None
    se_cached_tx_fraction: float | None
    est_hit_ratio: float | None
    deployments_run: int
    slots_run: int
    seed: int
    early_stop: bool = False


@dataclass
class _DeploymentStats:
    frac_full: float
    frac_free: float
    frac_modest: float
    frac_active: float
    plr_u: float | None
    plr_c: float | None
    cached_tx_frac: float | None
    hit_ratio: float | None
    avg_all: float | None
    avg_air: float | None


def _run_one_deployment(
    params: NetworkParams, cfg: SimConfig, seed_seq: np.random.SeedSequence
) -> _DeploymentStats:
    geom_ss, arr_ss, fade_ss, synth_ss = seed_seq.spawn(4)
    geom_rng = np.random.default_rng(geom_ss)
    arr_rng = np.random.default_rng(arr_ss)
    fade_rng = np.random.default_rng(fade_ss)
    synth_rng = np.random.default_rng(synth_ss)

    dep = build_deployment(params, cfg, geom_rng)
    state = new_state(params, dep, track_requests=cfg.measure_plr)
    t_bar = params.sinr_threshold
    if params.cache.alpha * params.traffic.hit_ratio < 1.0:
        _, w_cached = split_fractions(params.cache.alpha, params.traffic.hit_ratio)
    else:
        w_cached = 1.0
    cache_slots = params.cache.cache_slots
    measured_cells = int(dep.measured_bs.sum())

    tally_full = tally_free = tally_modest = 0
    tally_active = 0
    losses_u = served_u = losses_c = served_c = 0
    cached_tx = active_tx = 0
    hits = enabled_requests = 0
    measured_slots = 0

    for slot in range(cfg.slots):
        measuring = slot >= cfg.warmup
        q_start = state.queue_len
        if measuring and measured_cells:
            f, z, mm = classify_cells_empirical(state, params)
            tally_full += f
            tally_free += z
            tally_modest += mm
            active_now = state.is_full_load | (q_start > 0)
            tally_active += int(np.sum(active_now & dep.measured_bs))
            measured_slots += 1

        if cfg.measure_plr and measuring:
            # peek FIFO heads before this slot's arrivals are appended
            fifo = state.fifo
            served = [
                (int(b), *fifo[b][0]) for b in np.nonzero(q_start > 0)[0]
            ]
            active_mask = state.is_full_load | (q_start > 0)
            active_bs = np.nonzero(active_mask)[0]
            if active_bs.size:
                tx_cached = np.zeros(active_bs.size, dtype=bool)
                col_of = np.full(dep.n_bs, -1, dtype=np.int64)
                col_of[active_bs] = np.arange(active_bs.size)
                for b, _, p in served:
                    tx_cached[col_of[b]] = p < cache_slots
                # saturated stations with nothing queued still transmit;
                # only the cached/uncached flag of that filler matters
                synth = active_mask & (q_start == 0)
                synth_cols = col_of[np.nonzero(synth)[0]]
                if synth_cols.size:
                    tx_cached[synth_cols] = synth_rng.random(synth_cols.size) < w_cached
                active_tx += int(np.sum(dep.measured_bs[active_bs]))
                cached_tx += int(np.sum(tx_cached & dep.measured_bs[active_bs]))

                recv = np.array([u for _, u, _ in served], dtype=np.int64)
                if recv.size:
                    keep = dep.measured_user[recv]
                    recv = recv[keep]
                if recv.size:
                    sinr = _slot_sinr_batch(
                        dep, params, recv, active_bs, tx_cached,
                        fade_rng, cfg.cancellation, cfg.torus,
                    )
                    lost = sinr < t_bar
                    enabled_rx = dep.cache_enabled[recv]
                    served_c += int(enabled_rx.sum())
                    served_u += int((~enabled_rx).sum())
                    losses_c += int(np.sum(lost & enabled_rx))
                    losses_u += int(np.sum(lost & ~enabled_rx))

        _, h, er = generate_arrivals(state, params, arr_rng)
        if measuring:
            hits += h
            enabled_requests += er
        advance_queues(state)

    denom = measured_slots * measured_cells
    frac_full = tally_full / denom if denom else 0.0
    frac_free = tally_free / denom if denom else 0.0
    frac_modest = tally_modest / denom if denom else 0.0
    frac_active = tally_active / denom if denom else 0.0

    plr_u = losses_u / served_u if served_u else None
    plr_c = losses_c / served_c if served_c else None
    cached_frac = cached_tx / active_tx if active_tx else None
    hit_ratio = hits / enabled_requests if enabled_requests else None

    avg_all = avg_air = None
    alpha = params.cache.alpha
    if plr_u is not None:
        if alpha == 0.0:
            avg_all = avg_air = plr_u
        elif plr_c is not None and hit_ratio is not None:
            avg_all = alpha * (1.0 - hit_ratio) * plr_c + (1.0 - alpha) * plr_u
            carried = 1.0 - alpha * hit_ratio
            avg_air = avg_all / carried if carried > 0.0 else None

    return _DeploymentStats(
        frac_full=frac_full,
        frac_free=frac_free,
        frac_modest=frac_modest,
        frac_active=frac_active,
        plr_u=plr_u,
        plr_c=plr_c,
        cached_tx_frac=cached_frac,
        hit_ratio=hit_ratio,
        avg_all=avg_all,
        avg_air=avg_air,
    )


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, float("nan")
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def _opt_mean_se(values: list[float | None]) -> tuple[float | None, float | None]:
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    return _mean_se(present)


def run_simulation(params: NetworkParams, cfg: SimConfig) -> SimReport:
    """Run the configured deployments and aggregate their statistics.

    Deterministic for a fixed (params, cfg): every deployment owns spawned
    substreams per purpose, so toggling measurement options does not disturb
    the queue trajectories.
    """
    master = np.random.SeedSequence(cfg.seed)
    per_dep: list[_DeploymentStats] = []
    early_stop = False
    for dep_seq in master.spawn(cfg.deployments):
        try:
            per_dep.append(_run_one_deployment(params, cfg, dep_seq))
        except DeploymentError:
            if not per_dep:
                raise
            early_stop = True
            break

    p_full, se_full = _mean_se([s.frac_full for s in per_dep])
    p_free, se_free = _mean_se([s.frac_free for s in per_dep])
    p_modest, se_modest = _mean_se([s.frac_modest for s in per_dep])
    active, _ = _mean_se([s.frac_active for s in per_dep])
    plr_u, se_plr_u = _opt_mean_se([s.plr_u for s in per_dep])
    plr_c, se_plr_c = _opt_mean_se([s.plr_c for s in per_dep])
    cached_frac, se_cached = _opt_mean_se([s.cached_tx_frac for s in per_dep])
    hit_ratio, _ = _opt_mean_se([s.hit_ratio for s in per_dep])
    avg_all, _ = _opt_mean_se([s.avg_all for s in per_dep])
    avg_air, _ = _opt_mean_se([s.avg_air for s in per_dep])

    return SimReport(
        est_p_full=p_full,
        est_p_free=p_free,
        est_p_modest=p_modest,
        se_p_full=se_full,
        se_p_free=se_free,
        se_p_modest=se_modest,
        est_active_fraction=active,
        est_plr_untenable=plr_u,
        se_plr_untenable=se_plr_u,
        est_plr_cache_enabled=plr_c,
        se_plr_cache_enabled=se_plr_c,
        est_avg_plr_all=avg_all,
        est_avg_plr_air=avg_air,
        est_cached_tx_fraction=cached_frac,
        se_cached_tx_fraction=se_cached,
        est_hit_ratio=hit_ratio,
        deployments_run=len(per_dep),
        slots_run=cfg.slots,
        seed=cfg.seed,
        early_stop=early_stop,
    )
