"""Content popularity, cache hit ratio, and the request-rate bookkeeping that
caching induces: offloaded per-user rates and the cached/uncached split of
the traffic that base stations still have to carry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PopularityModel",
    "CacheConfig",
    "TrafficParams",
    "zipf_popularity",
    "hit_ratio",
    "effective_rate",
    "conditional_arrival_rate",
    "split_fractions",
]

_PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PopularityModel:
    """Ranked request probabilities over a finite catalog.

    `probs[i]` is the probability that a request targets the packet of rank
    i+1; entries are nonincreasing and sum to one.
    """

    exponent: float
    catalog_size: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.catalog_size,):
            raise ValueError(
                f"probs must have shape ({self.catalog_size},), got {probs.shape}"
            )
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("popularity entries must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"popularity must sum to 1, got {probs.sum()!r}")
        if np.any(np.diff(probs) > 0.0):
            raise ValueError("popularity must be nonincreasing in rank")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class CacheConfig:
    """Fraction of cache-enabled users and per-user cache capacity in packets."""

    alpha: float
    cache_slots: int

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.cache_slots < 0:
            raise ValueError(f"cache_slots must be >= 0, got {self.cache_slots}")


@dataclass(frozen=True)
class TrafficParams:
    """Per-user request process plus the cache-derived quantities.

    `effective_rate` is the per-user rate still handled over the air,
    (1 - alpha*delta) * request_rate.
    """

    request_rate: float
    slot_duration: float
    hit_ratio: float
    effective_rate: float

    def __post_init__(self):
        if not self.request_rate > 0.0:
            raise ValueError(f"request_rate must be > 0, got {self.request_rate}")
        if not self.slot_duration > 0.0:
            raise ValueError(f"slot_duration must be > 0, got {self.slot_duration}")
        if not 0.0 <= self.hit_ratio <= 1.0:
            raise ValueError(f"hit_ratio must lie in [0, 1], got {self.hit_ratio}")
        if self.effective_rate > self.request_rate * (1.0 + 1e-12):
            raise ValueError("effective_rate cannot exceed request_rate")

    @classmethod
    def from_popularity(
        cls,
        request_rate: float,
        slot_duration: float,
        popularity: PopularityModel,
        cache: CacheConfig,
    ) -> "TrafficParams":
        delta = hit_ratio(popularity, cache.cache_slots)
        return cls(
            request_rate=float(request_rate),
            slot_duration=float(slot_duration),
            hit_ratio=delta,
            effective_rate=effective_rate(request_rate, cache.alpha, delta),
        )


def zipf_popularity(exponent: float, catalog_size: int) -> PopularityModel:
    """Zipf-ranked popularity: prob of rank i proportional to 1/i**exponent.

    Normalization is by direct summation, so the probabilities are exact for
    any catalog that fits in memory.
    """
    if exponent < 0.0:
        raise ValueError(f"zipf exponent must be >= 0, got {exponent}")
    if catalog_size < 1:
        raise ValueError(f"catalog_size must be >= 1, got {catalog_size}")
    weights = 1.0 / np.arange(1, catalog_size + 1, dtype=float) ** exponent
    return PopularityModel(
        exponent=float(exponent),
        catalog_size=int(catalog_size),
        probs=weights / math.fsum(weights),
    )


def hit_ratio(popularity: PopularityModel, cache_slots: int) -> float:
    """Probability that a request falls in the cached top-`cache_slots` ranks."""
    if not 0 <= cache_slots <= popularity.catalog_size:
        raise ValueError(
            f"cache_slots must lie in [0, {popularity.catalog_size}], got {cache_slots}"
        )
    if cache_slots == popularity.catalog_size:
        return 1.0
    return float(math.fsum(popularity.probs[:cache_slots]))


def effective_rate(request_rate: float, alpha: float, delta: float) -> float:
    """Per-user request rate left for the base station after cache hits."""
    if not request_rate > 0.0:
        raise ValueError(f"request_rate must be > 0, got {request_rate}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    return (1.0 - alpha * delta) * request_rate


def conditional_arrival_rate(n_users: int, lambda_bar: float) -> float:
    """Aggregate over-the-air arrival rate of a cell holding n_users users."""
    if n_users < 0:
        raise ValueError(f"n_users must be >= 0, got {n_users}")
    return n_users * lambda_bar


def split_fractions(alpha: float, delta: float) -> tuple[float, float]:
    """Split of base-station traffic into uncached and cached-set packets.

    Returns (w_uncached, w_cached): the fractions of over-the-air packets
    outside and inside the cached set.  They sum to one; the cached share is
    the part a cache-equipped receiver can cancel out of its interference.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    carried = 1.0 - alpha * delta
    if carried <= 0.0:
        raise ValueError("alpha*delta = 1 leaves no over-the-air traffic to split")
    w_uncached = (1.0 - delta) / carried
    w_cached = (1.0 - alpha) * delta / carried
    return w_uncached, w_cached
