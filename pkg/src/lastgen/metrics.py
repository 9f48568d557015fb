"""Tie outcome records, aggregation, and the closed-form references.

gamma is the hashrate-weighted fraction of honest miners that mine on the
attacker's tip during an equal-height tie. Reports carry the per-episode
values plus two analytic references:

* gamma_upper_bound  -- ceiling for the follower fraction when honest
  miners run the evidence rule against a withholding attacker;
* expected_gamma_ideal -- sharpened closed form for the exact-bounds case
  (no clock spread): early releases trip the future-timestamp branch, late
  releases trip the staleness branch, and only the middle interval of
  withholding times falls back to a fair coin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .core import MinerId, Seconds


@dataclass(frozen=True)
class Choice:
    """One honest miner's pick during one tie."""

    miner: MinerId
    chose_adversary: bool
    weight: float  # hashrate share


@dataclass(frozen=True)
class TieEvent:
    """One equal-height tie forced by the adversary.

    withholding_duration is the true time the released block spent hidden
    (honest trigger block's creation minus the adversary block's creation).
    Full per-miner choices are retained only when the run asks for them.
    """

    tie_id: int
    true_time: Seconds
    withholding_duration: Seconds
    gamma: float
    n_following: int
    n_honest: int
    choices: Optional[Tuple[Choice, ...]] = None


def gamma_event(choices: Sequence[Choice]) -> float:
    """Hashrate-weighted fraction of honest miners that chose the
    adversary's tip. Invariant under uniform weight rescaling."""
    if not choices:
        raise ValueError("no choices recorded for tie event")
    total = sum(c.weight for c in choices)
    if total <= 0:
        raise ValueError("total honest weight must be positive")
    follow = sum(c.weight for c in choices if c.chose_adversary)
    return follow / total


def aggregate(gammas: Iterable[float]) -> Tuple[Optional[float], Optional[float]]:
    """Unweighted mean and standard error over tie episodes.

    Returns (None, None) when there were no ties: absence, not zero. A
    single episode has a well-defined mean and standard error 0.
    """
    vals = [float(g) for g in gammas]
    n = len(vals)
    if n == 0:
        return None, None
    mean = sum(vals) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)


def gamma_upper_bound(delta_o: Seconds, delta_b: Seconds,
                      mean_interval: Seconds) -> float:
    """1/2 - 1/2 * exp(-(2*delta_o + 3*delta_b) / mean_interval).

    Approaches 1/2 as the bounds grow against the block interval and is 0
    when both bounds are 0 (every dishonest stamp is immediately visible).
    """
    if mean_interval <= 0:
        raise ValueError(f"mean_interval must be positive, got {mean_interval!r}")
    if delta_o < 0 or delta_b < 0:
        raise ValueError("delta_o and delta_b must be non-negative")
    return 0.5 - 0.5 * math.exp(-(2.0 * delta_o + 3.0 * delta_b) / mean_interval)


def expected_gamma_ideal(delta_o: Seconds, delta_b: Seconds,
                         honest_mean_interval: Seconds) -> float:
    """Expected follower fraction in the exact-bounds case, for exponential
    tie times with the given mean:

        1/2 * (exp(-2*delta_b/T) - exp(-(2*delta_o + 3*delta_b)/T))

    Ties released inside the first 2*delta_b are flagged by the
    future-timestamp branch and win nothing; ties after 2*delta_o +
    3*delta_b are flagged as stale; in between every honest miner
    coin-flips.
    """
    if honest_mean_interval <= 0:
        raise ValueError(
            f"honest_mean_interval must be positive, got {honest_mean_interval!r}")
    if delta_o < 0 or delta_b < 0:
        raise ValueError("delta_o and delta_b must be non-negative")
    t = honest_mean_interval
    return 0.5 * (math.exp(-2.0 * delta_b / t)
                  - math.exp(-(2.0 * delta_o + 3.0 * delta_b) / t))
