"""Tie-breaking rules for equal-height chain tips.

The proposed rule is fully local: a miner looks only at each candidate's
claimed timestamp, the arrival time on its *own* clock, and its own assumed
bounds on clock offset (delta_o) and propagation delay (delta_b). A candidate
whose timestamp cannot be explained by any honest combination of offset and
delay is treated as adversarial evidence and loses the tie.

Honest blocks can never be flagged: with offsets within delta_o and delays
within delta_b, the arrival-minus-timestamp gap always lands inside
[-delta_o, delta_o + delta_b], and both boundaries count as honest.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .core import LocalParams, ReceivedBlock, Seconds


@dataclass(frozen=True)
class TieCandidate:
    """One equal-height chain tip competing in a tie."""

    tip: ReceivedBlock
    chain_id: int


class RuleKind(str, Enum):
    PROPOSED = "proposed"
    RANDOM = "random"
    FIRST_SEEN = "first_seen"


@dataclass(frozen=True)
class Rule:
    """A tie-breaking rule selection; the proposed rule carries the deciding
    miner's own acceptance parameters."""

    kind: RuleKind
    params: Optional[LocalParams] = None

    def __post_init__(self) -> None:
        if self.kind is RuleKind.PROPOSED and self.params is None:
            raise ValueError("proposed rule requires LocalParams")


def is_adversarial_evidence(arrival_local: Seconds, timestamp: Seconds,
                            params: LocalParams) -> bool:
    """True iff the (arrival - timestamp) gap is impossible for any honest
    sender under the local bounds. Boundary values are honest:

        flagged  iff  gap < -delta_o  or  gap > delta_o + delta_b
    """
    gap = arrival_local - timestamp
    return gap < -params.delta_o or gap > params.delta_o + params.delta_b


def filter_window(candidates: Sequence[TieCandidate],
                  window: Seconds) -> List[TieCandidate]:
    """Keep candidates that arrived within `window` of the earliest arrival.

    Arrival gaps are differences on the deciding miner's own clock, so the
    miner's offset cancels. The earliest candidate always survives (gap 0),
    and the comparison is inclusive.
    """
    if not candidates:
        raise ValueError("no candidates")
    earliest = min(c.tip.arrival_local for c in candidates)
    return [c for c in candidates if c.tip.arrival_local - earliest <= window]


def _check_tie(candidates: Sequence[TieCandidate]) -> None:
    if not candidates:
        raise ValueError("no candidates")
    heights = {c.tip.block.height for c in candidates}
    if len(heights) != 1:
        raise ValueError(f"tie candidates must share a height, got {sorted(heights)}")


def get_main_chain(candidates: Sequence[TieCandidate], params: LocalParams,
                   rng: np.random.Generator) -> TieCandidate:
    """The proposed tie-breaking rule.

    1. keep candidates inside the acceptance window;
    2. drop window survivors flagged as adversarial evidence;
    3. pick uniformly among what remains, falling back to a uniform pick
       among the window survivors when the evidence test cleared nobody.

    With a single eligible candidate the choice is deterministic and no
    randomness is consumed.
    """
    _check_tie(candidates)
    survivors = filter_window(candidates, params.window)
    clean = [c for c in survivors
             if not is_adversarial_evidence(c.tip.arrival_local,
                                            c.tip.block.timestamp, params)]
    pool = clean if clean else survivors
    if len(pool) == 1:
        return pool[0]
    return pool[int(rng.integers(0, len(pool)))]


def random_rule(candidates: Sequence[TieCandidate],
                rng: np.random.Generator) -> TieCandidate:
    """Baseline: pick uniformly among all tie candidates."""
    _check_tie(candidates)
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(rng.integers(0, len(candidates)))]


def first_seen_rule(candidates: Sequence[TieCandidate],
                    rng: np.random.Generator) -> TieCandidate:
    """Baseline: earliest local arrival wins; exact arrival ties are broken
    uniformly at random."""
    _check_tie(candidates)
    earliest = min(c.tip.arrival_local for c in candidates)
    first = [c for c in candidates if c.tip.arrival_local == earliest]
    if len(first) == 1:
        return first[0]
    return first[int(rng.integers(0, len(first)))]


def apply_rule(rule: Rule, candidates: Sequence[TieCandidate],
               rng: np.random.Generator) -> TieCandidate:
    """Dispatch a tie to the selected rule."""
    if rule.kind is RuleKind.PROPOSED:
        assert rule.params is not None
        return get_main_chain(candidates, rule.params, rng)
    if rule.kind is RuleKind.RANDOM:
        return random_rule(candidates, rng)
    return first_seen_rule(candidates, rng)
