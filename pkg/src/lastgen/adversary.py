"""Block-withholding adversary: state machine and timestamp strategies.

The attacker mines privately and plays a tie-forcing game:

* mining a block while even with the public chain -> withhold it (lead 1);
* an honest block appears at the withheld height -> release the private
  block at once, forcing an equal-height tie;
* mining a second private block (lead 2) -> publish the whole private
  chain, which wins outright by length.

Timestamps are fixed at creation time relative to the adversary's own
clock and never rewritten on release.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Union

from .core import Block, Seconds


# --- timestamp strategies -------------------------------------------------

@dataclass(frozen=True)
class HonestClock:
    """Stamp the adversary's own clock reading, like an honest miner."""


@dataclass(frozen=True)
class FixedOffset:
    """Stamp the adversary's clock shifted by a constant."""

    shift: Seconds


@dataclass(frozen=True)
class TheoremOptimal:
    """Stamp ahead by delta_o + 2 * delta_b: the largest lie that can still
    look honest to a target miner for the whole life of its acceptance
    window, given the bounds the honest miners use."""

    delta_o: Seconds
    delta_b: Seconds


TimestampStrategy = Union[HonestClock, FixedOffset, TheoremOptimal]


def choose_timestamp(clock_now: Seconds, strategy: TimestampStrategy) -> Seconds:
    """Timestamp for a block created when the adversary's clock reads
    `clock_now`."""
    if isinstance(strategy, HonestClock):
        return clock_now
    if isinstance(strategy, FixedOffset):
        return clock_now + strategy.shift
    if isinstance(strategy, TheoremOptimal):
        return clock_now + strategy.delta_o + 2.0 * strategy.delta_b
    raise TypeError(f"unknown timestamp strategy: {strategy!r}")


# --- withholding state machine --------------------------------------------

@dataclass(frozen=True)
class Withhold:
    block: Block


@dataclass(frozen=True)
class Release:
    block: Block


@dataclass(frozen=True)
class Publish:
    blocks: tuple  # private chain, oldest first


@dataclass(frozen=True)
class Adopt:
    block: Block


Action = Union[Withhold, Release, Publish, Adopt]


@dataclass
class AdversaryState:
    """Mutable attacker bookkeeping, owned and driven by the engine.

    lead = private tip height - highest publicly known height. The publish
    trigger fires at lead 2, so lead never exceeds 2 between actions.
    """

    private_tip: Block
    public_tip_seen: Block
    withheld: List[Block] = field(default_factory=list)

    @property
    def lead(self) -> int:
        return self.private_tip.height - self.public_tip_seen.height


def on_own_block(state: AdversaryState, block: Block) -> List[Action]:
    """The adversary mined `block` on its private tip."""
    if block.parent_id != state.private_tip.block_id:
        raise ValueError(
            f"engine bug: adversary block {block.block_id} does not extend "
            f"private tip {state.private_tip.block_id}"
        )
    state.private_tip = block
    state.withheld.append(block)
    if state.lead >= 2:
        chain = tuple(state.withheld)
        state.withheld.clear()
        state.public_tip_seen = block  # published chain becomes public
        return [Publish(chain)]
    return [Withhold(block)]


def on_honest_block(state: AdversaryState, block: Block) -> List[Action]:
    """An honest block reached the adversary (detection is immediate)."""
    if block.height > state.private_tip.height:
        # Behind: give up any stale private work and mine on the honest tip.
        state.withheld.clear()
        state.private_tip = block
        state.public_tip_seen = block
        return [Adopt(block)]
    if block.height == state.private_tip.height:
        state.public_tip_seen = block
        if state.withheld:
            # The withheld block sits at exactly this height: spring the tie.
            released = state.withheld.pop()
            assert not state.withheld, "engine bug: more than one withheld block"
            assert released.height == block.height
            return [Release(released)]
        # Already released (tie in progress): keep mining the private tip.
        return []
    # Stale honest fork below our tip: nothing to do.
    return []
