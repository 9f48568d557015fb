"""Core domain types shared by the simulator: miners, clocks, blocks, and
the per-miner acceptance parameters used by the tie-breaking rule.

Simulation time is a plain float (seconds of true time). Each miner owns a
static clock offset; a miner never sees true time, only its local clock.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional

Seconds = float  # true simulation time, in seconds


class Role(Enum):
    HONEST = "honest"
    ADVERSARY = "adversary"


@dataclass(frozen=True)
class MinerId:
    """Identity of a miner: dense index plus role."""

    index: int
    role: Role

    def __str__(self) -> str:
        return f"{self.role.value}:{self.index}"


def to_local(t_true: Seconds, offset: Seconds) -> Seconds:
    """Translate a true-time instant onto a miner's local clock."""
    return t_true + offset


def max_pairwise_skew(offsets: Iterable[Seconds]) -> Seconds:
    """Largest clock disagreement between any two miners (max - min)."""
    vals = list(offsets)
    if not vals:
        raise ValueError("no miners: need at least one clock offset")
    return max(vals) - min(vals)


@dataclass(frozen=True)
class Block:
    """An immutable block. `timestamp` is whatever the creator stamped
    (its local clock, honestly or not); `created_at` is the true creation
    time and exists for metrics only -- no honest decision path reads it.
    """

    block_id: int
    parent_id: Optional[int]
    height: int
    creator: MinerId
    timestamp: Seconds
    created_at: Seconds


@dataclass(frozen=True)
class ReceivedBlock:
    """A block as seen by one particular miner.

    arrival_local is the receiving miner's own clock reading at arrival;
    every quantity the tie-breaking rule consumes lives in that clock.
    """

    block: Block
    arrival_local: Seconds
    arrival_true: Seconds


@dataclass(frozen=True)
class LocalParams:
    """Per-miner acceptance parameters.

    delta_o  -- assumed bound on clock offsets between miners
    delta_b  -- assumed bound on block propagation delay
    window   -- tie acceptance window; defaults to delta_b
    """

    delta_b: Seconds
    delta_o: Seconds
    window: Seconds = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.window is None:
            object.__setattr__(self, "window", self.delta_b)
        for name in ("delta_b", "delta_o", "window"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or v != v or v in (float("inf"), float("-inf")):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
            if v < 0:
                raise ValueError(f"{name} must be non-negative, got {v!r}")


GENESIS_CREATOR = MinerId(index=-1, role=Role.HONEST)


def make_genesis() -> Block:
    return Block(block_id=0, parent_id=None, height=0,
                 creator=GENESIS_CREATOR, timestamp=0.0, created_at=0.0)


class BlockStore:
    """Append-only id-indexed block collection rooted at a genesis block."""

    def __init__(self, genesis: Optional[Block] = None) -> None:
        g = genesis if genesis is not None else make_genesis()
        if g.height != 0 or g.parent_id is not None:
            raise ValueError("genesis must have height 0 and no parent")
        self._blocks: Dict[int, Block] = {g.block_id: g}
        self.genesis = g

    def add(self, block: Block) -> None:
        if block.block_id in self._blocks:
            raise ValueError(f"duplicate block id {block.block_id}")
        self._blocks[block.block_id] = block

    def get(self, block_id: int) -> Block:
        return self._blocks[block_id]

    def __contains__(self, block_id: int) -> bool:
        return block_id in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def blocks(self) -> List[Block]:
        return list(self._blocks.values())


def validate_lineage(store: BlockStore) -> List[str]:
    """Check parent linkage and height arithmetic for every block.

    Returns a list of human-readable violations; an empty list means the
    store is a well-formed tree. A dangling parent is reported, not raised.
    """
    problems: List[str] = []
    for b in sorted(store.blocks(), key=lambda b: b.block_id):
        if b.block_id == store.genesis.block_id:
            continue
        if b.parent_id is None:
            problems.append(f"block {b.block_id}: no parent but not genesis")
            continue
        if b.parent_id not in store:
            problems.append(f"block {b.block_id}: dangling parent {b.parent_id}")
            continue
        parent = store.get(b.parent_id)
        if b.height != parent.height + 1:
            problems.append(
                f"block {b.block_id}: height mismatch "
                f"(height {b.height}, parent height {parent.height})"
            )
    return problems
