"""Event-driven simulation of honest miners vs a tie-forcing withholding
adversary.

Mining is a Poisson race: the whole network finds blocks at rate
1/mean_block_interval, and each find is attributed to the adversary with
probability adversary_fraction, otherwise to a uniformly chosen honest miner
(equal hashrate shares). This pooled sampling is equivalent to giving every
miner its own exponential clock.

Block propagation among honest miners takes a uniform `propagation_delay`
(default 0, matching the zero-delay model); the adversary detects honest
blocks instantly and its own releases arrive everywhere instantly.

Equal-time events are ordered generation < arrival < tie evaluation, then by
schedule order, so a release forced by an honest block is already visible
when the miners evaluate the tie it created.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .adversary import (Adopt, AdversaryState, Publish, Release,
                        TheoremOptimal, TimestampStrategy, Withhold,
                        choose_timestamp, on_honest_block, on_own_block)
from .core import (Block, BlockStore, LocalParams, MinerId, ReceivedBlock,
                   Role, Seconds, to_local)
from .forkchoice import Rule, RuleKind, TieCandidate, apply_rule
from .metrics import (Choice, TieEvent, aggregate, expected_gamma_ideal,
                      gamma_upper_bound)


class ConfigError(ValueError):
    """Raised before any event fires when a SimConfig cannot be run."""


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation cell."""

    n_honest: int = 1000
    adversary_fraction: float = 0.5
    mean_block_interval: Seconds = 600.0  # whole-network mean
    propagation_delay: Seconds = 0.0
    offset_std: Seconds = 0.0
    a_t: Seconds = 0.0  # adversary clock offset
    rule: RuleKind = RuleKind.PROPOSED
    params: LocalParams = LocalParams(delta_b=20.0, delta_o=20.0)
    # None -> stamp ahead by delta_o + 2*delta_b (the strongest stealthy lie)
    timestamp_strategy: Optional[TimestampStrategy] = None
    stop_ties: Optional[int] = 10_000
    stop_blocks: Optional[int] = None
    seed: int = 0
    record_choices: bool = False

    def __post_init__(self) -> None:
        if self.n_honest < 1:
            raise ConfigError(f"n_honest must be >= 1, got {self.n_honest}")
        if self.mean_block_interval <= 0:
            raise ConfigError(
                f"mean_block_interval must be positive, got {self.mean_block_interval}")
        if not 0.0 <= self.adversary_fraction <= 1.0:
            raise ConfigError(
                f"adversary_fraction must be in [0, 1], got {self.adversary_fraction}")
        if self.propagation_delay < 0:
            raise ConfigError("propagation_delay must be non-negative")
        if self.offset_std < 0:
            raise ConfigError("offset_std must be non-negative")
        if self.stop_ties is None and self.stop_blocks is None:
            raise ConfigError("need a stop condition: stop_ties or stop_blocks")
        for name in ("stop_ties", "stop_blocks"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")
        if (self.stop_ties is not None and self.stop_blocks is None
                and self.propagation_delay == 0
                and not 0.0 < self.adversary_fraction < 1.0):
            raise ConfigError(
                "stop_ties can never be reached: with zero delay, ties require "
                "both honest and adversary hashrate (0 < adversary_fraction < 1)")

    @property
    def honest_mean_interval(self) -> Seconds:
        f = self.adversary_fraction
        if f >= 1.0:
            return float("inf")
        return self.mean_block_interval / (1.0 - f)

    def strategy(self) -> TimestampStrategy:
        if self.timestamp_strategy is not None:
            return self.timestamp_strategy
        return TheoremOptimal(delta_o=self.params.delta_o,
                              delta_b=self.params.delta_b)


@dataclass(frozen=True)
class SimReport:
    """Everything a run produced, reproducible bit-for-bit from
    (config, seed)."""

    config: SimConfig
    tie_events: Tuple[TieEvent, ...]
    gamma_mean: Optional[float]
    gamma_stderr: Optional[float]
    n_blocks_honest: int
    n_blocks_adversary: int
    elapsed: Seconds
    network_mean_interval: Seconds
    honest_mean_interval: Seconds
    bound_reference: float  # closed-form ceiling at the network interval
    ideal_reference: float  # exact-bounds closed form at the honest interval

    @property
    def n_ties(self) -> int:
        return len(self.tie_events)


# --- event plumbing ---------------------------------------------------------

class EventKind(Enum):
    GENERATION = "generation"
    ARRIVAL = "arrival"
    TIE_RESOLUTION = "tie_resolution"


_PRIORITY = {EventKind.GENERATION: 0, EventKind.ARRIVAL: 1,
             EventKind.TIE_RESOLUTION: 2}

# receiver classes for arrivals
Receiver = Tuple[str, int]
BULK: Receiver = ("bulk", -1)          # every honest miner
ADVERSARY_RX: Receiver = ("adversary", -1)


def miner_rx(index: int) -> Receiver:
    """The creator's own copy of a block (known at creation time)."""
    return ("miner", index)


@dataclass(frozen=True)
class Event:
    at: Seconds
    kind: EventKind
    miner_index: int = -2            # generation: who mines (-1 = adversary)
    block: Optional[Block] = None    # arrival payload
    receiver: Optional[Receiver] = None
    height: int = -1                 # tie evaluation target height


class EventQueue:
    """Min-heap of events ordered by (time, kind priority, schedule order)."""

    def __init__(self) -> None:
        self._heap: List[Tuple[Seconds, int, int, Event]] = []
        self._seq = 0

    def push(self, event: Event) -> None:
        heapq.heappush(self._heap,
                       (event.at, _PRIORITY[event.kind], self._seq, event))
        self._seq += 1

    def pop(self) -> Tuple[Seconds, int, int, Event]:
        return heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)


def next_generation_delay(rng: np.random.Generator, rate: float) -> Seconds:
    """Exponential waiting time for a mining process of the given rate
    (rate = hashrate_share / mean_block_interval; rates pool additively)."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return float(rng.exponential(1.0 / rate))


def deliver(queue: EventQueue, block: Block, receivers: Sequence[Receiver],
            delay: Seconds, send_time: Seconds) -> None:
    """Schedule arrival of `block` at send_time + delay for every receiver.

    The true arrival instant is shared; each receiver reads it on its own
    clock at consumption time. Adversary releases are delivered with delay 0.
    An empty receiver list schedules nothing.
    """
    for rx in receivers:
        queue.push(Event(at=send_time + delay, kind=EventKind.ARRIVAL,
                         block=block, receiver=rx))


# --- per-contest bookkeeping -------------------------------------------------

ADV_INDEX = -1  # generation attribution sentinel


@dataclass
class _Entry:
    block: Block
    arrival_true: Seconds  # when the bulk of honest miners received it


@dataclass
class _PendingTie:
    tie_id: int
    height: int
    adv_block_id: int
    created_true: Seconds
    withholding: Seconds
    # per-miner record: -1 unset, 0 honest side, 1 adversary side
    slots: np.ndarray
    bulk_evaluated: bool = False
    appended: bool = False


@dataclass
class _Contest:
    """Bulk-view state for the current best height."""

    height: int
    entries: List[_Entry]
    bases: Optional[np.ndarray] = None  # per-miner entry index; -1 = own block
    bulk_evaluated: bool = False
    eval_scheduled: bool = False
    pending: Optional[_PendingTie] = None


class Engine:
    """Single-run simulator; use `run(config)` for the one-shot API."""

    def __init__(self, config: SimConfig,
                 trace: Optional[Callable[[Seconds, EventKind], None]] = None) -> None:
        self.cfg = config
        self.rng = np.random.default_rng(config.seed)
        self.trace = trace

        n = config.n_honest
        self.offsets = self.rng.normal(0.0, config.offset_std, n)
        self.params = config.params
        self.rule = Rule(config.rule,
                         self.params if config.rule is RuleKind.PROPOSED else None)
        self.strategy = config.strategy()

        self.total_rate = 1.0 / config.mean_block_interval
        self.honest_weight = (1.0 - config.adversary_fraction) / n

        self.store = BlockStore()
        genesis = self.store.genesis
        self.adv = AdversaryState(private_tip=genesis, public_tip_seen=genesis)
        self.contest = _Contest(height=0, entries=[_Entry(genesis, 0.0)])
        self.own_pending: Dict[int, Block] = {}

        self.queue = EventQueue()
        self.next_block_id = 1
        self.n_blocks_honest = 0
        self.n_blocks_adversary = 0
        self.tie_events: List[TieEvent] = []
        self.next_tie_id = 0
        self._clock = 0.0
        self._stopped = False

    # -- main loop --

    def run(self) -> SimReport:
        self._schedule_next_generation(0.0)
        while len(self.queue) and not self._stopped:
            at, _prio, _seq, ev = self.queue.pop()
            assert at >= self._clock, "event queue went backwards in time"
            self._clock = at
            if self.trace is not None:
                self.trace(at, ev.kind)
            if ev.kind is EventKind.GENERATION:
                self._on_generation(ev)
            elif ev.kind is EventKind.ARRIVAL:
                self._on_arrival(ev)
            else:
                self._on_tie_resolution(ev)
        return self._build_report()

    # -- generation --

    def _schedule_next_generation(self, now: Seconds) -> None:
        dt = next_generation_delay(self.rng, self.total_rate)
        if self.rng.random() < self.cfg.adversary_fraction:
            who = ADV_INDEX
        else:
            who = int(self.rng.integers(0, self.cfg.n_honest))
        self.queue.push(Event(at=now + dt, kind=EventKind.GENERATION,
                              miner_index=who))

    def _new_block(self, base: Block, creator: MinerId, timestamp: Seconds,
                   now: Seconds) -> Block:
        b = Block(block_id=self.next_block_id, parent_id=base.block_id,
                  height=base.height + 1, creator=creator,
                  timestamp=timestamp, created_at=now)
        self.next_block_id += 1
        self.store.add(b)
        return b

    def _on_generation(self, ev: Event) -> None:
        t = ev.at
        if ev.miner_index == ADV_INDEX:
            base = self.adv.private_tip
            stamp = choose_timestamp(to_local(t, self.cfg.a_t), self.strategy)
            b = self._new_block(base, MinerId(ADV_INDEX, Role.ADVERSARY), stamp, t)
            self.n_blocks_adversary += 1
            for act in on_own_block(self.adv, b):
                if isinstance(act, Publish):
                    for blk in act.blocks:
                        deliver(self.queue, blk, [BULK], 0.0, t)
        else:
            m = ev.miner_index
            base = self._mining_base(m)
            stamp = to_local(t, float(self.offsets[m]))
            b = self._new_block(base, MinerId(m, Role.HONEST), stamp, t)
            self.n_blocks_honest += 1
            self._fill_slot_from_mining(m, base)
            # creator + adversary see it now; the rest after the delay
            deliver(self.queue, b, [miner_rx(m), ADVERSARY_RX], 0.0, t)
            deliver(self.queue, b, [BULK], self.cfg.propagation_delay, t)
        total = self.n_blocks_honest + self.n_blocks_adversary
        if self.cfg.stop_blocks is not None and total >= self.cfg.stop_blocks:
            self._stopped = True
            return
        self._schedule_next_generation(t)

    def _mining_base(self, m: int) -> Block:
        c = self.contest
        pb = self.own_pending.get(m)
        if pb is not None and pb.height > c.height:
            return pb
        if pb is not None and pb.height == c.height and c.bases is not None \
                and c.bases[m] == -1:
            return pb
        if len(c.entries) == 1:
            return c.entries[0].block
        assert c.bases is not None, "tie not evaluated before next generation"
        return c.entries[int(c.bases[m])].block

    # -- arrivals --

    def _on_arrival(self, ev: Event) -> None:
        assert ev.block is not None and ev.receiver is not None
        kind, idx = ev.receiver
        if kind == "adversary":
            if ev.block.creator.role is Role.HONEST:
                for act in on_honest_block(self.adv, ev.block):
                    if isinstance(act, Release):
                        deliver(self.queue, act.block, [BULK], 0.0, ev.at)
            return
        if kind == "miner":
            self._on_self_arrival(idx, ev.block, ev.at)
        else:
            self._on_bulk_arrival(ev.block, ev.at)

    def _on_self_arrival(self, m: int, b: Block, t: Seconds) -> None:
        self.own_pending[m] = b
        c = self.contest
        if c.height == b.height and c.entries:
            # the creator already faces a tie the bulk has not seen yet
            self.queue.push(Event(at=t, kind=EventKind.TIE_RESOLUTION,
                                  miner_index=m, height=b.height))

    def _on_bulk_arrival(self, b: Block, t: Seconds) -> None:
        c = self.contest
        creator = b.creator
        if b.height > c.height:
            self._finalize_contest()
            self.contest = c = _Contest(height=b.height, entries=[_Entry(b, t)])
            self._clear_pending_creator(b)
            self._schedule_bulk_eval(t)
            self._schedule_overlay_evals(t)
        elif b.height == c.height:
            c.entries.append(_Entry(b, t))
            self._clear_pending_creator(b, entry_index=len(c.entries) - 1)
            self._schedule_bulk_eval(t)
            self._schedule_overlay_evals(t)
        # else: stale arrival below the current best height; ignore

    def _clear_pending_creator(self, b: Block, entry_index: Optional[int] = None) -> None:
        m = b.creator.index
        if b.creator.role is Role.HONEST and self.own_pending.get(m) is b:
            del self.own_pending[m]
            c = self.contest
            if entry_index is not None and c.bases is not None and c.bases[m] == -1:
                c.bases[m] = entry_index

    def _schedule_bulk_eval(self, t: Seconds) -> None:
        c = self.contest
        if not c.eval_scheduled:
            c.eval_scheduled = True
            self.queue.push(Event(at=t, kind=EventKind.TIE_RESOLUTION,
                                  miner_index=-2, height=c.height))

    def _schedule_overlay_evals(self, t: Seconds) -> None:
        c = self.contest
        stale = [m for m, pb in self.own_pending.items() if pb.height < c.height]
        for m in stale:
            del self.own_pending[m]
        for m, pb in self.own_pending.items():
            if pb.height == c.height:
                self.queue.push(Event(at=t, kind=EventKind.TIE_RESOLUTION,
                                      miner_index=m, height=c.height))

    # -- tie evaluation --

    def _on_tie_resolution(self, ev: Event) -> None:
        c = self.contest
        if c.height != ev.height:
            return  # superseded before it fired
        if ev.miner_index >= 0:
            self._creator_eval(ev.miner_index, ev.at)
        else:
            c.eval_scheduled = False
            self._bulk_eval(ev.at)

    def _ensure_bases(self) -> np.ndarray:
        c = self.contest
        if c.bases is None:
            # before any tie everyone sat on the single adopted entry (index 0)
            c.bases = np.zeros(self.cfg.n_honest, dtype=np.int16)
        return c.bases

    def _ensure_pending(self, t: Seconds) -> Optional[_PendingTie]:
        """Create the tie record the first time an adversary tip is contested."""
        c = self.contest
        if c.pending is not None:
            return c.pending
        adv_entries = [e for e in c.entries
                       if e.block.creator.role is Role.ADVERSARY]
        if not adv_entries:
            return None  # honest-vs-honest fork: no follower record
        assert len(adv_entries) == 1, "one adversary release per height"
        adv_block = adv_entries[0].block
        honest = [e.block for e in c.entries
                  if e.block.creator.role is Role.HONEST]
        trigger = min(honest, key=lambda blk: blk.created_at) if honest else None
        created = trigger.created_at if trigger is not None else t
        c.pending = _PendingTie(
            tie_id=self.next_tie_id, height=c.height,
            adv_block_id=adv_block.block_id, created_true=created,
            withholding=created - adv_block.created_at,
            slots=np.full(self.cfg.n_honest, -1, dtype=np.int8))
        self.next_tie_id += 1
        return c.pending

    def _creator_eval(self, m: int, t: Seconds) -> None:
        c = self.contest
        pb = self.own_pending.get(m)
        if pb is None or pb.height != c.height:
            return
        off = float(self.offsets[m])
        candidates = [TieCandidate(
            tip=ReceivedBlock(block=e.block,
                              arrival_local=to_local(e.arrival_true, off),
                              arrival_true=e.arrival_true),
            chain_id=e.block.block_id) for e in c.entries]
        candidates.append(TieCandidate(
            tip=ReceivedBlock(block=pb,
                              arrival_local=to_local(pb.created_at, off),
                              arrival_true=pb.created_at),
            chain_id=pb.block_id))
        chosen = apply_rule(self.rule, candidates, self.rng)
        bases = self._ensure_bases()
        if chosen.chain_id == pb.block_id:
            bases[m] = -1
        else:
            bases[m] = next(i for i, e in enumerate(c.entries)
                            if e.block.block_id == chosen.chain_id)
        pending = self._ensure_pending(t)
        if pending is not None and pending.slots[m] == -1:
            chose_adv = chosen.tip.block.creator.role is Role.ADVERSARY
            pending.slots[m] = 1 if chose_adv else 0
            self._maybe_append_tie(pending)

    def _bulk_eval(self, t: Seconds) -> None:
        c = self.contest
        if len(c.entries) == 1:
            return  # plain adoption of the unique tip
        if c.bulk_evaluated and not self._should_reevaluate():
            return

        eligible = np.ones(self.cfg.n_honest, dtype=bool)
        for m in self.own_pending:
            eligible[m] = False
        idx = np.flatnonzero(eligible)
        choices = self._bulk_choices(idx)
        bases = self._ensure_bases()
        bases[idx] = choices
        c.bulk_evaluated = True

        pending = self._ensure_pending(t)
        if pending is not None:
            pending.bulk_evaluated = True
            # a slot records only the first decision; re-evaluations may move
            # a miner's mining base but never rewrite its recorded choice
            is_adv = np.array([e.block.creator.role is Role.ADVERSARY
                               for e in c.entries])
            unset = pending.slots[idx] == -1
            picks = is_adv[choices]
            pending.slots[idx[unset]] = picks[unset].astype(np.int8)
            self._maybe_append_tie(pending)

    def _should_reevaluate(self) -> bool:
        """A later same-height candidate triggers a fresh look only if it
        landed inside the acceptance window (proposed rule); the random rule
        always re-flips, first-seen never switches."""
        c = self.contest
        if self.cfg.rule is RuleKind.FIRST_SEEN:
            return False
        if self.cfg.rule is RuleKind.RANDOM:
            return True
        arrivals = [e.arrival_true for e in c.entries]
        return max(arrivals) - min(arrivals) <= self.params.window

    def _bulk_choices(self, idx: np.ndarray) -> np.ndarray:
        """Vectorised tie decision for the given honest miners; one row per
        miner, one column per contest entry. Mirrors the scalar rules in
        forkchoice (see the equivalence tests)."""
        c = self.contest
        k = len(c.entries)
        m = len(idx)
        rng = self.rng
        if self.cfg.rule is RuleKind.RANDOM:
            return rng.integers(0, k, size=m)
        arrivals = np.array([e.arrival_true for e in c.entries])
        if self.cfg.rule is RuleKind.FIRST_SEEN:
            # the earliest true arrival is earliest on every local clock
            tied = np.flatnonzero(arrivals == arrivals.min())
            if len(tied) == 1:
                return np.full(m, tied[0], dtype=np.int64)
            return tied[rng.integers(0, len(tied), size=m)]
        # proposed rule
        stamps = np.array([e.block.timestamp for e in c.entries])
        off = self.offsets[idx]
        window_ok = (arrivals - arrivals.min()) <= self.params.window
        gap = (arrivals[None, :] + off[:, None]) - stamps[None, :]
        flagged = ((gap < -self.params.delta_o)
                   | (gap > self.params.delta_o + self.params.delta_b))
        pool = window_ok[None, :] & ~flagged
        counts = pool.sum(axis=1)
        fallback = counts == 0
        if fallback.any():
            pool[fallback] = window_ok
            counts = pool.sum(axis=1)
        target = (rng.random(m) * counts).astype(np.int64) + 1
        cum = np.cumsum(pool, axis=1)
        return np.argmax(cum >= target[:, None], axis=1)

    # -- tie record lifecycle --

    def _fill_slot_from_mining(self, m: int, base: Block) -> None:
        """A miner's first post-tie mining decision stands in for a rule
        evaluation it never got to make (possible only with delays)."""
        c = self.contest
        pending = c.pending
        if pending is None or pending.appended or pending.slots[m] != -1:
            return
        pending.slots[m] = 1 if self._descends_from_adv(base, pending) else 0
        self._maybe_append_tie(pending)

    def _descends_from_adv(self, block: Block, pending: _PendingTie) -> bool:
        b = block
        while b.height > pending.height:
            assert b.parent_id is not None
            b = self.store.get(b.parent_id)
        return b.block_id == pending.adv_block_id

    def _maybe_append_tie(self, pending: _PendingTie) -> None:
        if pending.appended or not pending.bulk_evaluated:
            return
        if int((pending.slots == -1).sum()) > 0:
            return
        self._append_tie(pending)

    def _append_tie(self, pending: _PendingTie) -> None:
        slots = pending.slots
        n_following = int((slots == 1).sum())
        n_honest = int(len(slots))
        gamma = n_following / n_honest
        choices = None
        if self.cfg.record_choices:
            choices = tuple(
                Choice(miner=MinerId(i, Role.HONEST),
                       chose_adversary=bool(slots[i] == 1),
                       weight=self.honest_weight)
                for i in range(n_honest))
        self.tie_events.append(TieEvent(
            tie_id=pending.tie_id, true_time=float(pending.created_true),
            withholding_duration=float(pending.withholding),
            gamma=float(gamma), n_following=n_following, n_honest=n_honest,
            choices=choices))
        pending.appended = True
        if (self.cfg.stop_ties is not None
                and len(self.tie_events) >= self.cfg.stop_ties):
            self._stopped = True

    def _finalize_contest(self) -> None:
        """Close the tie record (if any) before the contest moves on."""
        c = self.contest
        pending = c.pending
        if pending is None or pending.appended:
            return
        if not pending.bulk_evaluated:
            # superseded before the tie ever reached the network at large
            # (needs two adversary blocks inside one propagation delay)
            c.pending = None
            return
        unset = np.flatnonzero(pending.slots == -1)
        for m in unset:
            pb = self.own_pending.get(m)
            if pb is not None and pb.height >= pending.height:
                side = self._descends_from_adv(pb, pending)
            elif c.bases is not None:
                side = (c.entries[int(c.bases[m])].block.creator.role
                        is Role.ADVERSARY)
            else:
                side = False
            pending.slots[m] = 1 if side else 0
        self._append_tie(pending)

    # -- report --

    def _build_report(self) -> SimReport:
        gammas = [e.gamma for e in self.tie_events]
        mean, stderr = aggregate(gammas)
        cfg = self.cfg
        honest_t = cfg.honest_mean_interval
        return SimReport(
            config=cfg,
            tie_events=tuple(self.tie_events),
            gamma_mean=mean,
            gamma_stderr=stderr,
            n_blocks_honest=self.n_blocks_honest,
            n_blocks_adversary=self.n_blocks_adversary,
            elapsed=float(self._clock),
            network_mean_interval=float(cfg.mean_block_interval),
            honest_mean_interval=float(honest_t),
            bound_reference=gamma_upper_bound(
                cfg.params.delta_o, cfg.params.delta_b,
                cfg.mean_block_interval),
            ideal_reference=(expected_gamma_ideal(
                cfg.params.delta_o, cfg.params.delta_b, honest_t)
                if honest_t != float("inf") else 0.0),
        )


def run(config: SimConfig,
        trace: Optional[Callable[[Seconds, EventKind], None]] = None) -> SimReport:
    """Run one simulation cell to its stop condition."""
    return Engine(config, trace=trace).run()
