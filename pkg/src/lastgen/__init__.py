"""lastgen: event-driven simulator for timestamp-based fork tie-breaking
under a block-withholding adversary.

Typical use:

    from lastgen import SimConfig, run
    report = run(SimConfig(seed=7, stop_ties=1000))
    print(report.gamma_mean, report.bound_reference)
"""
from .adversary import (AdversaryState, FixedOffset, HonestClock,
                        TheoremOptimal, TimestampStrategy, choose_timestamp,
                        on_honest_block, on_own_block)
from .core import (Block, BlockStore, LocalParams, MinerId, ReceivedBlock,
                   Role, Seconds, make_genesis, max_pairwise_skew, to_local,
                   validate_lineage)
from .engine import (ConfigError, Engine, Event, EventKind, EventQueue,
                     SimConfig, SimReport, deliver, next_generation_delay,
                     run)
from .forkchoice import (Rule, RuleKind, TieCandidate, apply_rule,
                         filter_window, first_seen_rule, get_main_chain,
                         is_adversarial_evidence, random_rule)
from .metrics import (Choice, TieEvent, aggregate, expected_gamma_ideal,
                      gamma_event, gamma_upper_bound)

__version__ = "0.1.0"

__all__ = [
    "AdversaryState", "Block", "BlockStore", "Choice", "ConfigError",
    "Engine", "Event", "EventKind", "EventQueue", "FixedOffset",
    "HonestClock", "LocalParams", "MinerId", "ReceivedBlock", "Role", "Rule",
    "RuleKind", "Seconds", "SimConfig", "SimReport", "TheoremOptimal",
    "TieCandidate", "TieEvent", "TimestampStrategy", "aggregate",
    "apply_rule", "choose_timestamp", "deliver", "expected_gamma_ideal",
    "filter_window", "first_seen_rule", "gamma_event", "gamma_upper_bound",
    "get_main_chain", "is_adversarial_evidence", "make_genesis",
    "max_pairwise_skew", "next_generation_delay", "on_honest_block",
    "on_own_block", "random_rule", "run", "to_local", "validate_lineage",
    "__version__",
]
