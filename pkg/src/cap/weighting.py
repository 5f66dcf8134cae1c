"""Temporal decay weights for retrieved history rounds.

raw_weight(dt, tau) = 1 / (1 + dt/tau): 1.0 at dt=0, 0.5 at dt=tau, smoothly
decaying but never zero, so the most recent round always dominates while old
rounds keep a voice. The increasing form dt/tau + 1 is kept behind
form="paper_literal" for comparison runs; it is not the default anywhere.

Weights are normalized to sum to 1 before scoring so alignment scores are
comparable across context sizes and a fixed threshold stays meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .history import Turn

RECIPROCAL = "reciprocal"
PAPER_LITERAL = "paper_literal"
WEIGHT_FORMS = (RECIPROCAL, PAPER_LITERAL)


class InvalidTau(ValueError):
    """tau must be a positive, finite number of seconds."""


class FutureTimestamp(ValueError):
    """A round is timestamped after the current instruction."""


@dataclass(frozen=True)
class WeightedEntry:
    turn: Turn
    raw_weight: float
    norm_weight: float


@dataclass(frozen=True)
class WeightedContext:
    entries: tuple[WeightedEntry, ...]
    tau: float
    now: float
    k_requested: int


def raw_weight(delta_t: float, tau: float, form: str = RECIPROCAL) -> float:
    """Weight of a round delta_t seconds before the current instruction."""
    if not math.isfinite(tau) or tau <= 0:
        raise InvalidTau(f"tau must be > 0, got {tau!r}")
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t!r}")
    if form == RECIPROCAL:
        return 1.0 / (1.0 + delta_t / tau)
    if form == PAPER_LITERAL:
        return delta_t / tau + 1.0
    raise ValueError(f"unknown weight form {form!r}")


def build_weighted_context(
    rounds: Sequence[Turn],
    now: float,
    tau: float,
    k_requested: Optional[int] = None,
    form: str = RECIPROCAL,
) -> WeightedContext:
    """Pair each round with its raw and normalized temporal weight.

    Empty rounds yield an empty context (valid: the first-turn bypass).
    """
    if k_requested is None:
        k_requested = max(len(rounds), 1)
    for turn in rounds:
        if turn.timestamp > now:
            raise FutureTimestamp(
                f"turn {turn.index} at {turn.timestamp} is after now={now}"
            )
    raws = [raw_weight(now - turn.timestamp, tau, form) for turn in rounds]
    total = math.fsum(raws)
    entries = tuple(
        WeightedEntry(turn=turn, raw_weight=raw, norm_weight=raw / total)
        for turn, raw in zip(rounds, raws)
    )
    return WeightedContext(entries=entries, tau=tau, now=now, k_requested=k_requested)
