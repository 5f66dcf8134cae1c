"""Offline evaluation: replay labeled scenarios, sweep the threshold, report metrics.

A scenario is a scripted dialog whose turns are labeled continuation or shift.
Replays run the full offline pipeline deterministically (timestamps come from
the script); clarifications are auto-resolved so one flag does not stall the
rest of the script. Metrics per threshold: shifts flagged (TP), continuations
flagged (FP), shifts missed (FN), precision/recall/F1, and clarification
frequency.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

from .config import SessionConfig
from .gateway import GatewayService

CONTINUATION = "continuation"
SHIFT = "shift"
LABELS = (CONTINUATION, SHIFT)

METRICS_COLUMNS = (
    "theta",
    "true_shifts_flagged",
    "continuations_flagged",
    "shifts_missed",
    "precision",
    "recall",
    "f1",
    "clarification_frequency",
)


class ScenarioInvalid(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioTurn:
    user_text: str
    timestamp: float
    label: str


@dataclass(frozen=True)
class Scenario:
    name: str
    turns: tuple[ScenarioTurn, ...]
    config: dict = field(default_factory=dict)

    def validate(self) -> "Scenario":
        if not self.turns:
            raise ScenarioInvalid("scenario needs at least one turn")
        previous = -math.inf
        for i, turn in enumerate(self.turns):
            if turn.label not in LABELS:
                raise ScenarioInvalid(f"turn {i}: label must be one of {LABELS}, got {turn.label!r}")
            if not isinstance(turn.timestamp, (int, float)) or not math.isfinite(turn.timestamp):
                raise ScenarioInvalid(f"turn {i}: timestamp must be finite")
            if turn.timestamp <= previous:
                raise ScenarioInvalid(f"turn {i}: timestamps must be strictly increasing")
            previous = turn.timestamp
            if not turn.user_text.strip():
                raise ScenarioInvalid(f"turn {i}: user_text is blank")
        return self

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "config": self.config,
            "turns": [
                {"user_text": t.user_text, "timestamp": t.timestamp, "label": t.label}
                for t in self.turns
            ],
        }

    @classmethod
    def from_record(cls, record: dict) -> "Scenario":
        try:
            turns = tuple(
                ScenarioTurn(
                    user_text=t["user_text"],
                    timestamp=float(t["timestamp"]),
                    label=t.get("label", CONTINUATION),
                )
                for t in record["turns"]
            )
            scenario = cls(
                name=record.get("name", "scenario"),
                turns=turns,
                config=record.get("config", {}) or {},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioInvalid(f"bad scenario record: {exc}") from exc
        return scenario.validate()


@dataclass(frozen=True)
class MetricsRow:
    theta: float
    true_shifts_flagged: int
    continuations_flagged: int
    shifts_missed: int
    precision: float
    recall: float
    f1: float
    clarification_frequency: float


def load_scenarios(source: Union[str, Path, IO[str]]) -> list[Scenario]:
    """Scenario file: one JSON scenario record per line."""
    if hasattr(source, "read"):
        text = source.read()  # type: ignore[union-attr]
    else:
        text = Path(source).read_text(encoding="utf-8")
    scenarios = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioInvalid(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        scenarios.append(Scenario.from_record(record))
    if not scenarios:
        raise ScenarioInvalid("scenario file contains no records")
    return scenarios


def run_scenario(
    scenario: Scenario,
    config: Optional[SessionConfig] = None,
    on_clarify: str = "a",
) -> list[dict]:
    """Replay a scenario through a fresh offline session; one trace record per turn.

    Clarified turns are auto-resolved with `on_clarify` (a: accept the shift,
    b: treat as continuation) so the replay continues; the resolution is
    recorded in the trace and the generator is not invoked for that turn.
    """
    scenario.validate()
    if on_clarify not in ("a", "b"):
        raise ValueError(f"on_clarify must be 'a' or 'b', got {on_clarify!r}")
    base = (config or SessionConfig()).merged({"offline_mode": True})
    service = GatewayService(defaults=base, offline=True)
    session_id = service.create_session(scenario.config, session_id=scenario.name)

    trace: list[dict] = []
    for position, turn in enumerate(scenario.turns):
        response = service.handle_message(session_id, turn.user_text, turn.timestamp)
        meta = response.meta
        record = {
            "turn": position,
            "timestamp": turn.timestamp,
            "label": turn.label,
            "branch": meta.branch,
            "s_align": meta.s_align,
            "best_variant": meta.best_variant,
            "h_j_index": meta.h_j_index,
            "auto_resolved": None,
        }
        if response.kind == "clarification":
            service.skip_pending_clarification(session_id, on_clarify)
            record["auto_resolved"] = on_clarify
        trace.append(record)
    return trace


def write_trace(trace: Iterable[dict], sink: Union[str, Path, IO[str]]) -> None:
    lines = "".join(json.dumps(record, ensure_ascii=False) + "\n" for record in trace)
    if hasattr(sink, "write"):
        sink.write(lines)  # type: ignore[union-attr]
    else:
        Path(sink).write_text(lines, encoding="utf-8")


def metrics_from_traces(traces: Sequence[list[dict]], theta: float) -> MetricsRow:
    tp = fp = fn = clarifications = turns = 0
    for trace in traces:
        for record in trace:
            turns += 1
            branch = record["branch"]
            if branch == "misaligned":
                clarifications += 1
            if branch == "bypass":
                continue
            flagged = branch == "misaligned"
            if record["label"] == SHIFT and flagged:
                tp += 1
            elif record["label"] == CONTINUATION and flagged:
                fp += 1
            elif record["label"] == SHIFT and not flagged:
                fn += 1
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MetricsRow(
        theta=theta,
        true_shifts_flagged=tp,
        continuations_flagged=fp,
        shifts_missed=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        clarification_frequency=clarifications / turns if turns else 0.0,
    )


def sweep_theta(
    scenarios: Union[Scenario, Sequence[Scenario]],
    grid: Sequence[float],
    config: Optional[SessionConfig] = None,
    on_clarify: str = "a",
) -> list[MetricsRow]:
    """One full replay per grid point; metrics aggregated across scenarios."""
    if isinstance(scenarios, Scenario):
        scenarios = [scenarios]
    if not grid:
        raise ValueError("grid must be non-empty")
    for theta in grid:
        if not -1.0 <= theta <= 1.0:
            raise ValueError(f"grid value {theta} outside [-1, 1]")
    base = config or SessionConfig()
    # the grid's theta must win over any per-scenario theta override
    stripped = [
        Scenario(
            name=s.name,
            turns=s.turns,
            config={key: value for key, value in s.config.items() if key != "theta"},
        )
        for s in scenarios
    ]
    rows = []
    for theta in grid:
        themed = base.merged({"theta": theta})
        traces = [run_scenario(s, themed, on_clarify) for s in stripped]
        rows.append(metrics_from_traces(traces, theta))
    return rows


def write_metrics_csv(rows: Sequence[MetricsRow], sink: Union[str, Path, IO[str]]) -> None:
    def _write(fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([getattr(row, column) for column in METRICS_COLUMNS])

    if hasattr(sink, "write"):
        _write(sink)
    else:
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            _write(fh)


def parse_grid(spec: str) -> list[float]:
    """Grid spec: 'start:stop:step' (inclusive ends) or comma-separated values."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be > 0")
        count = int(round((stop - start) / step))
        grid = [round(start + i * step, 10) for i in range(count + 1)]
        return [g for g in grid if g <= stop + 1e-12]
    return [float(p) for p in spec.split(",") if p.strip()]


DEFAULT_VOCAB_A = ("recipe", "flour", "oven", "dough", "yeast", "bake", "knead", "crust", "loaf", "proof")
DEFAULT_VOCAB_B = ("telescope", "orbit", "nebula", "galaxy", "photon", "spectrum", "stellar", "cosmic", "parallax", "quasar")


def make_shift_scenario(
    vocab_a: Sequence[str] = DEFAULT_VOCAB_A,
    vocab_b: Sequence[str] = DEFAULT_VOCAB_B,
    shift_at: int = 4,
    total_turns: int = 6,
    words_per_turn: int = 6,
    gap_seconds: float = 60.0,
    pause_seconds: float = 3600.0,
    name: str = "vocab-shift",
) -> Scenario:
    """Synthetic dialog: topic A, then a disjoint-vocabulary topic B at `shift_at` (1-based).

    Consecutive turns within a topic are sliding windows over the vocabulary, so
    they share all but one token. A long pause precedes the shift turn: decay
    then concentrates weight on the new thread, which is what lets post-shift
    turns realign.
    """
    if not 1 < shift_at <= total_turns:
        raise ValueError("shift_at must be in (1, total_turns]")
    overlap = set(w.lower() for w in vocab_a) & set(w.lower() for w in vocab_b)
    if overlap:
        raise ValueError(f"vocabularies must be disjoint, both contain {sorted(overlap)}")

    def window(vocab: Sequence[str], start: int) -> str:
        return " ".join(vocab[(start + j) % len(vocab)] for j in range(words_per_turn))

    turns = []
    timestamp = 0.0
    for position in range(total_turns):
        shifted = position >= shift_at - 1
        if position == shift_at - 1:
            timestamp += pause_seconds
        vocab = vocab_b if shifted else vocab_a
        offset = position - (shift_at - 1) if shifted else position
        label = SHIFT if position == shift_at - 1 else CONTINUATION
        turns.append(ScenarioTurn(user_text=window(vocab, offset), timestamp=timestamp, label=label))
        timestamp += gap_seconds
    return Scenario(name=name, turns=tuple(turns)).validate()
