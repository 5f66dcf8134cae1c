"""Dialog history: turns, last-k retrieval, and the append-only JSONL session log.

A "round" is one (user, assistant) pair. The round's timestamp is taken at
instruction receipt; the assistant text is filled in once generation completes.
The log is written at those same two points so a crash during generation never
loses the instruction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Union


class EmptyText(ValueError):
    """Instruction is blank after trimming."""


class InvalidTimestamp(ValueError):
    """Timestamp is not a finite, non-negative number."""


class MonotonicityViolation(ValueError):
    """New turn's timestamp is earlier than the last turn's."""


class CorruptLog(ValueError):
    """A session log record could not be parsed or applied."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class Turn:
    """One dialog round: user instruction, optional assistant reply, receipt time."""

    index: int
    user_text: str
    timestamp: float
    assistant_text: Optional[str] = None


@dataclass
class DialogHistory:
    """Ordered log of turns for one session. Indexes are contiguous from 0."""

    session_id: str = "default"
    turns: list[Turn] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.turns)

    def append_turn(self, user_text: str, timestamp: float) -> Turn:
        """Append a new turn (assistant pending). Timestamps must not decrease."""
        if not user_text.strip():
            raise EmptyText("instruction is blank after trimming")
        ts = float(timestamp)
        if not math.isfinite(ts) or ts < 0:
            raise InvalidTimestamp(f"timestamp must be finite and >= 0, got {timestamp!r}")
        if self.turns and ts < self.turns[-1].timestamp:
            raise MonotonicityViolation(
                f"timestamp {ts} is earlier than last turn's {self.turns[-1].timestamp}"
            )
        turn = Turn(index=len(self.turns), user_text=user_text, timestamp=ts)
        self.turns.append(turn)
        return turn

    def recent_rounds(self, k: int, before: Optional[int] = None) -> list[Turn]:
        """The min(k, n) most recent turns, oldest first.

        `before` limits the pool to turns with index < before, so a pipeline can
        score the current instruction against only the history that preceded it.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        pool = self.turns if before is None else self.turns[:before]
        return list(pool[-k:])


# --- session log records ------------------------------------------------

def _encode(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False)


def _turn_record(turn: Turn) -> dict:
    return {
        "type": "turn",
        "index": turn.index,
        "timestamp": turn.timestamp,
        "user_text": turn.user_text,
    }


def _completion_record(turn: Turn, at: Optional[float] = None) -> dict:
    return {
        "type": "completion",
        "index": turn.index,
        "timestamp": turn.timestamp if at is None else at,
        "assistant_text": turn.assistant_text,
    }


Sink = Union[str, Path, IO[str]]


def save_log(history: DialogHistory, sink: Sink) -> None:
    """Write the history to the line-delimited session log format."""
    if hasattr(sink, "write"):
        _write_records(history, sink)  # type: ignore[arg-type]
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            _write_records(history, fh)


def _write_records(history: DialogHistory, fh: IO[str]) -> None:
    for turn in history.turns:
        fh.write(_encode(_turn_record(turn)) + "\n")
        if turn.assistant_text is not None:
            fh.write(_encode(_completion_record(turn)) + "\n")


def load_log(source: Sink, session_id: str = "restored") -> DialogHistory:
    """Rebuild a history by replaying the session log.

    Clarification records are session events, not turns; they are skipped.
    Raises CorruptLog with the offending line number on any malformed record.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()  # type: ignore[union-attr]
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()

    history = DialogHistory(session_id=session_id)
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorruptLog(lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise CorruptLog(lineno, "record is not an object")
        rtype = record.get("type")
        if rtype == "turn":
            _apply_turn(history, record, lineno)
        elif rtype == "completion":
            _apply_completion(history, record, lineno)
        elif rtype == "clarification":
            continue
        else:
            raise CorruptLog(lineno, f"unknown record type {rtype!r}")
    return history


def _apply_turn(history: DialogHistory, record: dict, lineno: int) -> None:
    try:
        index = record["index"]
        timestamp = record["timestamp"]
        user_text = record["user_text"]
    except KeyError as exc:
        raise CorruptLog(lineno, f"turn record missing field {exc.args[0]!r}") from exc
    if index != len(history.turns):
        raise CorruptLog(lineno, f"turn index {index} out of order (expected {len(history.turns)})")
    if not isinstance(user_text, str):
        raise CorruptLog(lineno, "user_text is not a string")
    try:
        history.append_turn(user_text, timestamp)
    except (ValueError, TypeError) as exc:
        raise CorruptLog(lineno, str(exc)) from exc


def _apply_completion(history: DialogHistory, record: dict, lineno: int) -> None:
    try:
        index = record["index"]
        assistant_text = record["assistant_text"]
    except KeyError as exc:
        raise CorruptLog(lineno, f"completion record missing field {exc.args[0]!r}") from exc
    if not isinstance(index, int) or not 0 <= index < len(history.turns):
        raise CorruptLog(lineno, f"completion for unknown turn index {index!r}")
    if not isinstance(assistant_text, str):
        raise CorruptLog(lineno, "assistant_text is not a string")
    history.turns[index].assistant_text = assistant_text


class SessionLog:
    """Append-only writer for one session's event log."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def _write(self, record: dict) -> None:
        self._fh.write(_encode(record) + "\n")
        self._fh.flush()

    def record_turn(self, turn: Turn) -> None:
        self._write(_turn_record(turn))

    def record_completion(self, turn: Turn, at: Optional[float] = None) -> None:
        self._write(_completion_record(turn, at))

    def record_clarification(self, index: int, timestamp: float, event: str, **fields) -> None:
        record = {"type": "clarification", "index": index, "timestamp": timestamp, "event": event}
        record.update(fields)
        self._write(record)

    def close(self) -> None:
        self._fh.close()
