"""The structured clarification exchange issued when alignment fails.

Repeat the suspended request, alert the user to the apparent subject change,
hand control back, and offer exactly three choices:
  a) proceed with the new request as-is
  b) treat it as a continuation of the previous topic (inject that round)
  c) replace it with a clearer request

Wrapper texts are the protocol contract: clients receive them as data and must
never hard-code them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .history import Turn


class UnknownChoice(ValueError):
    """Choice id outside {a, b, c}."""


class NoPendingClarification(RuntimeError):
    """No clarification is awaiting resolution for this session."""


class MissingNewText(ValueError):
    """Choice c arrived without replacement text where none can follow."""


REPEAT_TEMPLATE = "Your current real-time request is: '{instruction}'."
ALERT_TEMPLATE = (
    "I note that this request appears substantially different in subject matter "
    "from our previous discussion of '{previous}'."
)
EMPOWER_TEXT = "To better understand your intent, I need your assistance. Would you like to:"

CHOICE_LABELS = (
    ("a", "Proceed with this new request"),
    ("b", "Correct my understanding—your request is actually a deepening or variation of the previous topic"),
    ("c", "Alternatively, provide a clearer new request"),
)

PROCEED_NEW = "proceed_new"
PROCEED_CONTINUATION = "proceed_continuation"
AWAIT_NEW = "await_new"


@dataclass(frozen=True)
class Choice:
    id: str
    label: str


@dataclass(frozen=True)
class ClarificationPrompt:
    repeat_text: str
    alert_text: str
    empower_text: str
    choices: tuple[Choice, ...]
    pending_instruction: str
    h_j_index: int


@dataclass(frozen=True)
class PipelineAction:
    kind: str
    inject_turn: Optional[Turn] = None


def build_clarification(instruction: str, h_j: Turn) -> ClarificationPrompt:
    """Fill the protocol templates for a suspended instruction."""
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")
    return ClarificationPrompt(
        repeat_text=REPEAT_TEMPLATE.format(instruction=instruction),
        alert_text=ALERT_TEMPLATE.format(previous=h_j.user_text),
        empower_text=EMPOWER_TEXT,
        choices=tuple(Choice(id=i, label=label) for i, label in CHOICE_LABELS),
        pending_instruction=instruction,
        h_j_index=h_j.index,
    )


def resolve_clarification(
    prompt: ClarificationPrompt,
    choice_id: str,
    new_text: Optional[str] = None,
    h_j: Optional[Turn] = None,
    expect_followup: bool = True,
) -> PipelineAction:
    """Map the user's a/b/c choice onto the pipeline's next move.

    a: forward the suspended instruction with no injection (accepted topic shift).
    b: forward it with the flagged round injected, same mechanism as the aligned branch.
    c: discard it as a generation target; replacement text (if any) re-enters the
       pipeline from the top. With expect_followup=False a missing replacement is
       an error instead of an awaiting state.
    """
    if choice_id == "a":
        return PipelineAction(kind=PROCEED_NEW)
    if choice_id == "b":
        if h_j is None:
            raise ValueError("choice b requires the flagged history turn")
        return PipelineAction(kind=PROCEED_CONTINUATION, inject_turn=h_j)
    if choice_id == "c":
        if new_text is None and not expect_followup:
            raise MissingNewText("choice c needs replacement text here")
        return PipelineAction(kind=AWAIT_NEW)
    raise UnknownChoice(f"choice must be one of a/b/c, got {choice_id!r}")
