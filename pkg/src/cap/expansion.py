"""Semantic expansion: widen one instruction into {prerequisite, literal, implication}.

The three variants give the alignment check an interval of meaning instead of a
point: what must hold before the instruction, the instruction itself, and where
it naturally leads. A generative backend produces the outer variants through
two meta-prompts; the template backend is the deterministic offline stand-in
and the fallback when generation fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

PREREQUISITE = "prerequisite"
IMPLICATION = "implication"

PREREQUISITE_QUESTION = "What prerequisites are needed to execute this instruction?"
IMPLICATION_QUESTION = "What is the next step for this instruction?"

TEMPLATE_PREREQUISITE = (
    "Identify the prerequisites, definitions, and assumptions required before one can: {instruction}"
)
TEMPLATE_IMPLICATION = (
    "Describe the natural next step, application, or deeper exploration that follows from: {instruction}"
)

# variants feed an embedder, not a human; long rambles only dilute the vector
MAX_VARIANT_CHARS = 512


class ExpanderUnavailable(RuntimeError):
    """Both the generative and the template expansion paths failed."""


@dataclass(frozen=True)
class ExpansionSet:
    """The semantic span of one instruction, with its receipt time."""

    literal: str
    prerequisite: str
    implication: str
    issued_at: float
    backend_id: str

    def variant(self, name: str) -> str:
        return getattr(self, name)


def render_meta_prompt(instruction: str, which: str) -> str:
    """The exact prompt sent to a generative backend for one variant."""
    if which == PREREQUISITE:
        question = PREREQUISITE_QUESTION
    elif which == IMPLICATION:
        question = IMPLICATION_QUESTION
    else:
        raise ValueError(f"unknown variant {which!r}")
    return f"{question}\nInstruction:\n{instruction}"


class ExpanderBackend:
    id: str = "abstract"
    kind: str = "abstract"

    def variant(self, instruction: str, which: str) -> str:
        raise NotImplementedError


class TemplateExpander(ExpanderBackend):
    """Deterministic expansion; same input, same output bytes."""

    id = "template-v1"
    kind = "template"

    def variant(self, instruction: str, which: str) -> str:
        if which == PREREQUISITE:
            return TEMPLATE_PREREQUISITE.format(instruction=instruction)
        if which == IMPLICATION:
            return TEMPLATE_IMPLICATION.format(instruction=instruction)
        raise ValueError(f"unknown variant {which!r}")


class GenerativeExpander(ExpanderBackend):
    """Expansion via one small chat-completion call per variant.

    `complete` takes a message list and returns the assistant text; the
    gateway wires it to the upstream chat client with the expander model.
    """

    kind = "generative"

    def __init__(self, complete: Callable[[list[dict]], str], model: str = ""):
        self.complete = complete
        self.model = model
        self.id = f"generative:{model}" if model else "generative"

    def variant(self, instruction: str, which: str) -> str:
        prompt = render_meta_prompt(instruction, which)
        raw = self.complete([{"role": "user", "content": prompt}])
        return _clean_generated(raw)


def _clean_generated(text: str) -> str:
    """First non-empty line block, quotes stripped, capped at 512 chars."""
    lines = text.splitlines()
    block: list[str] = []
    for line in lines:
        if line.strip():
            block.append(line.strip())
        elif block:
            break
    joined = " ".join(block).strip()
    joined = joined.strip("'\"`“”‘’").strip()
    return joined[:MAX_VARIANT_CHARS]


_TEMPLATE = TemplateExpander()


def expand(
    instruction: str,
    issued_at: float,
    backend: ExpanderBackend,
    fallback: Optional[TemplateExpander] = None,
) -> ExpansionSet:
    """Produce the expansion set, falling back to templates on generative failure.

    A generative variant gets one retry; if either variant still fails or comes
    back blank, both variants are taken from the template backend so the set's
    provenance stays single-sourced.
    """
    if not instruction:
        raise ValueError("instruction must be non-empty")
    fallback = fallback or _TEMPLATE

    source = backend
    if backend.kind == "template":
        prerequisite = backend.variant(instruction, PREREQUISITE)
        implication = backend.variant(instruction, IMPLICATION)
    else:
        prerequisite = _attempt(backend, instruction, PREREQUISITE)
        implication = _attempt(backend, instruction, IMPLICATION) if prerequisite else None
        if not prerequisite or not implication:
            source = fallback
            prerequisite = fallback.variant(instruction, PREREQUISITE)
            implication = fallback.variant(instruction, IMPLICATION)

    if not prerequisite or not implication:
        raise ExpanderUnavailable("no expansion backend produced output")
    return ExpansionSet(
        literal=instruction,
        prerequisite=prerequisite,
        implication=implication,
        issued_at=issued_at,
        backend_id=source.id,
    )


def _attempt(backend: ExpanderBackend, instruction: str, which: str) -> Optional[str]:
    for _ in range(2):  # one retry
        try:
            out = backend.variant(instruction, which)
        except Exception:
            continue
        if out:
            return out
    return None
