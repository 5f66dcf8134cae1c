"""Shared glue for the gateway-level tests.

recompute_s_align replays the documented scoring rule over a history snapshot:
template expansion and the reference embedder produce the inputs, but the
weighting and the double loop are evaluated by the independent oracle, not by
the engine under test.
"""

from __future__ import annotations

from typing import Optional

from cap.embedding import ReferenceEmbedder
from cap.expansion import TemplateExpander, expand
from oracle import naive_alignment, naive_weights

_EMBEDDER = ReferenceEmbedder()


def round_text_of(row: dict) -> str:
    if row["assistant_text"] is None:
        return row["user_text"]
    return f"{row['user_text']}\n{row['assistant_text']}"


def recompute_s_align(history_rows: list[dict], index: int, config: dict) -> Optional[float]:
    """Expected s_align for turn `index`, from the history endpoint's rows."""
    row = history_rows[index]
    rounds = history_rows[:index][-config["k"]:]
    if not rounds:
        return None
    expansion = expand(row["user_text"], row["timestamp"], TemplateExpander())
    deltas = [row["timestamp"] - r["timestamp"] for r in rounds]
    weights = naive_weights(deltas, config["tau_seconds"])
    variant_vecs = [
        _EMBEDDER.embed(text).values
        for text in (expansion.literal, expansion.prerequisite, expansion.implication)
    ]
    history_vecs = [_EMBEDDER.embed(round_text_of(r)).values for r in rounds]
    s_align, _ = naive_alignment(variant_vecs, history_vecs, weights)
    return s_align
