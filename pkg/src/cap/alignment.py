"""Alignment scoring and the threshold branch.

For each variant a of the expanded instruction and each retrieved round H_i:

    score(a) = sum_i norm_weight_i * cosine(v(a), v(H_i))

The alignment score is the maximum over the three variants; the round most
similar to the winning variant is the injection candidate H_j. Scores at or
above the threshold confirm alignment; below it, generation is suspended and
the clarification protocol takes over. An empty history bypasses the check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .clarification import ClarificationPrompt, build_clarification
from .embedding import Embedder, cosine
from .expansion import ExpansionSet
from .history import Turn
from .weighting import WeightedContext

VARIANTS = ("literal", "prerequisite", "implication")

ROUND = "round"
INSTRUCTION_ONLY = "instruction_only"
HISTORY_EMBED_MODES = (ROUND, INSTRUCTION_ONLY)

ALIGNED = "aligned"
MISALIGNED = "misaligned"
BYPASS = "bypass"


@dataclass(frozen=True)
class AlignmentReport:
    s_align: float
    best_variant: str
    per_variant_scores: dict[str, float]
    h_j_index: Optional[int]
    per_pair_sims: dict[str, list[float]]
    raw_sum_scores: dict[str, float]


@dataclass(frozen=True)
class Decision:
    branch: str
    theta: float
    injected_turn: Optional[Turn] = None
    clarification: Optional[ClarificationPrompt] = None


def round_text(turn: Turn, mode: str = ROUND) -> str:
    """Text embedded for one history round.

    Round mode concatenates instruction and response: responses carry the
    established context. instruction_only uses the user's words alone.
    """
    if mode == INSTRUCTION_ONLY or turn.assistant_text is None:
        return turn.user_text
    if mode == ROUND:
        return f"{turn.user_text}\n{turn.assistant_text}"
    raise ValueError(f"unknown history embed mode {mode!r}")


def alignment_score(
    expansion: ExpansionSet,
    context: WeightedContext,
    embedder: Embedder,
    history_embed: str = ROUND,
    h_j_selector: str = "best_variant",
) -> AlignmentReport:
    """Score the expansion against the weighted context and pick H_j.

    H_j is the entry most similar to the winning variant (the one that
    explained the history); h_j_selector="literal" switches to similarity
    against the user's literal instruction instead.
    """
    if not context.entries:
        raise ValueError("context is empty; empty history is handled by decide() as bypass")
    if h_j_selector not in ("best_variant", "literal"):
        raise ValueError(f"unknown h_j selector {h_j_selector!r}")

    history_vectors = [
        embedder.embed(round_text(entry.turn, history_embed)) for entry in context.entries
    ]

    per_pair_sims: dict[str, list[float]] = {}
    per_variant_scores: dict[str, float] = {}
    raw_sum_scores: dict[str, float] = {}
    for name in VARIANTS:
        vec = embedder.embed(expansion.variant(name))
        sims = [cosine(vec, hv) for hv in history_vectors]
        per_pair_sims[name] = sims
        weighted = math.fsum(
            entry.norm_weight * sim for entry, sim in zip(context.entries, sims)
        )
        # guard the float-rounding overshoot of the normalized weight sum
        per_variant_scores[name] = max(-1.0, min(1.0, weighted))
        raw_sum_scores[name] = math.fsum(
            entry.raw_weight * sim for entry, sim in zip(context.entries, sims)
        )

    best_variant = VARIANTS[0]
    for name in VARIANTS[1:]:
        if per_variant_scores[name] > per_variant_scores[best_variant]:
            best_variant = name

    # ties go to the most recent entry, consistent with recency weighting
    selector = best_variant if h_j_selector == "best_variant" else "literal"
    best_pos = 0
    best_sims = per_pair_sims[selector]
    for pos in range(1, len(best_sims)):
        if best_sims[pos] >= best_sims[best_pos]:
            best_pos = pos

    return AlignmentReport(
        s_align=per_variant_scores[best_variant],
        best_variant=best_variant,
        per_variant_scores=per_variant_scores,
        h_j_index=context.entries[best_pos].turn.index,
        per_pair_sims=per_pair_sims,
        raw_sum_scores=raw_sum_scores,
    )


def decide(
    report: Optional[AlignmentReport],
    theta: float,
    expansion: ExpansionSet,
    context: Optional[WeightedContext] = None,
) -> Decision:
    """Branch on the threshold. No report (empty history) bypasses the check.

    The boundary is inclusive: s_align equal to theta confirms alignment.
    """
    if not -1.0 <= theta <= 1.0:
        raise ValueError(f"theta must be in [-1, 1], got {theta!r}")
    if report is None:
        return Decision(branch=BYPASS, theta=theta)
    if context is None:
        raise ValueError("a report requires the context it was scored against")

    h_j_turn = next(
        entry.turn for entry in context.entries if entry.turn.index == report.h_j_index
    )
    if report.s_align >= theta:
        return Decision(branch=ALIGNED, theta=theta, injected_turn=h_j_turn)
    return Decision(
        branch=MISALIGNED,
        theta=theta,
        clarification=build_clarification(expansion.literal, h_j_turn),
    )
