"""Context-alignment gateway: pre-process chat instructions before generation.

Each instruction is expanded into a semantic span, scored against a
time-weighted window of the dialog history, and either forwarded (with the
most similar earlier round injected as context) or suspended behind a
structured clarification exchange.
"""

from .alignment import AlignmentReport, Decision, alignment_score, decide
from .clarification import (
    ClarificationPrompt,
    PipelineAction,
    build_clarification,
    resolve_clarification,
)
from .config import SessionConfig
from .embedding import CachingEmbedder, EmbeddingVector, ReferenceEmbedder, cosine
from .expansion import ExpansionSet, TemplateExpander, expand, render_meta_prompt
from .gateway import GatewayResponse, GatewayService, compose_generation_prompt
from .history import DialogHistory, Turn, load_log, save_log
from .service import create_app
from .weighting import WeightedContext, build_weighted_context, raw_weight

__all__ = [
    "AlignmentReport",
    "CachingEmbedder",
    "ClarificationPrompt",
    "Decision",
    "DialogHistory",
    "EmbeddingVector",
    "ExpansionSet",
    "GatewayResponse",
    "GatewayService",
    "PipelineAction",
    "ReferenceEmbedder",
    "SessionConfig",
    "TemplateExpander",
    "Turn",
    "WeightedContext",
    "alignment_score",
    "build_clarification",
    "build_weighted_context",
    "compose_generation_prompt",
    "cosine",
    "create_app",
    "decide",
    "expand",
    "load_log",
    "raw_weight",
    "render_meta_prompt",
    "resolve_clarification",
    "save_log",
]

__version__ = "0.1.0"
