"""Session orchestration: the full receive -> expand -> weigh -> score -> branch flow.

One session = one serialized pipeline. A message either comes back as a
generated reply (aligned or first-turn bypass, with the most similar round
injected as extra context when aligned) or as a clarification payload with
generation suspended until the user chooses a/b/c.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import httpx

from .alignment import (
    ALIGNED,
    BYPASS,
    MISALIGNED,
    AlignmentReport,
    Decision,
    alignment_score,
    decide,
)
from .clarification import (
    AWAIT_NEW,
    PROCEED_CONTINUATION,
    PROCEED_NEW,
    ClarificationPrompt,
    NoPendingClarification,
    resolve_clarification,
)
from .config import SessionConfig
from .embedding import CachingEmbedder, Embedder, ProviderUnavailable, ReferenceEmbedder
from .expansion import (
    ExpanderBackend,
    ExpansionSet,
    GenerativeExpander,
    TemplateExpander,
    expand,
)
from .history import DialogHistory, SessionLog, Turn
from .upstream import (
    ChatGenerator,
    EchoGenerator,
    RemoteEmbedder,
    UpstreamClient,
    UpstreamFailure,
    chat_model_from_env,
    embed_model_from_env,
    expander_model_from_env,
    offline_from_env,
)
from .weighting import WeightedContext, build_weighted_context

INJECTION_TEMPLATE = (
    "Relevant earlier context: user asked '{user}' and you answered '{assistant}'."
)

ACCEPTED_SHIFT = "accepted-shift"
ALIGNED_BY_USER = "aligned-by-user"
SUPERSEDED = "superseded"
AWAITING = "awaiting"


class SessionNotFound(KeyError):
    pass


class ClarificationPending(RuntimeError):
    """A clarification awaits resolution; new messages are refused until then."""


@dataclass
class ResponseMeta:
    branch: str
    embedder_id: str
    degraded: bool
    s_align: Optional[float] = None
    best_variant: Optional[str] = None
    h_j_index: Optional[int] = None

    def to_wire(self) -> dict:
        wire = {
            "branch": self.branch,
            "embedder_id": self.embedder_id,
            "degraded": self.degraded,
        }
        if self.s_align is not None:
            wire["s_align"] = self.s_align
        if self.best_variant is not None:
            wire["best_variant"] = self.best_variant
        if self.h_j_index is not None:
            wire["h_j_index"] = self.h_j_index
        return wire


@dataclass
class GatewayResponse:
    kind: str  # reply | clarification | ack_awaiting
    meta: ResponseMeta
    text: Optional[str] = None
    clarification: Optional[ClarificationPrompt] = None

    def to_wire(self) -> dict:
        wire: dict = {"kind": self.kind}
        if self.text is not None:
            wire["text"] = self.text
        if self.clarification is not None:
            wire["clarification"] = {
                "repeat": self.clarification.repeat_text,
                "alert": self.clarification.alert_text,
                "empower": self.clarification.empower_text,
                "choices": [
                    {"id": c.id, "label": c.label} for c in self.clarification.choices
                ],
            }
        wire["meta"] = self.meta.to_wire()
        return wire


@dataclass
class PendingClarification:
    prompt: ClarificationPrompt
    turn_index: int
    h_j_turn: Turn


@dataclass
class Session:
    id: str
    config: SessionConfig
    history: DialogHistory
    embedder: CachingEmbedder
    expander: ExpanderBackend
    generator: object  # anything with .generate(messages) -> str
    log: Optional[SessionLog] = None
    pending: Optional[PendingClarification] = None
    degraded: bool = False
    turn_meta: dict[int, dict] = field(default_factory=dict)
    lock: threading.RLock = field(default_factory=threading.RLock)


def compose_generation_prompt(
    instruction: str,
    rounds: list[Turn],
    inject_turn: Optional[Turn] = None,
) -> list[dict]:
    """Message list for the upstream generator.

    Recent rounds as alternating roles, then (when injecting) a system preamble
    quoting the most similar round verbatim, then the instruction as the final
    user message. Injection is additional context; the normal window remains.
    """
    messages: list[dict] = []
    for turn in rounds:
        messages.append({"role": "user", "content": turn.user_text})
        if turn.assistant_text is not None:
            messages.append({"role": "assistant", "content": turn.assistant_text})
    if inject_turn is not None:
        messages.append(
            {
                "role": "system",
                "content": INJECTION_TEMPLATE.format(
                    user=inject_turn.user_text,
                    assistant=inject_turn.assistant_text or "",
                ),
            }
        )
    messages.append({"role": "user", "content": instruction})
    return messages


class GatewayService:
    """Owns sessions, backends, and the per-session pipeline execution."""

    def __init__(
        self,
        defaults: Optional[SessionConfig] = None,
        offline: Optional[bool] = None,
        log_dir: Optional[str] = None,
        upstream: Optional[UpstreamClient] = None,
        chat_model: Optional[str] = None,
        embed_model: Optional[str] = None,
        expander_model: Optional[str] = None,
        clock=time.time,
    ):
        if offline is None:
            offline = offline_from_env()
        self.offline = offline
        base = defaults or SessionConfig()
        self.defaults = base.merged({"offline_mode": offline})
        self.log_dir = Path(log_dir) if log_dir else None
        self.clock = clock
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

        if offline:
            self.upstream = None
            self.chat_model = ""
            self.embed_model = ""
            self.expander_model = ""
        else:
            self.upstream = upstream or UpstreamClient.from_env()
            self.chat_model = chat_model or chat_model_from_env()
            self.embed_model = embed_model or embed_model_from_env()
            self.expander_model = expander_model or expander_model_from_env() or self.chat_model

    # --- session registry -------------------------------------------------

    def create_session(
        self, config_overrides: Optional[dict] = None, session_id: Optional[str] = None
    ) -> str:
        config = self.defaults.merged(config_overrides or {})
        session_id = session_id or uuid.uuid4().hex
        session = Session(
            id=session_id,
            config=config,
            history=DialogHistory(session_id=session_id),
            embedder=self._make_embedder(),
            expander=self._make_expander(),
            generator=self._make_generator(),
            log=SessionLog(self.log_dir / f"{session_id}.jsonl") if self.log_dir else None,
        )
        with self._registry_lock:
            self._sessions[session_id] = session
        return session_id

    def _make_embedder(self) -> CachingEmbedder:
        if self.offline:
            return CachingEmbedder(ReferenceEmbedder())
        return CachingEmbedder(RemoteEmbedder(self.upstream, self.embed_model))

    def _make_expander(self) -> ExpanderBackend:
        if self.offline:
            return TemplateExpander()
        client, model = self.upstream, self.expander_model
        return GenerativeExpander(lambda messages: client.complete(messages, model), model)

    def _make_generator(self):
        if self.offline:
            return EchoGenerator()
        return ChatGenerator(self.upstream, self.chat_model)

    def session(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    # --- pipeline ----------------------------------------------------------

    def handle_message(
        self, session_id: str, user_text: str, timestamp: Optional[float] = None
    ) -> GatewayResponse:
        session = self.session(session_id)
        with session.lock:
            if session.pending is not None:
                raise ClarificationPending(
                    "a clarification is pending; resolve it via the clarification route"
                )
            ts = self.clock() if timestamp is None else float(timestamp)
            turn = session.history.append_turn(user_text, ts)
            if session.log:
                session.log.record_turn(turn)
            return self._run_pipeline(session, turn)

    def _run_pipeline(self, session: Session, turn: Turn) -> GatewayResponse:
        config = session.config
        expansion = expand(turn.user_text, turn.timestamp, session.expander)
        rounds = session.history.recent_rounds(config.k, before=turn.index)

        if not rounds:
            report: Optional[AlignmentReport] = None
            context: Optional[WeightedContext] = None
        else:
            context = build_weighted_context(
                rounds,
                now=turn.timestamp,
                tau=config.tau_seconds,
                k_requested=config.k,
                form=config.weight_form,
            )
            report = self._score(session, expansion, context)
        decision = decide(report, config.theta, expansion, context)

        meta = self._meta(session, decision.branch, report)
        self._record_turn_meta(session, turn, meta)

        if decision.branch == MISALIGNED:
            assert decision.clarification is not None
            session.pending = PendingClarification(
                prompt=decision.clarification,
                turn_index=turn.index,
                h_j_turn=self._turn_at(session, decision.clarification.h_j_index),
            )
            if session.log:
                session.log.record_clarification(
                    turn.index,
                    turn.timestamp,
                    "issued",
                    h_j_index=decision.clarification.h_j_index,
                )
            return GatewayResponse(kind="clarification", clarification=decision.clarification, meta=meta)

        reply = self._generate(session, turn, rounds, decision.injected_turn)
        return GatewayResponse(kind="reply", text=reply, meta=meta)

    def _score(
        self, session: Session, expansion: ExpansionSet, context: WeightedContext
    ) -> AlignmentReport:
        try:
            return alignment_score(
                expansion, context, session.embedder, session.config.history_embed
            )
        except ProviderUnavailable:
            # remote embeddings are down: degrade to the reference embedder for
            # the rest of the session so history and instruction vectors match
            session.embedder = CachingEmbedder(ReferenceEmbedder())
            session.degraded = True
            return alignment_score(
                expansion, context, session.embedder, session.config.history_embed
            )

    def _generate(
        self,
        session: Session,
        turn: Turn,
        rounds: list[Turn],
        inject_turn: Optional[Turn],
    ) -> str:
        messages = compose_generation_prompt(turn.user_text, rounds, inject_turn)
        try:
            reply = session.generator.generate(messages)
        except UpstreamFailure:
            # the instruction stays in history with the assistant text absent
            session.turn_meta.setdefault(turn.index, {})["error"] = "upstream_failure"
            raise
        turn.assistant_text = reply
        if session.log:
            session.log.record_completion(turn, at=self.clock())
        return reply

    def _meta(
        self, session: Session, branch: str, report: Optional[AlignmentReport]
    ) -> ResponseMeta:
        return ResponseMeta(
            branch=branch,
            embedder_id=session.embedder.embedder_id,
            degraded=session.degraded,
            s_align=report.s_align if report else None,
            best_variant=report.best_variant if report else None,
            h_j_index=report.h_j_index if report else None,
        )

    def _record_turn_meta(self, session: Session, turn: Turn, meta: ResponseMeta) -> None:
        config = session.config
        session.turn_meta[turn.index] = {
            **meta.to_wire(),
            "config": {
                "k": config.k,
                "tau_seconds": config.tau_seconds,
                "theta": config.theta,
                "weight_form": config.weight_form,
                "history_embed": config.history_embed,
            },
        }

    def _turn_at(self, session: Session, index: int) -> Turn:
        return session.history.turns[index]

    # --- clarification resolution ------------------------------------------

    def handle_clarification_reply(
        self,
        session_id: str,
        choice_id: str,
        new_text: Optional[str] = None,
        timestamp: Optional[float] = None,
    ) -> GatewayResponse:
        session = self.session(session_id)
        with session.lock:
            pending = session.pending
            if pending is None:
                raise NoPendingClarification("no clarification is pending for this session")
            action = resolve_clarification(
                pending.prompt, choice_id, new_text, h_j=pending.h_j_turn
            )
            session.pending = None
            suspended = session.history.turns[pending.turn_index]
            if session.log:
                session.log.record_clarification(
                    suspended.index, self.clock(), "resolved", choice=choice_id
                )

            if action.kind == PROCEED_NEW:
                return self._resume(session, suspended, inject_turn=None, branch=ACCEPTED_SHIFT)
            if action.kind == PROCEED_CONTINUATION:
                return self._resume(
                    session, suspended, inject_turn=action.inject_turn, branch=ALIGNED_BY_USER
                )

            # AWAIT_NEW: the suspended instruction stays in the log, marked superseded
            session.turn_meta.setdefault(suspended.index, {})["branch"] = SUPERSEDED
            if session.log:
                session.log.record_clarification(
                    suspended.index, self.clock(), "superseded"
                )
            if new_text is not None:
                return self.handle_message(session_id, new_text, timestamp)
            meta = ResponseMeta(
                branch=AWAITING,
                embedder_id=session.embedder.embedder_id,
                degraded=session.degraded,
            )
            return GatewayResponse(kind="ack_awaiting", meta=meta)

    def _resume(
        self, session: Session, suspended: Turn, inject_turn: Optional[Turn], branch: str
    ) -> GatewayResponse:
        rounds = session.history.recent_rounds(session.config.k, before=suspended.index)
        reply = self._generate(session, suspended, rounds, inject_turn)
        stored = session.turn_meta.get(suspended.index, {})
        stored["branch"] = branch
        meta = ResponseMeta(
            branch=branch,
            embedder_id=session.embedder.embedder_id,
            degraded=session.degraded,
            s_align=stored.get("s_align"),
            best_variant=stored.get("best_variant"),
            h_j_index=stored.get("h_j_index"),
        )
        return GatewayResponse(kind="reply", text=reply, meta=meta)

    def skip_pending_clarification(self, session_id: str, choice_id: str = "a") -> None:
        """Replay-only resolution: record the choice, skip generation.

        Scenario replays auto-resolve so the script can continue; the suspended
        instruction keeps no assistant text and the generator is not charged a
        call for the misaligned turn.
        """
        if choice_id not in ("a", "b"):
            raise ValueError(f"replay resolution must be 'a' or 'b', got {choice_id!r}")
        session = self.session(session_id)
        with session.lock:
            pending = session.pending
            if pending is None:
                raise NoPendingClarification("no clarification is pending for this session")
            resolve_clarification(pending.prompt, choice_id, None, h_j=pending.h_j_turn)
            session.pending = None
            suspended = session.history.turns[pending.turn_index]
            branch = ACCEPTED_SHIFT if choice_id == "a" else ALIGNED_BY_USER
            session.turn_meta.setdefault(suspended.index, {})["branch"] = branch
            if session.log:
                session.log.record_clarification(
                    suspended.index, self.clock(), "resolved", choice=choice_id, replay=True
                )

    # --- inspection and config ----------------------------------------------

    def history_of(self, session_id: str) -> list[dict]:
        session = self.session(session_id)
        with session.lock:
            return [
                {
                    "index": turn.index,
                    "user_text": turn.user_text,
                    "assistant_text": turn.assistant_text,
                    "timestamp": turn.timestamp,
                    "meta": session.turn_meta.get(turn.index, {}),
                }
                for turn in session.history.turns
            ]

    def config_of(self, session_id: str) -> dict:
        return self.session(session_id).config.to_dict()

    def update_config(self, session_id: str, updates: dict) -> dict:
        session = self.session(session_id)
        with session.lock:
            session.config = session.config.merged(updates)
            return session.config.to_dict()

    def health(self) -> dict:
        if self.offline:
            return {"status": "ok", "upstream_ok": True, "embedder_id": ReferenceEmbedder.embedder_id}
        upstream_ok = True
        try:
            httpx.get(f"{self.upstream.base_url}/models", timeout=2.0)
        except Exception:
            upstream_ok = False
        return {
            "status": "ok",
            "upstream_ok": upstream_ok,
            "embedder_id": f"remote:{self.embed_model}",
        }
