import json

import pytest

from cap.clarification import NoPendingClarification, UnknownChoice
from cap.config import SessionConfig
from cap.embedding import ProviderUnavailable
from cap.evaluate import make_shift_scenario
from cap.gateway import (
    ClarificationPending,
    GatewayService,
    SessionNotFound,
    compose_generation_prompt,
)
from cap.history import EmptyText, Turn, load_log
from cap.upstream import FailingGenerator, UpstreamFailure
from conftest import recompute_s_align

# consecutive turns share most tokens; the topic switch shares none and comes
# after a long pause, so decay piles the weight onto the new thread afterwards
ON_TOPIC = [
    ("how do I bake sourdough bread at home", 0.0),
    ("how do I proof sourdough bread dough at home", 60.0),
    ("how do I shape sourdough bread dough at home", 120.0),
]
OFF_TOPIC = ("recommend a telescope for deep sky astrophotography", 3780.0)


def offline_service(**kwargs):
    return GatewayService(offline=True, **kwargs)


def play(service, session_id, turns):
    return [service.handle_message(session_id, text, ts) for text, ts in turns]


def test_first_message_bypasses_alignment():
    service = offline_service()
    sid = service.create_session()
    response = service.handle_message(sid, "hello world", 1.0)
    assert response.kind == "reply"
    assert response.meta.branch == "bypass"
    assert response.meta.s_align is None
    assert "s_align" not in response.to_wire()["meta"]


def test_on_topic_dialog_stays_aligned():
    service = offline_service()
    sid = service.create_session()
    responses = play(service, sid, ON_TOPIC)
    assert [r.meta.branch for r in responses] == ["bypass", "aligned", "aligned"]
    # oracle check: recomputed scores match the reported ones and clear theta
    history = service.history_of(sid)
    config = service.config_of(sid)
    for i in (1, 2):
        expected = recompute_s_align(history, i, config)
        assert responses[i].meta.s_align == pytest.approx(expected, abs=1e-9)
        assert expected >= config["theta"]


def test_disjoint_vocabulary_triggers_clarification():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    generator_calls = service.session(sid).generator.calls
    response = service.handle_message(sid, *OFF_TOPIC)
    assert response.kind == "clarification"
    assert response.meta.branch == "misaligned"
    assert response.clarification.pending_instruction == OFF_TOPIC[0]
    # the misaligned branch must never reach the generator
    assert service.session(sid).generator.calls == generator_calls


def test_message_while_pending_is_rejected():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    with pytest.raises(ClarificationPending):
        service.handle_message(sid, "another message", 3840.0)


def test_choice_b_injects_flagged_round():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    clar = service.handle_message(sid, *OFF_TOPIC)
    h_j = service.session(sid).history.turns[clar.meta.h_j_index]
    response = service.handle_clarification_reply(sid, "b")
    assert response.kind == "reply"
    assert response.meta.branch == "aligned-by-user"
    # injection is visible in the echo reply, quoting the round verbatim
    assert f"user asked '{h_j.user_text}'" in response.text
    assert OFF_TOPIC[0] in response.text


def test_choice_a_accepts_shift_and_next_turn_aligns_to_new_thread():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    response = service.handle_clarification_reply(sid, "a")
    assert response.kind == "reply"
    assert response.meta.branch == "accepted-shift"
    assert response.text == OFF_TOPIC[0]  # no injection preamble
    follow_up = service.handle_message(
        sid, "recommend a telescope mount for deep sky astrophotography", 3840.0
    )
    assert follow_up.meta.branch == "aligned"


def test_choice_c_without_text_acknowledges_waiting():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    response = service.handle_clarification_reply(sid, "c")
    assert response.kind == "ack_awaiting"
    assert response.text is None
    # the suspended turn stays in the log, marked superseded, with no reply
    history = service.history_of(sid)
    assert history[3]["assistant_text"] is None
    assert history[3]["meta"]["branch"] == "superseded"
    # the session accepts new messages again; the superseded turn is still
    # context, so a clearer version of it aligns
    after = service.handle_message(
        sid, "recommend a beginner telescope for deep sky astrophotography", 3840.0
    )
    assert after.kind == "reply"
    assert after.meta.branch == "aligned"


def test_choice_c_with_text_reenters_pipeline():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    response = service.handle_clarification_reply(
        sid,
        "c",
        new_text="recommend a telescope tripod for deep sky astrophotography",
        timestamp=3840.0,
    )
    assert response.kind == "reply"
    assert response.meta.branch == "aligned"
    assert response.meta.s_align is not None


def test_double_resolution_is_rejected():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    service.handle_clarification_reply(sid, "a")
    with pytest.raises(NoPendingClarification):
        service.handle_clarification_reply(sid, "a")


def test_unknown_choice_keeps_clarification_pending():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    with pytest.raises(UnknownChoice):
        service.handle_clarification_reply(sid, "z")
    assert service.session(sid).pending is not None
    response = service.handle_clarification_reply(sid, "b")
    assert response.kind == "reply"


def test_unknown_session():
    with pytest.raises(SessionNotFound):
        offline_service().handle_message("nope", "hi", 0.0)


def test_blank_message_rejected():
    service = offline_service()
    sid = service.create_session()
    with pytest.raises(EmptyText):
        service.handle_message(sid, "   ", 0.0)


def test_compose_prompt_bypass_has_no_preamble():
    assert compose_generation_prompt("hi", []) == [{"role": "user", "content": "hi"}]


def test_compose_prompt_injection_quotes_round_verbatim():
    rounds = [
        Turn(index=0, user_text="first ask", timestamp=1.0, assistant_text="first answer"),
        Turn(index=1, user_text="second ask", timestamp=2.0, assistant_text="second answer"),
    ]
    messages = compose_generation_prompt("now this", rounds, inject_turn=rounds[0])
    assert messages[:4] == [
        {"role": "user", "content": "first ask"},
        {"role": "assistant", "content": "first answer"},
        {"role": "user", "content": "second ask"},
        {"role": "assistant", "content": "second answer"},
    ]
    assert messages[4] == {
        "role": "system",
        "content": "Relevant earlier context: user asked 'first ask' and you answered 'first answer'.",
    }
    assert messages[5] == {"role": "user", "content": "now this"}


def test_compose_prompt_skips_absent_assistant():
    rounds = [Turn(index=0, user_text="pending ask", timestamp=1.0)]
    messages = compose_generation_prompt("next", rounds)
    assert messages == [
        {"role": "user", "content": "pending ask"},
        {"role": "user", "content": "next"},
    ]


def test_offline_replies_are_deterministic():
    def run():
        service = offline_service()
        sid = service.create_session()
        wires = [r.to_wire() for r in play(service, sid, ON_TOPIC)]
        wires.append(service.handle_message(sid, *OFF_TOPIC).to_wire())
        wires.append(service.handle_clarification_reply(sid, "b").to_wire())
        return json.dumps(wires, sort_keys=True)

    assert run() == run()


def test_meta_s_align_recomputable_for_all_turns():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC + [("how to shape the sourdough loaf", 200.0)])
    history = service.history_of(sid)
    for row in history:
        meta = row["meta"]
        if "s_align" not in meta:
            continue
        expected = recompute_s_align(history, row["index"], meta["config"])
        assert meta["s_align"] == pytest.approx(expected, abs=1e-9)


def test_config_hot_update_changes_next_decision():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.update_config(sid, {"theta": 1.0})
    response = service.handle_message(sid, "how do I bake the sourdough crust", 500.0)
    assert response.kind == "clarification"  # nothing scores >= 1.0 here


def test_invalid_config_update_rejected_atomically():
    service = offline_service()
    sid = service.create_session()
    before = service.config_of(sid)
    with pytest.raises(ValueError):
        service.update_config(sid, {"theta": 0.2, "k": -3})
    assert service.config_of(sid) == before


def test_session_config_overrides_at_creation():
    service = offline_service()
    sid = service.create_session({"k": 2, "theta": 0.9})
    config = service.config_of(sid)
    assert config["k"] == 2 and config["theta"] == 0.9


def test_upstream_failure_keeps_instruction_marked():
    service = offline_service()
    sid = service.create_session()
    service.session(sid).generator = FailingGenerator()
    with pytest.raises(UpstreamFailure):
        service.handle_message(sid, "hello there", 0.0)
    history = service.history_of(sid)
    assert history[0]["assistant_text"] is None
    assert history[0]["meta"]["error"] == "upstream_failure"


class StubUpstream:
    """Looks like an UpstreamClient; embeddings are down, chat answers."""

    base_url = "http://stub"

    def complete(self, messages, model):
        return "stub reply"

    def embed_batch(self, texts, model):
        raise ProviderUnavailable("embeddings down")


def test_embedding_outage_degrades_to_reference_embedder():
    service = GatewayService(offline=False, upstream=StubUpstream())
    sid = service.create_session()
    first = service.handle_message(sid, "how do I bake sourdough bread", 0.0)
    assert first.meta.degraded is False  # bypass never embeds
    second = service.handle_message(sid, "how long should the sourdough proof", 60.0)
    assert second.meta.degraded is True
    assert second.meta.embedder_id == "fnv1a-bag-256"
    assert second.kind == "reply"


def test_session_log_replays_to_same_history(tmp_path):
    service = offline_service(log_dir=str(tmp_path))
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    service.handle_clarification_reply(sid, "b")
    log_path = tmp_path / f"{sid}.jsonl"
    assert log_path.exists()
    restored = load_log(log_path, session_id=sid)
    assert restored == service.session(sid).history
    # clarification events are in the log even though replay skips them
    events = [json.loads(line) for line in log_path.read_text().splitlines()]
    kinds = [e["type"] for e in events]
    assert "clarification" in kinds


def test_skip_pending_clarification_for_replay():
    service = offline_service()
    sid = service.create_session()
    play(service, sid, ON_TOPIC)
    service.handle_message(sid, *OFF_TOPIC)
    calls_before = service.session(sid).generator.calls
    service.skip_pending_clarification(sid, "a")
    assert service.session(sid).generator.calls == calls_before
    assert service.session(sid).pending is None
    with pytest.raises(NoPendingClarification):
        service.skip_pending_clarification(sid, "a")


def test_shift_scenario_pattern_through_gateway():
    scenario = make_shift_scenario()
    service = offline_service()
    sid = service.create_session()
    branches = []
    for turn in scenario.turns:
        response = service.handle_message(sid, turn.user_text, turn.timestamp)
        branches.append(response.meta.branch)
        if response.kind == "clarification":
            service.skip_pending_clarification(sid, "a")
    assert branches == ["bypass", "aligned", "aligned", "misaligned", "aligned", "aligned"]
