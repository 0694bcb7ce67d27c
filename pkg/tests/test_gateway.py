"""Gateway: templating, fingerprints, record/replay, reply parsing."""

from __future__ import annotations

import hashlib
import json

import pytest

from sgedit.gateway import (
    Attachment,
    ChatTurn,
    InsertItem,
    InstanceItem,
    LiveProvider,
    MalformedReply,
    MemoryRecordingProvider,
    PlanReply,
    PromptTemplate,
    ProviderUnavailable,
    RecordingProvider,
    ReplayMiss,
    ReplayProvider,
    UnboundPlaceholder,
    extract_block,
    fingerprint,
    parse_tagged_reply,
    render_template,
    turn_from_wire,
    turn_to_wire,
)


class Parrot:
    """Echo provider that counts how often it is actually consulted."""

    def __init__(self, reply="ok"):
        self.reply = reply
        self.calls = 0

    def complete(self, turns):
        self.calls += 1
        return self.reply


# --- turns and fingerprints ------------------------------------------------------


def test_chat_turn_validation():
    with pytest.raises(ValueError):
        ChatTurn("narrator", "hi")
    with pytest.raises(ValueError):
        ChatTurn("user", "")
    ChatTurn("user", "", (Attachment("img", "00"),))  # attachment-only is fine


def test_turn_wire_round_trip():
    turn = ChatTurn("user", "look", (Attachment("img-1", "ab" * 32),))
    assert turn_from_wire(turn_to_wire(turn)) == turn
    assert "attachments" not in turn_to_wire(ChatTurn("user", "plain"))


def test_fingerprint_matches_independent_sha256():
    turns = [ChatTurn("system", "s"), ChatTurn("user", "u", (Attachment("i", "aa"),))]
    canonical = json.dumps(
        [
            {"content": "s", "role": "system"},
            {"attachments": [{"ref": "i", "sha256": "aa"}], "content": "u", "role": "user"},
        ],
        sort_keys=True,
        separators=(",", ":"),
    )
    assert fingerprint(turns) == hashlib.sha256(canonical.encode()).hexdigest()


def test_fingerprint_tracks_attachment_content_hash():
    base = [ChatTurn("user", "u", (Attachment("img", "aa"),))]
    same = [ChatTurn("user", "u", (Attachment("img", "aa"),))]
    other = [ChatTurn("user", "u", (Attachment("img", "bb"),))]
    assert fingerprint(base) == fingerprint(same)
    assert fingerprint(base) != fingerprint(other)


# --- templates ----------------------------------------------------------------------


def test_render_template_layout():
    tpl = PromptTemplate(
        name="t",
        system="be terse",
        body="count the $thing.",
        in_context_examples=(("how many?", "three"),),
    )
    att = (Attachment("img", "aa"),)
    turns = render_template(tpl, {"thing": "cats"}, attachments=att)
    assert [t.role for t in turns] == ["system", "user", "assistant", "user"]
    assert turns[-1].content == "count the cats."
    assert turns[-1].attachments == att
    assert turns[1].attachments == ()  # examples never carry the image


def test_render_template_unbound_placeholder():
    tpl = PromptTemplate(name="t", system="s", body="needs $thing")
    with pytest.raises(UnboundPlaceholder):
        render_template(tpl, {})


# --- record / replay ------------------------------------------------------------------


def test_record_then_replay_round_trip(tmp_path):
    path = tmp_path / "t.jsonl"
    inner = Parrot("caption: \"hi\"")
    recorder = RecordingProvider(inner, path)
    turns = [ChatTurn("user", "describe")]
    assert recorder.complete(turns) == 'caption: "hi"'

    replay = ReplayProvider(path)
    assert replay.complete(turns) == 'caption: "hi"'
    assert inner.calls == 1  # replay never touches a provider

    with pytest.raises(ReplayMiss):
        replay.complete([ChatTurn("user", "something new")])


def test_replay_missing_transcript_raises():
    with pytest.raises(ProviderUnavailable):
        ReplayProvider("/nonexistent/transcript.jsonl")


def test_transcript_entry_shape(tmp_path):
    path = tmp_path / "t.jsonl"
    RecordingProvider(Parrot(), path).complete([ChatTurn("user", "q")])
    entry = json.loads(path.read_text())
    assert set(entry) == {"fingerprint", "request", "reply"}
    assert entry["request"] == [{"role": "user", "content": "q"}]


def test_memory_recorder_dump_matches_file_recorder(tmp_path):
    path = tmp_path / "t.jsonl"
    turns_a = [ChatTurn("user", "one")]
    turns_b = [ChatTurn("system", "s"), ChatTurn("user", "two")]
    file_rec = RecordingProvider(Parrot("r"), path)
    mem_rec = MemoryRecordingProvider(Parrot("r"))
    for t in (turns_a, turns_b):
        file_rec.complete(t)
        mem_rec.complete(t)
    assert mem_rec.dump() == path.read_text()


def test_live_provider_payload_and_failure(monkeypatch):
    seen = {}

    class FakeResponse:
        def raise_for_status(self):
            pass

        def json(self):
            return {"choices": [{"message": {"content": "pong"}}]}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, payload=json, headers=headers)
        return FakeResponse()

    monkeypatch.setattr("requests.post", fake_post)
    provider = LiveProvider("http://llm.local/v1/", model="m1", api_key="k")
    out = provider.complete([ChatTurn("user", "ping")])
    assert out == "pong"
    assert seen["url"] == "http://llm.local/v1/chat/completions"
    assert seen["payload"]["model"] == "m1"
    assert seen["payload"]["messages"] == [{"role": "user", "content": "ping"}]
    assert seen["headers"]["Authorization"] == "Bearer k"

    def exploding_post(*a, **k):
        raise OSError("connection refused")

    monkeypatch.setattr("requests.post", exploding_post)
    with pytest.raises(ProviderUnavailable):
        provider.complete([ChatTurn("user", "ping")])


# --- structured reply parsing -----------------------------------------------------------


def test_extract_block_tolerates_prose_and_fences():
    reply = "Sure! Here you go:\n```\nobjects: [\"cat\", \"mat\"]\n```\nanything else?"
    assert extract_block(reply, "objects") == ["cat", "mat"]


def test_extract_block_requires_word_boundary():
    assert extract_block("floorplan: [1]", "plan") is None
    assert extract_block("the plan: {\"remove\": []}", "plan") == {"remove": []}


def test_extract_block_missing_vs_malformed():
    assert extract_block("no block here", "plan") is None
    with pytest.raises(MalformedReply):
        extract_block("plan: {not json", "plan")


def test_parse_object_list():
    items = parse_tagged_reply(
        'objects: ["cat", {"label": "sky", "background": true}]', "ObjectList"
    )
    assert items == [InstanceItem("cat"), InstanceItem("sky", background=True)]
    with pytest.raises(MalformedReply):
        parse_tagged_reply("objects: [42]", "ObjectList")
    with pytest.raises(MalformedReply):
        parse_tagged_reply('objects: {"cat": 1}', "ObjectList")


def test_parse_relation_list():
    triples = parse_tagged_reply('relations: [["cat", "on", "mat"]]', "RelationList")
    assert triples == [("cat", "on", "mat")]
    with pytest.raises(MalformedReply):
        parse_tagged_reply('relations: [["cat", "on"]]', "RelationList")
    with pytest.raises(MalformedReply):
        parse_tagged_reply('relations: [["cat", "", "mat"]]', "RelationList")


def test_parse_caption_block_and_fallback():
    assert parse_tagged_reply('caption: "A cat."', "Caption") == "A cat."
    assert parse_tagged_reply("`Just a cat.`", "Caption") == "Just a cat."
    with pytest.raises(MalformedReply):
        parse_tagged_reply("caption: \"\"", "Caption")
    with pytest.raises(MalformedReply):
        parse_tagged_reply("caption: [1]", "Caption")


def test_parse_bbox_reply():
    box = parse_tagged_reply("bbox: [0.1, 0.2, 0.5, 0.9]", "BBoxReply")
    assert box.as_list() == [0.1, 0.2, 0.5, 0.9]
    for bad in ("bbox: [0.1, 0.2, 0.5]", "bbox: [0.1, 0.2, 0.5, 1.5]", 'bbox: ["a",0,1,1]'):
        with pytest.raises(MalformedReply):
            parse_tagged_reply(bad, "BBoxReply")


def test_parse_checklist_reply():
    assert parse_tagged_reply("scores: [3, 2.5, 0]", "ChecklistReply") == [3.0, 2.5, 0.0]
    with pytest.raises(MalformedReply):
        parse_tagged_reply('scores: ["high"]', "ChecklistReply")


def test_parse_plan_reply_full_and_degraded_bbox():
    reply = 'plan: {"remove": ["cat"], "insert": [{"node": "dog", "bbox": [0, 0, 0.5, 0.5]}]}'
    plan = parse_tagged_reply(reply, "EditPlanReply")
    assert plan.remove == ("cat",)
    assert plan.insert[0].node == "dog"
    assert plan.insert[0].bbox.as_list() == [0.0, 0.0, 0.5, 0.5]

    degraded = parse_tagged_reply(
        'plan: {"insert": [{"node": "dog", "bbox": [9, 9, 9, 9]}]}', "EditPlanReply"
    )
    assert degraded == PlanReply(insert=(InsertItem("dog", None),))

    with pytest.raises(MalformedReply):
        parse_tagged_reply('plan: {"remove": [1]}', "EditPlanReply")
    with pytest.raises(MalformedReply):
        parse_tagged_reply('plan: {"insert": [{"bbox": [0, 0, 1, 1]}]}', "EditPlanReply")
    with pytest.raises(MalformedReply):
        parse_tagged_reply("plan: []", "EditPlanReply")


def test_parse_unknown_schema():
    with pytest.raises(ValueError):
        parse_tagged_reply("x: 1", "Sonnet")
