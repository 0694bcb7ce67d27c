"""Prompt templates: rendering, schema registry, and dispatch phrases."""

from __future__ import annotations

import json

import pytest

from sgedit.gateway import parse_tagged_reply, render_template
from sgedit.prompts import ALL_TEMPLATES, TEMPLATE_SCHEMAS

SAMPLE_BINDINGS = {
    "instances": '["cat"]',
    "label": "cat",
    "graph": "{}",
    "edit": "{}",
    "object": "{}",
    "objects": "[]",
    "metric": "element-composition",
    "items": "[]",
}


def test_every_template_is_registered_and_renders():
    assert {t.name for t in ALL_TEMPLATES} == set(TEMPLATE_SCHEMAS)
    for tpl in ALL_TEMPLATES:
        turns = render_template(tpl, SAMPLE_BINDINGS)
        assert turns[0].role == "system" and turns[0].content
        assert turns[-1].role == "user"
        assert "$" not in turns[-1].content


def test_dispatch_phrases_are_distinct():
    heads = [t.body.split("\n")[0][:40] for t in ALL_TEMPLATES]
    assert len(set(heads)) == len(heads)


def test_in_context_examples_parse_under_their_schema():
    for tpl in ALL_TEMPLATES:
        schema = TEMPLATE_SCHEMAS[tpl.name]
        for _, example_reply in tpl.in_context_examples:
            parse_tagged_reply(example_reply, schema)  # must not raise


def test_json_context_blocks_stay_valid_after_binding():
    # a binding containing quotes must survive Template substitution verbatim
    from sgedit.prompts import PLAN_EDIT

    graph = json.dumps({"nodes": [{"id": "a", "label": 'say "hi"'}]})
    edit = json.dumps({"actions": []})
    turns = render_template(PLAN_EDIT, {"graph": graph, "edit": edit})
    body = turns[-1].content
    assert graph in body and edit in body


def test_missing_binding_is_an_error():
    from sgedit.gateway import UnboundPlaceholder
    from sgedit.prompts import LIST_RELATIONS

    with pytest.raises(UnboundPlaceholder):
        render_template(LIST_RELATIONS, {})
