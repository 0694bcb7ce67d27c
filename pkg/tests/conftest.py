"""Shared fixtures: the demo scene, scripted provider, and fixture paths."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from sgedit.parser import parse_scene
from sgedit.scripted import ScriptedProvider
from sgedit.segmenter import MockSegmenter
from sgedit.toyimages import demo_scene

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def bundle():
    return demo_scene()


@pytest.fixture()
def scripted(bundle):
    return ScriptedProvider({bundle.image_id: bundle.script})


@pytest.fixture()
def segmenter(bundle):
    return MockSegmenter(bundle.segmenter_seeds)


@pytest.fixture(scope="session")
def parsed(bundle):
    """Parsed demo scene (fresh provider; all result objects are frozen)."""
    provider = ScriptedProvider({bundle.image_id: bundle.script})
    return parse_scene(bundle.handle, provider, MockSegmenter(bundle.segmenter_seeds))


@pytest.fixture(scope="session")
def golden_parse():
    return json.loads((FIXTURES / "golden_parse.json").read_text())
