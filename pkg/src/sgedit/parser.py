"""Conversation-driven scene parsing: image -> annotated scene graph.

The protocol is a fixed sequence of chat requests — describe the scene,
list instances, list relations, caption each node — plus one segmenter
query per node for grounding. Every reply is structured (tagged blocks), so
the whole parse is deterministic under a replay transcript or the scripted
reference provider.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .gateway import (
    Attachment,
    ProviderHandle,
    complete_chat,
    parse_tagged_reply,
    render_template,
)
from .graph import ObjectNode, RelationEdge, SceneGraph, assign_node_id
from .prompts import CAPTION_NODE, DESCRIBE_IMAGE, LIST_INSTANCES, LIST_RELATIONS
from .segmenter import SegmenterHandle, select_candidate


@dataclass(frozen=True)
class ImageHandle:
    """What the parser needs to know about an image: identity and size."""

    id: str
    sha256: str
    width: int
    height: int

    def attachment(self) -> Attachment:
        return Attachment(self.id, self.sha256)


@dataclass(frozen=True)
class ParseNote:
    """Non-fatal parsing incident, e.g. a dropped relation triple."""

    kind: str
    detail: str


@dataclass(frozen=True)
class ParseResult:
    graph: SceneGraph
    scene_caption: str
    notes: tuple[ParseNote, ...] = ()


def _ask(tpl, bindings: dict[str, str], image: ImageHandle, provider: ProviderHandle) -> str:
    turns = render_template(tpl, bindings, attachments=(image.attachment(),))
    return complete_chat(turns, provider)


def build_scene_graph(image: ImageHandle, provider: ProviderHandle) -> ParseResult:
    """Describe, list instances, list relations; nodes carry no masks yet."""
    notes: list[ParseNote] = []

    scene_caption = parse_tagged_reply(_ask(DESCRIBE_IMAGE, {}, image, provider), "Caption")

    instances = parse_tagged_reply(_ask(LIST_INSTANCES, {}, image, provider), "ObjectList")
    nodes: list[ObjectNode] = []
    by_label: dict[str, str] = {}
    taken: set[str] = set()
    for item in instances:
        node_id = assign_node_id(item.label, taken)
        taken.add(node_id)
        nodes.append(
            ObjectNode(
                id=node_id,
                label=item.label,
                background=item.background,
                ungrounded=True,
            )
        )
        by_label.setdefault(item.label, node_id)

    labels_json = json.dumps([n.label for n in nodes])
    triples = parse_tagged_reply(
        _ask(LIST_RELATIONS, {"instances": labels_json}, image, provider), "RelationList"
    )
    edges: list[RelationEdge] = []
    for s_label, predicate, o_label in triples:
        if s_label not in by_label or o_label not in by_label:
            missing = s_label if s_label not in by_label else o_label
            notes.append(
                ParseNote(
                    "UnresolvedRelation",
                    f"triple ({s_label!r}, {predicate!r}, {o_label!r}) names "
                    f"unlisted instance {missing!r}; dropped",
                )
            )
            continue
        edge = RelationEdge(by_label[s_label], predicate, by_label[o_label])
        if edge not in edges:
            edges.append(edge)

    graph = SceneGraph(image.width, image.height, tuple(nodes), tuple(edges))
    return ParseResult(graph, scene_caption, tuple(notes))


def caption_node(label: str, image: ImageHandle, provider: ProviderHandle) -> str:
    """One detailed per-object description (attire/attachments/pose)."""
    return parse_tagged_reply(_ask(CAPTION_NODE, {"label": label}, image, provider), "Caption")


def annotate_nodes(
    graph: SceneGraph,
    image: ImageHandle,
    segmenter: SegmenterHandle,
    provider: ProviderHandle,
) -> tuple[SceneGraph, tuple[ParseNote, ...]]:
    """Ground every node with the best segmenter candidate and caption it.

    Nodes the segmenter cannot ground stay in the graph flagged
    `ungrounded` (they can still be removed or replaced via box-only plans).
    """
    notes: list[ParseNote] = []
    annotated: list[ObjectNode] = []
    for node in graph.nodes:
        caption = caption_node(node.label, image, provider)
        best = select_candidate(segmenter.segment(image.id, node.label))
        if best is None:
            notes.append(ParseNote("Ungrounded", f"no segmenter candidate for {node.label!r}"))
            annotated.append(replace(node, caption=caption, ungrounded=True))
        else:
            annotated.append(
                replace(
                    node,
                    caption=caption,
                    mask=best.mask,
                    bbox=best.bbox,
                    ungrounded=False,
                )
            )
    return SceneGraph(graph.width, graph.height, tuple(annotated), graph.edges), tuple(notes)


def parse_scene(
    image: ImageHandle, provider: ProviderHandle, segmenter: SegmenterHandle
) -> ParseResult:
    """Full protocol: structure from the LLM, grounding from the segmenter."""
    built = build_scene_graph(image, provider)
    annotated, notes = annotate_nodes(built.graph, image, segmenter, provider)
    return ParseResult(annotated, built.scene_caption, built.notes + notes)
