"""Edit planning: graph delta -> remove-then-insert plan with prompts.

The controller shows the LLM the current graph (ids, labels, boxes) plus
the user's delta and receives back which nodes to remove, which to insert,
and where. Removal masks come from the parsed annotations; insertion boxes
come from the LLM with a deterministic geometric fallback when a box is
missing or degenerate. Prompts: each insertion gets a plain single-object
prompt for early sampling, and one combined generation prompt covers the
whole insertion set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .gateway import (
    MalformedReply,
    ProviderHandle,
    complete_chat,
    parse_tagged_reply,
    render_template,
)
from .graph import (
    AddNode,
    DeltaAction,
    GraphDelta,
    ModifyEdge,
    ReplaceNode,
    SceneGraph,
    UnknownId,
    apply_delta,
    delta_to_wire,
)
from .prompts import GENERATION_PROMPT_MULTI, GENERATION_PROMPT_SINGLE, PLAN_EDIT, PROPOSE_BBOX
from .regions import BoundingBox, RegionMask, mask_to_rle, rasterize_box

NON_OBJECT_PROMPT = "A photo with no objects or people, only the background."

DEFAULT_BOX = BoundingBox(0.375, 0.70, 0.625, 0.95)


class MissingMask(ValueError):
    """A removal target has neither a mask nor a bounding box."""


@dataclass(frozen=True)
class Insertion:
    node_id: str
    label: str
    token: str | None
    bbox: BoundingBox
    single_object_prompt: str


@dataclass(frozen=True)
class EditPlan:
    removals: tuple[tuple[str, RegionMask], ...]
    insertions: tuple[Insertion, ...]
    combined_prompt: str
    non_object_prompt: str
    source_graph: SceneGraph
    target_graph: SceneGraph

    def __post_init__(self):
        size = self.source_graph.image_size
        for node_id, mask in self.removals:
            if (mask.width, mask.height) != size:
                raise ValueError(f"removal mask for {node_id} is {mask.width}x{mask.height}")
        for ins in self.insertions:
            mention = ins.token if ins.token else ins.label
            if mention.lower() not in self.combined_prompt.lower():
                raise MalformedReply(
                    f"combined prompt does not mention {mention!r}", span=self.combined_prompt
                )


def non_object_prompt() -> str:
    """The fixed background-only prompt shared with the sampler."""
    return NON_OBJECT_PROMPT


def graph_overview(graph: SceneGraph) -> dict:
    """Boxes-and-labels view of the graph, compact enough for a prompt."""
    return {
        "image_size": [graph.width, graph.height],
        "nodes": [
            {
                "id": n.id,
                "label": n.label,
                "bbox": n.bbox.as_list() if n.bbox else None,
                "token": n.token,
            }
            for n in graph.nodes
        ],
        "edges": [{"s": e.s, "p": e.p, "o": e.o} for e in graph.edges],
    }


def _clip_or_default(x0: float, y0: float, x1: float, y1: float) -> BoundingBox:
    """Clip to the unit square; degenerate results fall back to DEFAULT_BOX."""
    clamp = lambda v: min(max(v, 0.0), 1.0)  # noqa: E731
    try:
        return BoundingBox(clamp(x0), clamp(y0), clamp(x1), clamp(y1))
    except ValueError:
        return DEFAULT_BOX


def _anchor_of(action: DeltaAction, graph: SceneGraph) -> tuple[str | None, BoundingBox | None]:
    """(predicate, anchor bbox) that should govern the insertion's placement."""
    if isinstance(action, AddNode):
        for e in action.edges:
            if e.s == action.node.id and graph.has_node(e.o):
                return e.p, graph.node(e.o).bbox
        return None, None
    if isinstance(action, ModifyEdge):
        target = graph.node(action.edge.o) if graph.has_node(action.edge.o) else None
        return action.predicate, target.bbox if target else None
    if isinstance(action, ReplaceNode):
        old = graph.node(action.node_id) if graph.has_node(action.node_id) else None
        if old is not None and old.bbox is not None:
            return "replace", old.bbox
        return None, None
    raise ValueError(f"{type(action).__name__} produces no insertion")


def propose_bbox_fallback(action: DeltaAction, graph: SceneGraph) -> BoundingBox:
    """Deterministic box when the LLM omits or garbles one.

    "on X": X's width, 35% of X's height, sitting on X's top edge.
    "in front of X": X's width over X's lower third.
    Replacements reuse the replaced node's box. Anything else: a centered
    box over the bottom quarter of the canvas. Always clipped to [0, 1].
    """
    predicate, anchor = _anchor_of(action, graph)
    if predicate == "replace" and anchor is not None:
        return _clip_or_default(anchor.x0, anchor.y0, anchor.x1, anchor.y1)
    if predicate is None or anchor is None:
        return DEFAULT_BOX
    height = anchor.y1 - anchor.y0
    if predicate == "on" or predicate.startswith("on "):
        return _clip_or_default(anchor.x0, anchor.y0 - 0.35 * height, anchor.x1, anchor.y0)
    if "in front of" in predicate:
        return _clip_or_default(anchor.x0, anchor.y1 - height / 3.0, anchor.x1, anchor.y1)
    return DEFAULT_BOX


def _insertion_actions(delta: GraphDelta) -> dict[str, DeltaAction]:
    """Map inserted node id -> the action that caused the insertion."""
    out: dict[str, DeltaAction] = {}
    for action in delta.actions:
        if isinstance(action, AddNode):
            out[action.node.id] = action
        elif isinstance(action, ReplaceNode):
            out[action.node_id] = action
        elif isinstance(action, ModifyEdge):
            out[action.edge.s] = action
    return out


def _relation_context(node_id: str, target: SceneGraph) -> tuple[str | None, str | None]:
    for e in target.edges:
        if e.s == node_id and target.has_node(e.o):
            return e.p, target.node(e.o).label
    return None, None


def _ask_bbox(
    node_id: str, target: SceneGraph, action: DeltaAction, graph: SceneGraph,
    provider: ProviderHandle,
) -> BoundingBox:
    node = target.node(node_id)
    predicate, target_label = _relation_context(node_id, target)
    anchor_pred, anchor_box = _anchor_of(action, graph)
    obj = {
        "label": node.label,
        "predicate": predicate or anchor_pred,
        "target": target_label,
        "target_bbox": anchor_box.as_list() if anchor_box else None,
    }
    turns = render_template(
        PROPOSE_BBOX,
        {"object": json.dumps(obj), "graph": json.dumps(graph_overview(target))},
    )
    try:
        box = parse_tagged_reply(complete_chat(turns, provider), "BBoxReply")
        return _clip_or_default(box.x0, box.y0, box.x1, box.y1)
    except MalformedReply:
        return propose_bbox_fallback(action, graph)


def render_generation_prompt(
    insertions: tuple[Insertion, ...] | list[Insertion],
    target_graph: SceneGraph,
    provider: ProviderHandle,
) -> str:
    """One sentence covering all inserted objects, via the LLM.

    Single object: "A photo of [object] [action] [support]" shape. Several:
    the LLM integrates them from their relations in the target graph. The
    returned text must mention each object's token (or label when no token
    was learned).
    """
    if not insertions:
        raise ValueError("no insertions to describe")
    descriptors = [
        {
            "label": ins.label,
            "token": ins.token,
            "predicate": _relation_context(ins.node_id, target_graph)[0],
            "target": _relation_context(ins.node_id, target_graph)[1],
        }
        for ins in insertions
    ]
    if len(insertions) == 1:
        turns = render_template(
            GENERATION_PROMPT_SINGLE, {"object": json.dumps(descriptors[0])}
        )
    else:
        turns = render_template(
            GENERATION_PROMPT_MULTI,
            {
                "objects": json.dumps(descriptors),
                "graph": json.dumps(graph_overview(target_graph)),
            },
        )
    text = parse_tagged_reply(complete_chat(turns, provider), "Caption")
    for ins in insertions:
        mention = ins.token if ins.token else ins.label
        if mention.lower() not in text.lower():
            raise MalformedReply(f"generation prompt omits {mention!r}", span=text)
    return text


def plan_edit(graph: SceneGraph, delta: GraphDelta, provider: ProviderHandle) -> EditPlan:
    """Translate a delta into removals + insertions with boxes and prompts."""
    target = apply_delta(graph, delta)
    turns = render_template(
        PLAN_EDIT,
        {
            "graph": json.dumps(graph_overview(graph)),
            "edit": json.dumps(delta_to_wire(delta)),
        },
    )
    reply = parse_tagged_reply(complete_chat(turns, provider), "EditPlanReply")
    actions_by_insert = _insertion_actions(delta)

    removals: list[tuple[str, RegionMask]] = []
    for node_id in reply.remove:
        try:
            node = graph.node(node_id)
        except UnknownId as exc:
            raise MalformedReply(f"plan removes unknown node {node_id!r}") from exc
        if node.mask is not None:
            removals.append((node_id, node.mask))
        elif node.bbox is not None:
            removals.append((node_id, rasterize_box(node.bbox, graph.width, graph.height)))
        else:
            raise MissingMask(f"removal target {node_id} has neither mask nor bbox")

    insertions: list[Insertion] = []
    for item in reply.insert:
        try:
            node = target.node(item.node)
        except UnknownId as exc:
            raise MalformedReply(f"plan inserts unknown node {item.node!r}") from exc
        action = actions_by_insert.get(item.node)
        if item.bbox is not None:
            bbox = _clip_or_default(item.bbox.x0, item.bbox.y0, item.bbox.x1, item.bbox.y1)
        elif action is not None:
            bbox = _ask_bbox(item.node, target, action, graph, provider)
        else:
            bbox = DEFAULT_BOX
        name = node.token if node.token else node.label
        insertions.append(
            Insertion(
                node_id=node.id,
                label=node.label,
                token=node.token,
                bbox=bbox,
                single_object_prompt=f"a photo of {name}.",
            )
        )

    combined = (
        render_generation_prompt(insertions, target, provider) if insertions else ""
    )
    return EditPlan(
        removals=tuple(removals),
        insertions=tuple(insertions),
        combined_prompt=combined,
        non_object_prompt=NON_OBJECT_PROMPT,
        source_graph=graph,
        target_graph=target,
    )


def plan_to_wire(plan: EditPlan) -> dict:
    return {
        "removals": [
            {"node": node_id, "mask": mask_to_rle(mask)} for node_id, mask in plan.removals
        ],
        "insertions": [
            {
                "node": ins.node_id,
                "label": ins.label,
                "token": ins.token,
                "bbox": ins.bbox.as_list(),
                "prompt": ins.single_object_prompt,
            }
            for ins in plan.insertions
        ],
        "combined_prompt": plan.combined_prompt,
        "non_object_prompt": plan.non_object_prompt,
    }
