"""Scene graphs and the delta actions that edit them.

A scene graph is the editable intermediate representation of an image:
object nodes (label, caption, grounding mask/box, optional learned token
handle) plus subject-predicate-object relation edges. Edits are expressed
as small delta actions applied with value semantics: every apply returns a
new graph and never mutates its input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Union

from .regions import BoundingBox, RegionMask, mask_from_rle, mask_to_rle


class UnknownId(KeyError):
    """A delta referenced a node id that is not in the graph."""


class DuplicateId(ValueError):
    """A node id was added twice."""


@dataclass(frozen=True)
class ObjectNode:
    """One object in the scene.

    `token` is the handle of an optimized text embedding once the concept
    learner has run; None until then. `background` marks the residual scene
    node, which can never be removed. `ungrounded` marks planned nodes that
    have a target box but no observed mask yet.
    """

    id: str
    label: str
    caption: str = ""
    bbox: BoundingBox | None = None
    mask: RegionMask | None = None
    token: str | None = None
    background: bool = False
    ungrounded: bool = False

    def grounded(self) -> bool:
        return self.mask is not None


@dataclass(frozen=True)
class RelationEdge:
    """Directed relation: subject --predicate--> object."""

    s: str
    p: str
    o: str

    def as_triple(self) -> tuple[str, str, str]:
        return (self.s, self.p, self.o)


@dataclass(frozen=True)
class SceneGraph:
    width: int
    height: int
    nodes: tuple[ObjectNode, ...] = ()
    edges: tuple[RelationEdge, ...] = ()

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise DuplicateId(f"duplicate node ids: {sorted(dupes)}")

    @property
    def image_size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def node(self, node_id: str) -> ObjectNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownId(node_id)

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def edges_touching(self, node_id: str) -> tuple[RelationEdge, ...]:
        return tuple(e for e in self.edges if node_id in (e.s, e.o))


# --- delta actions ----------------------------------------------------------


@dataclass(frozen=True)
class AddNode:
    """Insert a new object, optionally with relation edges anchoring it."""

    node: ObjectNode
    edges: tuple[RelationEdge, ...] = ()


@dataclass(frozen=True)
class RemoveNode:
    node_id: str


@dataclass(frozen=True)
class ReplaceNode:
    """Swap the object in a region: keep the grounding, change the content.

    The node keeps its id, incident edges, and mask/box (the spatial
    anchor); label takes the new value, caption and any learned token
    handle are reset.
    """

    node_id: str
    label: str


@dataclass(frozen=True)
class ModifyEdge:
    """Rewrite one relation's predicate; endpoints stay put."""

    edge: RelationEdge
    predicate: str


DeltaAction = Union[AddNode, RemoveNode, ReplaceNode, ModifyEdge]


@dataclass(frozen=True)
class GraphDelta:
    actions: tuple[DeltaAction, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.actions)


def apply_delta(graph: SceneGraph, delta: GraphDelta) -> SceneGraph:
    """Apply actions in order; returns a new graph, inputs untouched."""
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    for action in delta.actions:
        if isinstance(action, AddNode):
            if any(n.id == action.node.id for n in nodes):
                raise DuplicateId(action.node.id)
            for e in action.edges:
                for endpoint in (e.s, e.o):
                    if endpoint != action.node.id and not any(n.id == endpoint for n in nodes):
                        raise UnknownId(endpoint)
            nodes.append(action.node)
            edges.extend(action.edges)
        elif isinstance(action, RemoveNode):
            if not any(n.id == action.node_id for n in nodes):
                raise UnknownId(action.node_id)
            nodes = [n for n in nodes if n.id != action.node_id]
            edges = [e for e in edges if action.node_id not in (e.s, e.o)]
        elif isinstance(action, ReplaceNode):
            found = False
            for i, n in enumerate(nodes):
                if n.id == action.node_id:
                    nodes[i] = replace(n, label=action.label, caption="", token=None)
                    found = True
                    break
            if not found:
                raise UnknownId(action.node_id)
        elif isinstance(action, ModifyEdge):
            if action.edge not in edges:
                raise UnknownId(f"edge {action.edge.as_triple()}")
            edges[edges.index(action.edge)] = RelationEdge(
                action.edge.s, action.predicate, action.edge.o
            )
        else:  # pragma: no cover - exhaustive over DeltaAction
            raise TypeError(f"unknown delta action {action!r}")
    return SceneGraph(graph.width, graph.height, tuple(nodes), tuple(edges))


def diff_graphs(old: SceneGraph, new: SceneGraph) -> GraphDelta:
    """Recover a delta that turns `old` into `new`.

    Matching is by node id. A surviving node with a changed label becomes a
    ReplaceNode; a removed+added edge pair sharing endpoints becomes a
    ModifyEdge. The delta vocabulary covers single-action mutations exactly
    (the tested domain); richer rewrites come out as remove/add pairs.
    """
    actions: list[DeltaAction] = []
    old_ids = set(old.node_ids())
    new_ids = set(new.node_ids())

    for node_id in [i for i in old.node_ids() if i not in new_ids]:
        actions.append(RemoveNode(node_id))

    for node_id in [i for i in old.node_ids() if i in new_ids]:
        before, after = old.node(node_id), new.node(node_id)
        if before.label != after.label:
            actions.append(ReplaceNode(node_id, after.label))

    surviving = old_ids & new_ids
    old_edges = [e for e in old.edges if e.s in surviving and e.o in surviving]
    new_edges_kept = [e for e in new.edges if e.s in surviving and e.o in surviving]
    removed_edges = [e for e in old_edges if e not in new_edges_kept]
    added_edges = [e for e in new_edges_kept if e not in old_edges]
    for gone in list(removed_edges):
        match = next((e for e in added_edges if (e.s, e.o) == (gone.s, gone.o)), None)
        if match is not None:
            actions.append(ModifyEdge(gone, match.p))
            removed_edges.remove(gone)
            added_edges.remove(match)

    for node_id in [i for i in new.node_ids() if i not in old_ids]:
        anchor_edges = tuple(e for e in new.edges if node_id in (e.s, e.o))
        actions.append(AddNode(new.node(node_id), anchor_edges))

    return GraphDelta(tuple(actions))


# --- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str


def validate_graph(graph: SceneGraph) -> list[Violation]:
    """Structural checks; returns one record per violation, empty if clean."""
    out: list[Violation] = []
    ids = set(graph.node_ids())
    for n in graph.nodes:
        if n.mask is not None and (n.mask.width, n.mask.height) != graph.image_size:
            out.append(
                Violation(
                    "MaskSizeMismatch",
                    n.id,
                    f"mask is {n.mask.width}x{n.mask.height}, image is "
                    f"{graph.width}x{graph.height}",
                )
            )
        if n.mask is not None and n.mask.is_empty():
            out.append(Violation("EmptyMask", n.id, "grounded node has an empty mask"))
        elif n.mask is not None and n.bbox is not None:
            tight = n.mask.tight_bbox()
            # Allow half-a-pixel slack: boxes are normalized floats while the
            # tight rectangle snaps to the pixel grid.
            slack = 0.5 / min(n.mask.width, n.mask.height)
            if not n.bbox.contains(tight, tol=slack):
                out.append(
                    Violation(
                        "MaskBoxMismatch",
                        n.id,
                        f"mask extends to {tight.as_list()} outside bbox {n.bbox.as_list()}",
                    )
                )
        if n.bbox is not None:
            clipped = n.bbox.clipped()
            if clipped.as_list() != n.bbox.as_list():
                out.append(Violation("BBoxRange", n.id, f"bbox {n.bbox.as_list()} leaves [0,1]"))
        if not n.background and not n.ungrounded and n.mask is None:
            out.append(Violation("Ungrounded", n.id, "node has no mask and is not flagged"))
    for e in graph.edges:
        for endpoint in (e.s, e.o):
            if endpoint not in ids:
                out.append(Violation("DanglingEdge", endpoint, f"edge {e.as_triple()}"))
        if not e.p:
            out.append(Violation("EmptyPredicate", e.s, f"edge {e.as_triple()}"))
    if len(set(graph.edges)) != len(graph.edges):
        dupes = {e for e in graph.edges if graph.edges.count(e) > 1}
        for e in dupes:
            out.append(Violation("DuplicateEdge", e.s, f"edge {e.as_triple()} repeated"))
    return out


# --- node id assignment -------------------------------------------------------


def slugify(label: str) -> str:
    """Lowercase, hyphen-joined id stem from a label."""
    stem = "-".join(part for part in "".join(
        ch.lower() if ch.isalnum() else " " for ch in label
    ).split())
    return stem or "node"


def assign_node_id(label: str, taken: set[str]) -> str:
    """Deterministic fresh id: the label's slug, suffixed on collision."""
    stem = slugify(label)
    if stem not in taken:
        return stem
    n = 2
    while f"{stem}-{n}" in taken:
        n += 1
    return f"{stem}-{n}"


# --- wire format --------------------------------------------------------------


def node_to_wire(node: ObjectNode) -> dict:
    wire: dict = {
        "id": node.id,
        "label": node.label,
        "caption": node.caption,
        "bbox": node.bbox.as_list() if node.bbox else None,
        "mask": mask_to_rle(node.mask) if node.mask else None,
        "token": node.token,
    }
    if node.background:
        wire["background"] = True
    if node.ungrounded:
        wire["ungrounded"] = True
    return wire


def node_from_wire(wire: dict, size: tuple[int, int]) -> ObjectNode:
    bbox = wire.get("bbox")
    mask = wire.get("mask")
    return ObjectNode(
        id=wire["id"],
        label=wire["label"],
        caption=wire.get("caption", ""),
        bbox=BoundingBox(*bbox) if bbox else None,
        mask=mask_from_rle(mask, size[0], size[1]) if mask else None,
        token=wire.get("token"),
        background=bool(wire.get("background", False)),
        ungrounded=bool(wire.get("ungrounded", False)),
    )


def graph_to_wire(graph: SceneGraph) -> dict:
    return {
        "image_size": [graph.width, graph.height],
        "nodes": [node_to_wire(n) for n in graph.nodes],
        "edges": [{"s": e.s, "p": e.p, "o": e.o} for e in graph.edges],
    }


def graph_from_wire(wire: dict) -> SceneGraph:
    width, height = wire["image_size"]
    return SceneGraph(
        width,
        height,
        tuple(node_from_wire(n, (width, height)) for n in wire["nodes"]),
        tuple(RelationEdge(e["s"], e["p"], e["o"]) for e in wire["edges"]),
    )


def graph_to_json(graph: SceneGraph) -> str:
    """Deterministic two-space-indented JSON, trailing newline included."""
    return json.dumps(graph_to_wire(graph), indent=2) + "\n"


def graph_from_json(text: str) -> SceneGraph:
    return graph_from_wire(json.loads(text))


def action_to_wire(action: DeltaAction) -> dict:
    if isinstance(action, AddNode):
        relations = []
        for e in action.edges:
            if e.s == action.node.id:
                relations.append({"p": e.p, "o": e.o})
            else:
                relations.append({"s": e.s, "p": e.p})
        return {"type": "add_node", "label": action.node.label, "relations": relations}
    if isinstance(action, RemoveNode):
        return {"type": "remove_node", "id": action.node_id}
    if isinstance(action, ReplaceNode):
        return {"type": "replace_node", "id": action.node_id, "label": action.label}
    if isinstance(action, ModifyEdge):
        return {
            "type": "modify_edge",
            "edge": {"s": action.edge.s, "p": action.edge.p, "o": action.edge.o},
            "predicate": action.predicate,
        }
    raise TypeError(f"unknown delta action {action!r}")


def action_from_wire(wire: dict, graph: SceneGraph, taken: set[str] | None = None) -> DeltaAction:
    """Decode one action; AddNode ids are assigned from the label here.

    `taken` lets callers decoding several actions keep ids fresh across the
    whole delta; it is updated in place.
    """
    kind = wire["type"]
    if kind == "add_node":
        used = taken if taken is not None else set(graph.node_ids())
        node_id = assign_node_id(wire["label"], used)
        used.add(node_id)
        node = ObjectNode(id=node_id, label=wire["label"], ungrounded=True)
        edges = []
        for rel in wire.get("relations", ()):
            if "o" in rel:
                edges.append(RelationEdge(node_id, rel["p"], rel["o"]))
            else:
                edges.append(RelationEdge(rel["s"], rel["p"], node_id))
        return AddNode(node, tuple(edges))
    if kind == "remove_node":
        return RemoveNode(wire["id"])
    if kind == "replace_node":
        return ReplaceNode(wire["id"], wire["label"])
    if kind == "modify_edge":
        e = wire["edge"]
        return ModifyEdge(RelationEdge(e["s"], e["p"], e["o"]), wire["predicate"])
    raise ValueError(f"unknown delta action type {kind!r}")


def delta_to_wire(delta: GraphDelta) -> dict:
    return {"actions": [action_to_wire(a) for a in delta.actions]}


def delta_from_wire(wire: dict, graph: SceneGraph) -> GraphDelta:
    taken = set(graph.node_ids())
    return GraphDelta(tuple(action_from_wire(a, graph, taken) for a in wire["actions"]))
