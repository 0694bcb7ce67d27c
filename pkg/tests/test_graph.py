"""Scene graph values, deltas, diffing, validation, and the wire format."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgedit.graph import (
    AddNode,
    DuplicateId,
    GraphDelta,
    ModifyEdge,
    ObjectNode,
    RelationEdge,
    RemoveNode,
    ReplaceNode,
    SceneGraph,
    UnknownId,
    apply_delta,
    assign_node_id,
    delta_from_wire,
    delta_to_wire,
    diff_graphs,
    graph_from_json,
    graph_to_json,
    slugify,
    validate_graph,
)
from sgedit.regions import BoundingBox, RegionMask


def box(x0=0.25, y0=0.25, x1=0.75, y1=0.75):
    return BoundingBox(x0, y0, x1, y1)


def mask_for(bbox: BoundingBox, size: int = 4) -> RegionMask:
    from sgedit.regions import rasterize_box

    return rasterize_box(bbox, size, size)


def node(node_id: str, label: str | None = None, grounded: bool = True, **kw) -> ObjectNode:
    b = kw.pop("bbox", box())
    return ObjectNode(
        id=node_id,
        label=label or node_id,
        caption=kw.pop("caption", f"A {label or node_id}."),
        bbox=b if grounded else None,
        mask=mask_for(b) if grounded else None,
        ungrounded=not grounded,
        **kw,
    )


def demo_graph() -> SceneGraph:
    return SceneGraph(
        4,
        4,
        (node("cat"), node("mat", bbox=box(0.0, 0.5, 1.0, 1.0))),
        (RelationEdge("cat", "on", "mat"),),
    )


# --- graph structure ------------------------------------------------------------


def test_graph_rejects_duplicate_ids():
    with pytest.raises(DuplicateId):
        SceneGraph(4, 4, (node("cat"), node("cat")))


def test_node_lookup_and_edges_touching():
    g = demo_graph()
    assert g.node("cat").label == "cat"
    assert g.has_node("mat") and not g.has_node("dog")
    assert g.edges_touching("mat") == (RelationEdge("cat", "on", "mat"),)
    with pytest.raises(UnknownId):
        g.node("dog")


# --- apply_delta -----------------------------------------------------------------


def test_apply_remove_drops_node_and_incident_edges():
    out = apply_delta(demo_graph(), GraphDelta((RemoveNode("cat"),)))
    assert out.node_ids() == ["mat"]
    assert out.edges == ()


def test_apply_add_with_anchor_edge():
    new = ObjectNode(id="dog", label="dog", ungrounded=True)
    out = apply_delta(
        demo_graph(), GraphDelta((AddNode(new, (RelationEdge("dog", "beside", "mat"),)),))
    )
    assert out.node_ids() == ["cat", "mat", "dog"]
    assert RelationEdge("dog", "beside", "mat") in out.edges


def test_apply_replace_resets_caption_and_token():
    start = SceneGraph(4, 4, (node("cat", token="<cat-0>"),))
    out = apply_delta(start, GraphDelta((ReplaceNode("cat", "red fox"),)))
    got = out.node("cat")
    assert got.label == "red fox" and got.caption == "" and got.token is None
    assert got.bbox == start.node("cat").bbox  # spatial anchor survives


def test_apply_modify_edge_rewrites_predicate_in_place():
    out = apply_delta(
        demo_graph(),
        GraphDelta((ModifyEdge(RelationEdge("cat", "on", "mat"), "in front of"),)),
    )
    assert out.edges == (RelationEdge("cat", "in front of", "mat"),)


def test_apply_delta_error_cases():
    g = demo_graph()
    with pytest.raises(UnknownId):
        apply_delta(g, GraphDelta((RemoveNode("dog"),)))
    with pytest.raises(UnknownId):
        apply_delta(g, GraphDelta((ReplaceNode("dog", "x"),)))
    with pytest.raises(UnknownId):
        apply_delta(g, GraphDelta((ModifyEdge(RelationEdge("cat", "under", "mat"), "on"),)))
    with pytest.raises(DuplicateId):
        apply_delta(g, GraphDelta((AddNode(ObjectNode(id="cat", label="cat", ungrounded=True)),)))
    with pytest.raises(UnknownId):  # anchor edge referencing a missing node
        apply_delta(
            g,
            GraphDelta(
                (
                    AddNode(
                        ObjectNode(id="dog", label="dog", ungrounded=True),
                        (RelationEdge("dog", "beside", "sofa"),),
                    ),
                )
            ),
        )


def test_apply_delta_leaves_input_untouched():
    g = demo_graph()
    apply_delta(g, GraphDelta((RemoveNode("cat"),)))
    assert g.node_ids() == ["cat", "mat"]


# --- diff_graphs ------------------------------------------------------------------


def test_diff_recovers_each_action_kind():
    g = demo_graph()
    for delta in (
        GraphDelta((RemoveNode("cat"),)),
        GraphDelta((ReplaceNode("cat", "dog"),)),
        GraphDelta((ModifyEdge(RelationEdge("cat", "on", "mat"), "beside"),)),
        GraphDelta(
            (
                AddNode(
                    ObjectNode(id="dog", label="dog", ungrounded=True),
                    (RelationEdge("dog", "near", "mat"),),
                ),
            )
        ),
    ):
        recovered = diff_graphs(g, apply_delta(g, delta))
        assert apply_delta(g, recovered) == apply_delta(g, delta)


def test_diff_pairs_removed_and_added_edges_into_modify():
    g = demo_graph()
    target = apply_delta(
        g, GraphDelta((ModifyEdge(RelationEdge("cat", "on", "mat"), "under"),))
    )
    delta = diff_graphs(g, target)
    assert delta.actions == (ModifyEdge(RelationEdge("cat", "on", "mat"), "under"),)


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_diff_then_apply_reproduces_target(data):
    labels = ["cat", "dog", "mat", "sofa", "lamp", "rug"]
    n = data.draw(st.integers(2, len(labels)))
    nodes = tuple(ObjectNode(id=lbl, label=lbl, ungrounded=True) for lbl in labels[:n])
    ids = [x.id for x in nodes]
    n_edges = data.draw(st.integers(0, 4))
    edges: list[RelationEdge] = []
    for _ in range(n_edges):
        s = data.draw(st.sampled_from(ids))
        o = data.draw(st.sampled_from([i for i in ids if i != s]))
        p = data.draw(st.sampled_from(["on", "under", "beside"]))
        e = RelationEdge(s, p, o)
        if all((x.s, x.o) != (e.s, e.o) for x in edges):
            edges.append(e)
    g = SceneGraph(4, 4, nodes, tuple(edges))

    kind = data.draw(st.sampled_from(["remove", "replace", "modify", "add"]))
    if kind == "remove":
        delta = GraphDelta((RemoveNode(data.draw(st.sampled_from(ids))),))
    elif kind == "replace":
        delta = GraphDelta((ReplaceNode(data.draw(st.sampled_from(ids)), "thing"),))
    elif kind == "modify" and edges:
        delta = GraphDelta((ModifyEdge(data.draw(st.sampled_from(edges)), "above"),))
    elif kind == "modify":
        delta = GraphDelta()
    else:
        delta = GraphDelta((AddNode(ObjectNode(id="new", label="new", ungrounded=True)),))
    target = apply_delta(g, delta)
    assert apply_delta(g, diff_graphs(g, target)) == target


# --- validation --------------------------------------------------------------------


def test_validate_clean_graph_is_silent():
    assert validate_graph(demo_graph()) == []


def test_validate_flags_each_violation_code():
    wrong_size = ObjectNode(id="a", label="a", mask=RegionMask.zeros(3, 3), ungrounded=False,
                            bbox=box())
    empty = ObjectNode(id="b", label="b", mask=RegionMask.zeros(4, 4), bbox=box())
    stray = ObjectNode(  # mask pixel outside the declared box
        id="c", label="c", mask=mask_for(BoundingBox(0.0, 0.0, 1.0, 1.0)), bbox=box(0.5, 0.5, 0.75, 0.75)
    )
    oob = ObjectNode(id="d", label="d", bbox=BoundingBox(-0.2, 0.1, 0.5, 0.5), ungrounded=True)
    bare = ObjectNode(id="e", label="e")
    g = SceneGraph(
        4,
        4,
        (wrong_size, empty, stray, oob, bare),
        (
            RelationEdge("a", "on", "ghost"),
            RelationEdge("a", "", "b"),
            RelationEdge("c", "on", "d"),
            RelationEdge("c", "on", "d"),
        ),
    )
    codes = {v.code for v in validate_graph(g)}
    assert codes == {
        "MaskSizeMismatch",
        "EmptyMask",
        "MaskBoxMismatch",
        "BBoxRange",
        "Ungrounded",
        "DanglingEdge",
        "EmptyPredicate",
        "DuplicateEdge",
    }


def test_validate_allows_half_pixel_mask_overhang():
    # box edge 1/128 inside the pixel boundary: within the 0.5-pixel slack
    bbox = BoundingBox(0.25 + 1 / 128, 0.25, 0.75, 0.75)
    n = ObjectNode(id="a", label="a", mask=mask_for(box()), bbox=bbox)
    assert validate_graph(SceneGraph(4, 4, (n,))) == []


# --- ids and wire format --------------------------------------------------------------


def test_slugify_and_assign_node_id():
    assert slugify("Red Cube!") == "red-cube"
    assert slugify("  ") == "node"
    assert assign_node_id("red cube", set()) == "red-cube"
    assert assign_node_id("red cube", {"red-cube"}) == "red-cube-2"
    assert assign_node_id("red cube", {"red-cube", "red-cube-2"}) == "red-cube-3"


def test_graph_json_round_trip_with_flags():
    g = SceneGraph(
        4,
        4,
        (node("cat"), ObjectNode(id="sky", label="sky", background=True),
         ObjectNode(id="new", label="new", ungrounded=True)),
        (RelationEdge("cat", "under", "sky"),),
    )
    assert graph_from_json(graph_to_json(g)) == g


def test_wire_omits_flags_when_false(parsed):
    wire_nodes = {
        n["id"]: n for n in __import__("json").loads(graph_to_json(parsed.graph))["nodes"]
    }
    assert "background" not in wire_nodes["red-cube"]
    assert wire_nodes["wall"]["background"] is True


def test_delta_wire_round_trip_assigns_fresh_add_ids():
    g = demo_graph()
    delta = GraphDelta(
        (
            RemoveNode("cat"),
            AddNode(
                ObjectNode(id="whatever", label="cat", ungrounded=True),
                (RelationEdge("whatever", "on", "mat"),),
            ),
        )
    )
    wire = delta_to_wire(delta)
    assert wire["actions"][1] == {
        "type": "add_node",
        "label": "cat",
        "relations": [{"p": "on", "o": "mat"}],
    }
    decoded = delta_from_wire(wire, g)
    added = decoded.actions[1]
    # "cat" is still taken at decode time (removal happens later, at apply)
    assert added.node.id == "cat-2"
    assert added.edges == (RelationEdge("cat-2", "on", "mat"),)


def test_delta_wire_incoming_relation_form():
    g = demo_graph()
    wire = {
        "actions": [
            {"type": "add_node", "label": "dog", "relations": [{"s": "cat", "p": "chases"}]}
        ]
    }
    decoded = delta_from_wire(wire, g)
    assert decoded.actions[0].edges == (RelationEdge("cat", "chases", "dog"),)


def test_delta_wire_round_trip_all_kinds():
    g = demo_graph()
    wire = {
        "actions": [
            {"type": "replace_node", "id": "cat", "label": "dog"},
            {
                "type": "modify_edge",
                "edge": {"s": "cat", "p": "on", "o": "mat"},
                "predicate": "beside",
            },
            {"type": "remove_node", "id": "mat"},
        ]
    }
    assert delta_to_wire(delta_from_wire(wire, g)) == wire


def test_delta_from_wire_rejects_unknown_kind():
    with pytest.raises(ValueError):
        delta_from_wire({"actions": [{"type": "recolor", "id": "cat"}]}, demo_graph())
