"""
Scene graphs and edit deltas
============================

A scene graph is the structured "what is where" of an image: object nodes
with labels, captions, bounding boxes and pixel masks, plus relation edges
like ("red-cube", "on", "table").  Edits are expressed as small deltas
against that graph rather than as free-form instructions.
"""

import json

from sgedit.graph import (
    ObjectNode,
    RelationEdge,
    SceneGraph,
    assign_node_id,
    apply_delta,
    delta_from_wire,
    graph_from_wire,
    graph_to_wire,
)
from sgedit.regions import BoundingBox, mask_to_rle, rasterize_box

# Build a tiny two-object scene by hand.  Boxes are in normalized [0, 1]
# coordinates; masks are boolean rasters at the image resolution.
cube_box = BoundingBox(0.375, 0.25, 0.625, 0.5)
table_box = BoundingBox(0.125, 0.5, 0.875, 0.875)

graph = SceneGraph(
    32,
    32,
    nodes=(
        ObjectNode(
            "red-cube",
            "red cube",
            caption="A glossy red cube.",
            bbox=cube_box,
            mask=rasterize_box(cube_box, 32, 32),
        ),
        ObjectNode(
            "table",
            "table",
            caption="A wooden table.",
            bbox=table_box,
            mask=rasterize_box(table_box, 32, 32),
        ),
    ),
    edges=(RelationEdge("red-cube", "on", "table"),),
)

print("nodes:", graph.node_ids())
print("edges:", [(e.s, e.p, e.o) for e in graph.edges])

# Graphs serialize to plain JSON.  Masks travel as run-length encodings so
# the wire form stays compact and diffable.
wire = graph_to_wire(graph)
print("\nwire keys:", sorted(wire))
print("first node on the wire:")
print(json.dumps(wire["nodes"][0], indent=2)[:400])

round_tripped = graph_from_wire(wire)
assert round_tripped == graph
print("\nwire round-trip preserves the graph exactly")

# Node ids are derived from labels: the first "cat" is just "cat", later
# ones get numeric suffixes so ids stay unique and human-readable.
taken = set(graph.node_ids())
print("\nid for a new 'red cube':", assign_node_id("red cube", taken))
print("id for a second 'table':", assign_node_id("table", taken))

# Edits arrive as deltas.  Four kinds cover the editing loop: remove a node,
# add a node, replace a node and change the predicate of an edge.
remove = delta_from_wire({"actions": [{"type": "remove_node", "id": "red-cube"}]}, graph)
print("\nremove delta:", remove)

after_remove = apply_delta(graph, remove)
print("after removal:", after_remove.node_ids())
print("edges after removal:", [(e.s, e.p, e.o) for e in after_remove.edges])

add = delta_from_wire(
    {
        "actions": [
            {
                "type": "add_node",
                "label": "blue ball",
                "relations": [{"p": "on", "o": "table"}],
            }
        ]
    },
    graph,
)
after_add = apply_delta(graph, add)
print("\nafter adding a blue ball:", after_add.node_ids())
print("edges now:", [(e.s, e.p, e.o) for e in after_add.edges])

# New nodes start out "ungrounded": they have no pixels yet.  Executing the
# edit fills in mask and bbox, which flips the flag back.
ball = after_add.node("blue-ball")
print("new node ungrounded?", ball.ungrounded, "| mask:", ball.mask)

modify = delta_from_wire(
    {
        "actions": [
            {
                "type": "modify_edge",
                "edge": {"s": "red-cube", "p": "on", "o": "table"},
                "predicate": "in front of",
            }
        ]
    },
    graph,
)
after_modify = apply_delta(graph, modify)
print("\nafter modify_edge:", [(e.s, e.p, e.o) for e in after_modify.edges])

# Masks know their area and tight bounding box, which the planner uses when
# it turns graph diffs into pixel regions.
mask = graph.node("red-cube").mask
print("\ncube mask area:", mask.area, "of", mask.bits.size, "cells")
print("tight bbox:", mask.tight_bbox())
print("RLE wire form:", json.dumps(mask_to_rle(mask))[:80], "...")
