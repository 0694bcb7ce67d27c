"""A deterministic scripted stand-in for the LLM provider.

Dispatches on the fixed task phrase that opens each template body. Scene
questions (describe / list instances / relations / node captions) are
answered from per-image scripts keyed by the attachment ref; planning,
box-placement, prompt-writing, and checklist-scoring requests are answered
by small deterministic rules computed from the JSON blocks inside the
request. Replies are rendered as the tagged blocks the parsers expect, so
every recorded transcript round-trips through the real reply schemas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .gateway import ChatTurn, ProviderUnavailable, extract_block
from .graph import assign_node_id

DEFAULT_PLACEMENT = [0.375, 0.70, 0.625, 0.95]


@dataclass(frozen=True)
class SceneScript:
    """Everything the provider needs to answer questions about one image."""

    caption: str
    objects: tuple = ()  # entries: "label" or {"label": ..., "background": True}
    relations: tuple[tuple[str, str, str], ...] = ()
    node_captions: dict[str, str] = field(default_factory=dict)


def _clamp(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def _place(predicate: str | None, anchor: list[float] | None) -> list[float]:
    """Placement arithmetic mirroring the controller's geometric fallback."""
    if predicate == "replace" and anchor is not None:
        return [_clamp(v) for v in anchor]
    if predicate is None or anchor is None:
        return list(DEFAULT_PLACEMENT)
    x0, y0, x1, y1 = anchor
    h = y1 - y0
    if predicate == "on" or predicate.startswith("on "):
        box = [x0, y0 - 0.35 * h, x1, y0]
    elif "in front of" in predicate:
        box = [x0, y1 - h / 3.0, x1, y1]
    else:
        return list(DEFAULT_PLACEMENT)
    box = [_clamp(v) for v in box]
    if not (box[0] < box[2] and box[1] < box[3]):
        return list(DEFAULT_PLACEMENT)
    return box


def _phrase(descriptor: dict) -> str:
    name = descriptor.get("token") or descriptor["label"]
    predicate, target = descriptor.get("predicate"), descriptor.get("target")
    if predicate and target:
        return f"{name} {predicate} the {target}"
    return str(name)


class ScriptedProvider:
    """Reference provider: same interface as a live LLM, fully deterministic.

    Added-node ids in plan replies are re-derived from the action labels
    with the shared id-assignment rule, which matches deltas decoded from
    the wire (the service and CLI path). `checklist_scores` overrides the
    default full-marks checklist answer per metric name.
    """

    def __init__(
        self,
        scenes: dict[str, SceneScript] | None = None,
        default: SceneScript | None = None,
        checklist_scores: dict[str, list[float]] | None = None,
    ):
        self.scenes = dict(scenes or {})
        self.default = default
        self.checklist_scores = dict(checklist_scores or {})

    # -- scene lookup ---------------------------------------------------

    def _scene(self, turn: ChatTurn) -> SceneScript:
        ref = turn.attachments[0].ref if turn.attachments else None
        if ref is not None and ref in self.scenes:
            return self.scenes[ref]
        if self.default is not None:
            return self.default
        raise ProviderUnavailable(f"no scene script for image {ref!r}")

    # -- task rules -------------------------------------------------------

    def _plan(self, body: str) -> str:
        overview = extract_block(body, "graph")
        delta = extract_block(body, "edit")
        if overview is None or delta is None:
            raise ProviderUnavailable("plan request is missing graph/edit blocks")
        boxes = {n["id"]: n.get("bbox") for n in overview["nodes"]}
        taken = set(boxes)
        remove: list[str] = []
        insert: list[dict] = []
        for action in delta["actions"]:
            kind = action["type"]
            if kind == "remove_node":
                remove.append(action["id"])
            elif kind == "add_node":
                node_id = assign_node_id(action["label"], taken)
                taken.add(node_id)
                rel = next((r for r in action.get("relations", ()) if "o" in r), None)
                anchor = boxes.get(rel["o"]) if rel else None
                insert.append(
                    {"node": node_id, "bbox": _place(rel["p"] if rel else None, anchor)}
                )
            elif kind == "replace_node":
                remove.append(action["id"])
                insert.append(
                    {"node": action["id"], "bbox": _place("replace", boxes.get(action["id"]))}
                )
            elif kind == "modify_edge":
                subject = action["edge"]["s"]
                remove.append(subject)
                insert.append(
                    {
                        "node": subject,
                        "bbox": _place(action["predicate"], boxes.get(action["edge"]["o"])),
                    }
                )
            else:
                raise ProviderUnavailable(f"unknown action type {kind!r}")
        return "plan: " + json.dumps({"remove": remove, "insert": insert})

    def _bbox(self, body: str) -> str:
        obj = extract_block(body, "object")
        if obj is None:
            raise ProviderUnavailable("bbox request is missing its object block")
        return "bbox: " + json.dumps(_place(obj.get("predicate"), obj.get("target_bbox")))

    def _single_prompt(self, body: str) -> str:
        obj = extract_block(body, "object")
        if obj is None:
            raise ProviderUnavailable("prompt request is missing its object block")
        return "caption: " + json.dumps(f"A photo of {_phrase(obj)}.")

    def _multi_prompt(self, body: str) -> str:
        objs = extract_block(body, "object")
        if not objs:
            raise ProviderUnavailable("prompt request is missing its object block")
        sentence = "A photo of " + " and ".join(_phrase(o) for o in objs) + "."
        return "caption: " + json.dumps(sentence)

    def _scores(self, body: str) -> str:
        items = extract_block(body, "items")
        if items is None:
            raise ProviderUnavailable("score request is missing its items block")
        metric = None
        head = body.splitlines()[0]
        if " for the " in head and " check." in head:
            metric = head.split(" for the ", 1)[1].split(" check.", 1)[0]
        if metric in self.checklist_scores:
            scores = list(self.checklist_scores[metric])
            if len(scores) != len(items):
                raise ProviderUnavailable(
                    f"scripted scores for {metric!r} cover {len(scores)} items, "
                    f"checklist has {len(items)}"
                )
        else:
            scores = [item["scale"] for item in items]
        return "scores: " + json.dumps(scores)

    def _node_caption(self, body: str, turn: ChatTurn) -> str:
        start = body.find('"') + 1
        label = body[start : body.find('"', start)]
        scene = self._scene(turn)
        caption = scene.node_captions.get(label, f"A {label}.")
        return "caption: " + json.dumps(caption)

    # -- provider interface -----------------------------------------------

    def complete(self, turns: list[ChatTurn]) -> str:
        last = turns[-1]
        body = last.content
        if body.startswith("Describe the overall scene"):
            return "caption: " + json.dumps(self._scene(last).caption)
        if body.startswith("List the main object instances"):
            return "objects: " + json.dumps(list(self._scene(last).objects))
        if body.startswith("List the relationships"):
            return "relations: " + json.dumps([list(r) for r in self._scene(last).relations])
        if body.startswith("Generate a detailed description for the object"):
            return self._node_caption(body, last)
        if body.startswith("Plan the edit for the scene graph below."):
            return self._plan(body)
        if body.startswith("Propose a bounding box for the object below"):
            return self._bbox(body)
        if body.startswith("Write a generation prompt for the object below."):
            return self._single_prompt(body)
        if body.startswith("Write a generation prompt integrating the objects below."):
            return self._multi_prompt(body)
        if body.startswith("Score each checklist item"):
            return self._scores(body)
        raise ProviderUnavailable(f"no scripted rule for request: {body[:60]!r}")


def script_from_wire(wire: dict) -> SceneScript:
    return SceneScript(
        caption=wire["caption"],
        objects=tuple(wire.get("objects", ())),
        relations=tuple(tuple(r) for r in wire.get("relations", ())),
        node_captions=dict(wire.get("node_captions", {})),
    )


def scripted_from_file(path) -> ScriptedProvider:
    """Load a provider from a manifest: {"scenes": {image id: scene}, ...}."""
    with open(path, encoding="utf-8") as fh:
        wire = json.load(fh)
    scenes = {ref: script_from_wire(s) for ref, s in wire.get("scenes", {}).items()}
    default = script_from_wire(wire["default"]) if wire.get("default") else None
    return ScriptedProvider(
        scenes, default, checklist_scores=wire.get("checklist_scores")
    )
