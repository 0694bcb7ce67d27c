"""Prompt templates for every conversation the engine holds.

Each template opens its user body with a fixed task phrase (the scripted
reference provider dispatches on it) and pins the reply to a single named
block (`objects:`, `relations:`, `caption:`, `plan:`, `bbox:`, `scores:`)
that `parse_tagged_reply` extracts. Machine-readable context rides inside
the body as labeled JSON blocks (`graph:`, `edit:`, `object:`, `items:`).
"""

from __future__ import annotations

from .gateway import PromptTemplate

_ANALYST = (
    "You are a meticulous visual scene analyst. Answer in plain prose but "
    "always include the single structured block the task asks for, as a "
    "JSON value on its own line."
)

DESCRIBE_IMAGE = PromptTemplate(
    name="describe_image",
    system=_ANALYST,
    body=(
        "Describe the overall scene in the attached image in one or two "
        "sentences. Reply with a block `caption: \"...\"`."
    ),
    in_context_examples=(
        (
            "Describe the overall scene in the attached image in one or two "
            "sentences. Reply with a block `caption: \"...\"`.",
            'caption: "Two cats sit on a wooden floor next to a cardboard box."',
        ),
    ),
)

LIST_INSTANCES = PromptTemplate(
    name="list_instances",
    system=_ANALYST,
    body=(
        "List the main object instances visible in the attached image. "
        "Distinguish individual foreground instances (two similar animals "
        "are two entries), do not list accessory parts of an instance "
        "(clothing or held items belong to their wearer), and simplify the "
        "background into a few basic elements marked with background: true. "
        "Reply with a block `objects: [...]` where each entry is either a "
        "label string or {\"label\": ..., \"background\": true}."
    ),
    in_context_examples=(
        (
            "List the main object instances visible in the attached image. "
            "Reply with a block `objects: [...]`.",
            'objects: ["ginger cat", "gray and white cat", "box", '
            '{"label": "floor", "background": true}]',
        ),
    ),
)

LIST_RELATIONS = PromptTemplate(
    name="list_relations",
    system=_ANALYST,
    body=(
        "List the relationships between these instances: $instances. Use "
        "only the listed instance labels as subjects and objects. Reply "
        "with a block `relations: [[\"subject\", \"predicate\", "
        "\"object\"], ...]`."
    ),
    in_context_examples=(
        (
            'List the relationships between these instances: ["ginger cat", '
            '"box"].',
            'relations: [["ginger cat", "standing next to", "box"]]',
        ),
    ),
)

CAPTION_NODE = PromptTemplate(
    name="caption_node",
    system=_ANALYST,
    body=(
        "Generate a detailed description for the object \"$label\" in the "
        "attached image. Mention attributes such as attire, attachments, "
        "and pose when applicable, but do not describe other objects. "
        "Reply with a block `caption: \"...\"`."
    ),
    in_context_examples=(
        (
            'Generate a detailed description for the object "woman" in the '
            "attached image.",
            'caption: "She is wearing sunglasses, a black puffer jacket, '
            'and light-colored pants."',
        ),
    ),
)

PLAN_EDIT = PromptTemplate(
    name="plan_edit",
    system=(
        "You are an image-editing planner. Every edit is a removal pass "
        "followed by an insertion pass: objects that disappear are removed, "
        "objects that appear are inserted, and an object that changes place "
        "or pose is removed and re-inserted. Propose a normalized bounding "
        "box [x0, y0, x1, y1] for every insertion."
    ),
    body=(
        "Plan the edit for the scene graph below.\n"
        "graph:\n$graph\n"
        "edit:\n$edit\n"
        "Reply with a block `plan: {\"remove\": [node ids], \"insert\": "
        "[{\"node\": id, \"bbox\": [x0, y0, x1, y1]}]}`."
    ),
    in_context_examples=(
        (
            "Plan the edit for the scene graph below.\n"
            'graph:\n{"image_size": [32, 32], "nodes": [{"id": "cake", '
            '"label": "cake"}], "edges": []}\n'
            'edit:\n{"actions": [{"type": "remove_node", "id": "cake"}]}\n'
            "Reply with a block `plan: ...`.",
            'plan: {"remove": ["cake"], "insert": []}',
        ),
    ),
)

GENERATION_PROMPT_SINGLE = PromptTemplate(
    name="generation_prompt_single",
    system=(
        "You write short text-to-image prompts. Shape: \"A photo of "
        "[object] [action] [support surface]\". When the object has a "
        "placeholder token, refer to it by that token verbatim."
    ),
    body=(
        "Write a generation prompt for the object below.\n"
        "object:\n$object\n"
        "Reply with a block `caption: \"...\"`."
    ),
    in_context_examples=(
        (
            "Write a generation prompt for the object below.\n"
            'object:\n{"label": "ginger cat", "token": "<opt_0>", '
            '"predicate": "walking on", "target": "floor"}\n'
            "Reply with a block `caption: \"...\"`.",
            'caption: "A photo of <opt_0> walking on the floor."',
        ),
    ),
)

GENERATION_PROMPT_MULTI = PromptTemplate(
    name="generation_prompt_multi",
    system=(
        "You write short text-to-image prompts. Integrate all the given "
        "objects into one sentence based on their relationships in the "
        "scene graph; refer to each object by its placeholder token when "
        "one is given, otherwise by its label."
    ),
    body=(
        "Write a generation prompt integrating the objects below.\n"
        "object:\n$objects\n"
        "graph:\n$graph\n"
        "Reply with a block `caption: \"...\"`."
    ),
    in_context_examples=(
        (
            "Write a generation prompt integrating the objects below.\n"
            'object:\n[{"label": "ginger cat", "token": "<opt_0>", '
            '"predicate": "walking in front of", "target": "box"}, '
            '{"label": "ball", "token": null, "predicate": null, '
            '"target": null}]\n'
            'graph:\n{"image_size": [32, 32], "nodes": [], "edges": []}\n'
            "Reply with a block `caption: \"...\"`.",
            'caption: "A photo of <opt_0> walking in front of the box and '
            'a ball."',
        ),
    ),
)

PROPOSE_BBOX = PromptTemplate(
    name="propose_bbox",
    system=(
        "You place objects in images. Boxes are [x0, y0, x1, y1] in "
        "normalized coordinates with (0, 0) the top-left corner; boxes must "
        "satisfy x0 < x1 and y0 < y1 and stay inside [0, 1]."
    ),
    body=(
        "Propose a bounding box for the object below so it satisfies its "
        "relation in the scene.\n"
        "object:\n$object\n"
        "graph:\n$graph\n"
        "Reply with a block `bbox: [x0, y0, x1, y1]`."
    ),
    in_context_examples=(
        (
            "Propose a bounding box for the object below so it satisfies "
            "its relation in the scene.\n"
            'object:\n{"label": "vase", "predicate": "on", "target": '
            '"table", "target_bbox": [0.2, 0.6, 0.8, 0.9]}\n'
            'graph:\n{"image_size": [32, 32], "nodes": [], "edges": []}\n'
            "Reply with a block `bbox: [x0, y0, x1, y1]`.",
            "bbox: [0.2, 0.495, 0.8, 0.6]",
        ),
    ),
)

SCORE_CHECKLIST = PromptTemplate(
    name="score_checklist",
    system=(
        "You are a strict image-edit reviewer. Score every checklist item "
        "on its own scale by comparing the source image (first attachment) "
        "with the edited image (second attachment). Award the full scale "
        "only when the item is satisfied with no missing or over-"
        "represented elements."
    ),
    body=(
        "Score each checklist item for the $metric check.\n"
        "items:\n$items\n"
        "Reply with a block `scores: [...]` giving one number per item in "
        "order."
    ),
    in_context_examples=(
        (
            "Score each checklist item for the element-composition check.\n"
            'items:\n[{"description": "the teddy bear is added", "scale": '
            '3}, {"description": "the sofa is preserved", "scale": 3}]\n'
            "Reply with a block `scores: [...]`.",
            "scores: [3, 3]",
        ),
    ),
)

ALL_TEMPLATES = (
    DESCRIBE_IMAGE,
    LIST_INSTANCES,
    LIST_RELATIONS,
    CAPTION_NODE,
    PLAN_EDIT,
    GENERATION_PROMPT_SINGLE,
    GENERATION_PROMPT_MULTI,
    PROPOSE_BBOX,
    SCORE_CHECKLIST,
)

TEMPLATE_SCHEMAS = {
    "describe_image": "Caption",
    "list_instances": "ObjectList",
    "list_relations": "RelationList",
    "caption_node": "Caption",
    "plan_edit": "EditPlanReply",
    "generation_prompt_single": "Caption",
    "generation_prompt_multi": "Caption",
    "propose_bbox": "BBoxReply",
    "score_checklist": "ChecklistReply",
}
