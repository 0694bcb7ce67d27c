"""Concept-learning job planning: per-object tokens, prompts, schedules.

The engine never runs gradient fine-tuning itself. It emits a job
specification (one optimized-token entry per foreground object, two-phase
learning rates, a step budget scaled by object count) and accepts a receipt
assigning the learned token handles back to nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .graph import ObjectNode, SceneGraph

BASE_MODEL = "stable-diffusion-v2-1-base"
LR_TOKEN_PHASE = 5e-4
LR_JOINT_PHASE = 2e-6
PHASE_SPLIT_DEFAULT = 0.5


class MissingCaption(ValueError):
    pass


class UnannotatedNode(ValueError):
    pass


class EmptyJob(ValueError):
    pass


@dataclass(frozen=True)
class FinetuneEntry:
    node_id: str
    token: str
    training_prompt: str
    mask_ref: str


@dataclass(frozen=True)
class FinetuneJobSpec:
    """Two-phase optimization: token embedding first, then joint updates."""

    entries: tuple[FinetuneEntry, ...]
    total_steps: int
    lr_phase1: float = LR_TOKEN_PHASE
    lr_phase2: float = LR_JOINT_PHASE
    phase_split: float = PHASE_SPLIT_DEFAULT
    base_model: str = BASE_MODEL

    def __post_init__(self):
        if self.total_steps not in (800, 1000, 1200):
            raise ValueError(f"step budget {self.total_steps} not in {{800, 1000, 1200}}")
        tokens = [e.token for e in self.entries]
        if len(set(tokens)) != len(tokens):
            raise ValueError("token placeholders must be unique per object")
        for e in self.entries:
            if e.token not in e.training_prompt:
                raise ValueError(f"prompt for {e.node_id} does not use its token")

    def to_wire(self) -> dict:
        return {
            "entries": [
                {
                    "node_id": e.node_id,
                    "token": e.token,
                    "training_prompt": e.training_prompt,
                    "mask_ref": e.mask_ref,
                }
                for e in self.entries
            ],
            "total_steps": self.total_steps,
            "lr_phase1": self.lr_phase1,
            "lr_phase2": self.lr_phase2,
            "phase_split": self.phase_split,
            "base_model": self.base_model,
        }


@dataclass(frozen=True)
class FinetuneReceipt:
    job_id: str
    token_handles: dict[str, str]  # node id -> learned token handle
    model_handle: str

    def to_wire(self) -> dict:
        return {
            "job_id": self.job_id,
            "token_handles": dict(self.token_handles),
            "model_handle": self.model_handle,
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "FinetuneReceipt":
        return cls(wire["job_id"], dict(wire["token_handles"]), wire["model_handle"])


def compose_training_prompt(node: ObjectNode, token: str) -> str:
    """Exactly `a photo of <token>. ` + the node's detailed caption."""
    if not node.caption:
        raise MissingCaption(f"node {node.id} has no detailed caption")
    return f"a photo of {token}. {node.caption}"


def training_schedule(n_objects: int) -> tuple[int, float, float]:
    """Step budget 800 for up to 2 objects, +200 per extra, capped at 1200."""
    if n_objects < 1:
        raise ValueError("need at least one object")
    steps = min(max(800 + 200 * max(0, n_objects - 2), 800), 1200)
    return steps, LR_TOKEN_PHASE, LR_JOINT_PHASE


def foreground_nodes(graph: SceneGraph) -> list[ObjectNode]:
    return [n for n in graph.nodes if not n.background]


def emit_finetune_job(graph: SceneGraph) -> FinetuneJobSpec:
    """One entry per foreground node; background nodes are excluded."""
    targets = foreground_nodes(graph)
    if not targets:
        raise EmptyJob("no foreground objects to learn")
    for node in targets:
        if node.mask is None or node.ungrounded:
            raise UnannotatedNode(f"node {node.id} has no grounding mask")
        if not node.caption:
            raise UnannotatedNode(f"node {node.id} has no detailed caption")
    steps, lr1, lr2 = training_schedule(len(targets))
    entries = tuple(
        FinetuneEntry(
            node_id=node.id,
            token=f"<opt_{k}>",
            training_prompt=compose_training_prompt(node, f"<opt_{k}>"),
            mask_ref=node.id,
        )
        for k, node in enumerate(targets)
    )
    return FinetuneJobSpec(entries=entries, total_steps=steps, lr_phase1=lr1, lr_phase2=lr2)


def apply_receipt(graph: SceneGraph, receipt: FinetuneReceipt) -> SceneGraph:
    """Write learned token handles back onto their nodes."""
    nodes = tuple(
        replace(n, token=receipt.token_handles[n.id]) if n.id in receipt.token_handles else n
        for n in graph.nodes
    )
    return SceneGraph(graph.width, graph.height, nodes, graph.edges)
