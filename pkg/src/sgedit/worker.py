"""Wire protocol for a diffusion worker, with an in-process reference.

Messages are single JSON objects with an `op` field:

  put      {"op": "put", "kind": "image", "data": [[[r,g,b],...]]}
  invert   {"op": "invert", "image_id": ..., "prompt": ...}
  sample   {"op": "sample", "latents": <trajectory id>, "prompt": ...,
            "modulation_spec": {...}, "seed": int}
  finetune {"op": "finetune", "job": <job spec wire>}
  get      {"op": "get", "artifact_id": ...}

Replies carry per-step acks plus the produced artifact id; a streaming
worker would emit the acks as progress events, the synchronous reference
returns them batched. `sample` is removal when the modulation spec lists
removal masks and insertion when it lists insertions; insertion replies
include the segmented object masks so the caller can refresh its graph.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import requests

from .attention import LambdaSchedule
from .concepts import FinetuneReceipt
from .controller import NON_OBJECT_PROMPT, EditPlan, Insertion, plan_to_wire
from .graph import SceneGraph
from .regions import BoundingBox, RegionMask, mask_from_rle, mask_to_rle, mask_union
from .sampling import (
    ExecutionResult,
    PhaseSchedule,
    SamplingTrajectory,
    ddim_invert,
    modulation_spec_for,
    run_insertion,
    run_removal,
)
from .segmenter import MockSegmenter, SegmenterHandle


class WorkerError(RuntimeError):
    """The worker reported an error or could not be reached."""


def _composite(edited: np.ndarray, source: np.ndarray, region: RegionMask) -> np.ndarray:
    w = region.bits[..., None].astype(edited.dtype)
    return w * edited + (1.0 - w) * source


class ToyWorker:
    """Reference worker: the toy backend behind the wire protocol."""

    def __init__(self, backend, segmenter: SegmenterHandle | None = None):
        self.backend = backend
        self.segmenter = segmenter if segmenter is not None else MockSegmenter({})
        self._artifacts: dict[str, object] = {}
        self._seq: dict[str, int] = {}

    def _new_id(self, kind: str) -> str:
        self._seq[kind] = self._seq.get(kind, 0) + 1
        return f"{kind}-{self._seq[kind]:04d}"

    def _fetch(self, artifact_id: str) -> object:
        if artifact_id not in self._artifacts:
            raise KeyError(f"unknown artifact {artifact_id!r}")
        return self._artifacts[artifact_id]

    # -- ops ---------------------------------------------------------------

    def _op_put(self, message: dict) -> dict:
        if message.get("kind") != "image":
            raise ValueError(f"cannot store kind {message.get('kind')!r}")
        image = np.asarray(message["data"], dtype=float)
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValueError(f"image data has shape {image.shape}, want (H, W, 3)")
        artifact_id = self._new_id("img")
        self._artifacts[artifact_id] = image
        return {"acks": [], "artifact_id": artifact_id}

    def _op_invert(self, message: dict) -> dict:
        image = self._fetch(message["image_id"])
        if not isinstance(image, np.ndarray):
            raise ValueError(f"{message['image_id']!r} is not an image")
        traj = ddim_invert(image, message.get("prompt", ""), self.backend)
        artifact_id = self._new_id("traj")
        self._artifacts[artifact_id] = {"trajectory": traj, "image_id": message["image_id"]}
        acks = [{"step": i} for i in range(1, traj.steps + 1)]
        return {"acks": acks, "artifact_id": artifact_id}

    def _op_sample(self, message: dict) -> dict:
        record = self._fetch(message["latents"])
        if not isinstance(record, dict) or "trajectory" not in record:
            raise ValueError(f"{message['latents']!r} is not a trajectory")
        traj: SamplingTrajectory = record["trajectory"]
        source = self._fetch(record["image_id"])
        spec = message["modulation_spec"]
        width, height = spec["size"]
        seed = np.random.SeedSequence(int(message.get("seed", 0)))
        seed_rm, seed_ins = seed.spawn(2)

        if spec.get("masks"):
            union = mask_union(
                [mask_from_rle(rle, width, height) for rle in spec["masks"]]
            )
            z0 = run_removal(traj, union, NON_OBJECT_PROMPT, self.backend, seed_rm)
            out = _composite(self.backend.decode(z0), source, union)
            artifact_id = self._new_id("img")
            self._artifacts[artifact_id] = out
            acks = [{"step": i, "phase": "removal"} for i in range(traj.steps, 0, -1)]
            return {"acks": acks, "artifact_id": artifact_id}

        if spec.get("insertions"):
            schedule = PhaseSchedule.from_wire(spec["phase_schedule"])
            lam = LambdaSchedule.from_wire(spec["lambda"])
            insertions = tuple(
                Insertion(
                    node_id=item["node"],
                    label=item["label"],
                    token=item.get("token"),
                    bbox=BoundingBox(*item["bbox"]),
                    single_object_prompt=item["prompt"],
                )
                for item in spec["insertions"]
            )
            canvas = SceneGraph(width, height)
            plan = EditPlan(
                removals=(),
                insertions=insertions,
                combined_prompt=message["prompt"],
                non_object_prompt=NON_OBJECT_PROMPT,
                source_graph=canvas,
                target_graph=canvas,
            )
            result = run_insertion(
                traj,
                plan,
                schedule,
                self.backend,
                self.segmenter,
                seed_ins,
                seg_image_id=message.get("seg_image_id", "insertion-preview"),
                lam=lam,
            )
            out = _composite(self.backend.decode(result.z0), source, result.seg_union)
            artifact_id = self._new_id("img")
            self._artifacts[artifact_id] = out
            acks = [
                {"step": i, "phase": schedule.phase_at(i)}
                for i in range(traj.steps, 0, -1)
            ]
            segments = {nid: mask_to_rle(m) for nid, m in result.seg_masks.items()}
            return {"acks": acks, "artifact_id": artifact_id, "segments": segments}

        raise ValueError("modulation spec has neither removal masks nor insertions")

    def _op_finetune(self, message: dict) -> dict:
        job = message["job"]
        handles = {entry["node_id"]: entry["token"] for entry in job["entries"]}
        receipt = FinetuneReceipt(
            job_id=self._new_id("job"),
            token_handles=handles,
            model_handle=self._new_id("model"),
        )
        acks = [{"progress": 0.5}, {"progress": 1.0}]
        return {"acks": acks, "artifact_id": receipt.model_handle, "receipt": receipt.to_wire()}

    def _op_get(self, message: dict) -> dict:
        artifact = self._fetch(message["artifact_id"])
        if not isinstance(artifact, np.ndarray):
            raise ValueError(f"{message['artifact_id']!r} is not fetchable")
        return {"kind": "image", "data": artifact.tolist()}

    def handle(self, message: dict) -> dict:
        ops = {
            "put": self._op_put,
            "invert": self._op_invert,
            "sample": self._op_sample,
            "finetune": self._op_finetune,
            "get": self._op_get,
        }
        op = message.get("op")
        if op not in ops:
            return {"error": {"type": "UnknownOp", "message": f"unknown op {op!r}"}}
        try:
            return ops[op](message)
        except Exception as exc:  # protocol boundary: errors travel in-band
            return {"error": {"type": type(exc).__name__, "message": str(exc)}}


class RemoteWorker:
    """HTTP client for a worker service mounted at {base}/worker."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def send(self, message: dict) -> dict:
        try:
            resp = requests.post(
                f"{self.base_url}/worker", json=message, timeout=self.timeout
            )
            resp.raise_for_status()
            return resp.json()
        except requests.RequestException as exc:
            raise WorkerError(f"worker unreachable: {exc}") from exc


Send = Callable[[dict], dict]


def _call(send: Send, message: dict) -> dict:
    reply = send(message)
    if "error" in reply:
        err = reply["error"]
        raise WorkerError(f"{err.get('type')}: {err.get('message')}")
    return reply


def execute_plan_remote(
    plan: EditPlan,
    source_image: np.ndarray,
    scene_caption: str,
    send: Send,
    seed: int = 0,
    schedule: PhaseSchedule | None = None,
    lam: LambdaSchedule = LambdaSchedule(),
    seg_image_id: str = "insertion-preview",
) -> ExecutionResult:
    """Drive a worker through the same removal-then-insertion flow.

    With the reference worker this is byte-identical to executing the plan
    in process: the same sub-seed split, the same composites.
    """
    width, height = plan.source_graph.image_size
    if not plan.removals and not plan.insertions:
        empty = RegionMask.zeros(width, height)
        return ExecutionResult(source_image, plan.target_graph, empty, None, {})

    schedule = schedule or PhaseSchedule()
    spec = modulation_spec_for(plan, schedule, lam).to_wire()
    image = source_image
    removal_mask: RegionMask | None = None

    if plan.removals:
        removal_mask = mask_union([m for _, m in plan.removals])
        img_id = _call(send, {"op": "put", "kind": "image", "data": image.tolist()})[
            "artifact_id"
        ]
        traj_id = _call(send, {"op": "invert", "image_id": img_id, "prompt": scene_caption})[
            "artifact_id"
        ]
        reply = _call(
            send,
            {
                "op": "sample",
                "latents": traj_id,
                "prompt": NON_OBJECT_PROMPT,
                "modulation_spec": {**spec, "insertions": []},
                "seed": seed,
            },
        )
        fetched = _call(send, {"op": "get", "artifact_id": reply["artifact_id"]})
        image = np.asarray(fetched["data"], dtype=float)

    seg_masks: dict[str, RegionMask] = {}
    seg_union: RegionMask | None = None
    if plan.insertions:
        img_id = _call(send, {"op": "put", "kind": "image", "data": image.tolist()})[
            "artifact_id"
        ]
        traj_id = _call(send, {"op": "invert", "image_id": img_id, "prompt": scene_caption})[
            "artifact_id"
        ]
        reply = _call(
            send,
            {
                "op": "sample",
                "latents": traj_id,
                "prompt": plan.combined_prompt,
                "modulation_spec": {
                    **spec,
                    "masks": [],
                    "insertions": plan_to_wire(plan)["insertions"],
                },
                "seed": seed,
                "seg_image_id": seg_image_id,
            },
        )
        seg_masks = {
            nid: mask_from_rle(rle, width, height)
            for nid, rle in reply.get("segments", {}).items()
        }
        seg_union = mask_union(list(seg_masks.values())) if seg_masks else None
        fetched = _call(send, {"op": "get", "artifact_id": reply["artifact_id"]})
        image = np.asarray(fetched["data"], dtype=float)

    graph = plan.target_graph
    if seg_masks:
        from dataclasses import replace as dc_replace

        nodes = []
        for node in graph.nodes:
            if node.id in seg_masks:
                mask = seg_masks[node.id]
                nodes.append(
                    dc_replace(node, mask=mask, bbox=mask.tight_bbox(), ungrounded=False)
                )
            else:
                nodes.append(node)
        graph = SceneGraph(graph.width, graph.height, tuple(nodes), graph.edges)

    touched = [m for m in (removal_mask, seg_union) if m is not None]
    edit_region = mask_union(touched) if touched else RegionMask.zeros(width, height)
    return ExecutionResult(
        image=image,
        graph=graph,
        edit_region=edit_region,
        removal_mask=removal_mask,
        seg_masks=seg_masks,
    )
