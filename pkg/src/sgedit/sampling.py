"""Sampling orchestration: inversion, removal, and phased insertion.

The flows here drive any backend exposing encode/decode/denoise_step/
invert_step. Removal samples under the background-only prompt with the
self-attention stream substituted by cached source features (removed cells
excluded) and the region outside the removal mask pinned to the source
trajectory. Insertion runs three phases over normalized time: independent
per-object samplers (until T_m), one merged sampler under the combined
prompt (until T_n), then plain denoising composited with the background
trajectory through the segmented object masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .attention import AllMasked, CorrespondenceMatrix, LambdaSchedule, build_correspondence
from .backend import (
    InsertionHook,
    RemovalHook,
    flatten_latent,
    normalize_token,
    unflatten_latent,
)
from .controller import EditPlan
from .graph import SceneGraph
from .regions import (
    RegionMask,
    SegmentMap,
    compose_generation_map,
    downsample_mask,
    mask_to_rle,
    mask_union,
    rasterize_box,
)
from .segmenter import SegmenterHandle, select_candidate

LATENT = 8


class EmptyInsertion(ValueError):
    pass


@dataclass(frozen=True)
class PhaseSchedule:
    """Normalized phase boundaries and their exact step allocation.

    Steps are integers: round((1-t_m)*n) per-object steps, round((t_m-t_n)*n)
    combined-prompt steps, round(t_n*n) blending steps; the three must sum
    to n or the schedule is rejected.
    """

    t_m: float = 0.8
    t_n: float = 0.6
    n: int = 20

    def __post_init__(self):
        if not (1.0 > self.t_m > self.t_n > 0.0):
            raise ValueError(f"need 1 > t_m > t_n > 0, got t_m={self.t_m}, t_n={self.t_n}")
        if self.n < 1:
            raise ValueError("need at least one step")
        if sum(self.step_counts()) != self.n:
            raise ValueError(f"phase rounding does not cover {self.n} steps")

    def step_counts(self) -> tuple[int, int, int]:
        multi = round((1.0 - self.t_m) * self.n)
        merge = round((self.t_m - self.t_n) * self.n)
        blend = round(self.t_n * self.n)
        return multi, merge, blend

    def phase_at(self, step: int) -> str:
        """Phase of sampling step `step` (steps run n, n-1, ..., 1)."""
        multi, merge, blend = self.step_counts()
        if step > self.n - multi:
            return "multi"
        if step > blend:
            return "merge"
        return "blend"

    def to_wire(self) -> dict:
        return {"t_m": self.t_m, "t_n": self.t_n, "n": self.n}

    @classmethod
    def from_wire(cls, wire: dict) -> "PhaseSchedule":
        return cls(float(wire["t_m"]), float(wire["t_n"]), int(wire["n"]))


@dataclass(frozen=True)
class ModulationSpec:
    """Declarative description of the attention modulation for a worker."""

    size: tuple[int, int] = (32, 32)  # image resolution the RLE masks use
    masks: tuple[str, ...] = ()  # removal masks, RLE at image resolution
    segment_map: str | None = None  # labeled insertion map, RLE of labels>0 union
    lam: LambdaSchedule = LambdaSchedule()
    phase_schedule: PhaseSchedule = PhaseSchedule()

    def to_wire(self) -> dict:
        return {
            "size": list(self.size),
            "masks": list(self.masks),
            "segment_map": self.segment_map,
            "lambda": self.lam.to_wire(),
            "phase_schedule": self.phase_schedule.to_wire(),
        }


@dataclass(frozen=True)
class SamplingTrajectory:
    """Inverted latents z_0..z_N plus per-step attention caches.

    `latents[i]` is the latent at step index i (0 clean, N noisiest). The
    cache for step i holds, per hooked layer, the (K, V) the source pass
    produces when denoising from `latents[i]`.
    """

    prompt: str
    latents: tuple[np.ndarray, ...]
    caches: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.latents) - 1

    def z(self, i: int) -> np.ndarray:
        return self.latents[i]

    def source_values(self, i: int, layer: str = "l0") -> np.ndarray:
        return self.caches[i][layer][1]


def ddim_invert(image: np.ndarray, prompt: str, backend) -> SamplingTrajectory:
    """Invert an image into the backend's noise space, caching K/V per step."""
    z = backend.encode(image)
    latents = [z]
    caches: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
    for i in range(1, backend.steps + 1):
        z = backend.invert_step(z, i, prompt)
        latents.append(z)
        k, v = backend.source_kv(z)
        caches[i] = {layer: (k, v) for layer in backend.hooked_layers}
    return SamplingTrajectory(prompt, tuple(latents), caches)


def replay_sample(traj: SamplingTrajectory, backend) -> np.ndarray:
    """Plain forward sampling from z_N under the inversion prompt."""
    z = traj.z(traj.steps)
    for i in range(traj.steps, 0, -1):
        z = backend.denoise_step(z, i, traj.prompt)
    return z


def _latent_cells(mask: RegionMask) -> np.ndarray:
    """Image-resolution mask -> flat boolean vector over latent cells."""
    return downsample_mask(mask, LATENT, LATENT).bits.ravel().astype(bool)


def run_removal(
    traj: SamplingTrajectory,
    m_rm: RegionMask,
    y_non: str,
    backend,
    seed: int | np.random.SeedSequence = 0,
) -> np.ndarray:
    """Erase the masked region: fresh noise inside, source pinned outside.

    Every step substitutes the cached source K/V with the removed cells
    excluded, so erased content cannot flow back in; the latent outside the
    mask is pinned to the source trajectory step by step.
    """
    removed = _latent_cells(m_rm)
    if removed.all():
        raise AllMasked("removal mask covers the entire latent")
    n = traj.steps
    rng = np.random.Generator(np.random.PCG64(seed))
    f = flatten_latent(traj.z(n)).copy()
    scale = float(np.sqrt(np.mean(f**2)))
    noise = rng.standard_normal((int(removed.sum()), f.shape[1]))
    f[removed] = scale * noise
    z = unflatten_latent(f)
    for i in range(n, 0, -1):
        hook = RemovalHook(v_source=traj.source_values(i), removed_cells=removed)
        z = backend.denoise_step(z, i, y_non, hook)
        f = flatten_latent(z).copy()
        f[~removed] = flatten_latent(traj.z(i - 1))[~removed]
        z = unflatten_latent(f)
    return z


def _token_segments(prompt: str, governed: dict[int, set[str]]) -> dict[int, int]:
    """Map each prompt token index to the insertion segment it invokes."""
    tokens = [normalize_token(t) for t in prompt.split() if normalize_token(t)]
    if not tokens:
        tokens = [""]
    mapping: dict[int, int] = {}
    for j, tok in enumerate(tokens):
        mapping[j] = 0
        for seg_id, words in governed.items():
            if tok in words:
                mapping[j] = seg_id
                break
    return mapping


def _governed_words(plan: EditPlan) -> dict[int, set[str]]:
    out: dict[int, set[str]] = {}
    for k, ins in enumerate(plan.insertions, start=1):
        if ins.token:
            out[k] = {normalize_token(ins.token)}
        else:
            out[k] = {normalize_token(w) for w in ins.label.split()}
    return out


@dataclass(frozen=True)
class InsertionResult:
    z0: np.ndarray
    seg_masks: dict[str, RegionMask]  # node id -> image-resolution object mask
    seg_union: RegionMask


def _cross_corr(
    segmap: SegmentMap, prompt: str, governed: dict[int, set[str]]
) -> CorrespondenceMatrix:
    return build_correspondence(segmap, "cross", _token_segments(prompt, governed))


def run_insertion(
    bg_traj: SamplingTrajectory,
    plan: EditPlan,
    schedule: PhaseSchedule,
    backend,
    segmenter: SegmenterHandle,
    seed: int | np.random.SeedSequence = 0,
    seg_image_id: str = "insertion-preview",
    lam: LambdaSchedule = LambdaSchedule(),
) -> InsertionResult:
    """Three-phase insertion over the background trajectory.

    Multi phase: each object samples independently under its single-object
    prompt, modulated toward its own region, blended with background-prompt
    noise outside it. Merge phase: one sampler under the combined prompt
    over the full generation map. At T_n the objects are segmented (best
    segmenter candidate per label, falling back to the planned box) and the
    blend phase composites the sampler with the background trajectory
    through those masks.
    """
    if not plan.insertions:
        raise EmptyInsertion("plan has no insertions")
    n = schedule.n
    if n != bg_traj.steps:
        raise ValueError(f"schedule covers {n} steps, trajectory has {bg_traj.steps}")
    size = plan.source_graph.image_size
    governed = _governed_words(plan)

    boxes = [(ins.bbox, k) for k, ins in enumerate(plan.insertions, start=1)]
    segmap_latent = compose_generation_map(boxes, (LATENT, LATENT))
    regions = {
        k: (segmap_latent.labels.ravel() == k) for k in range(1, len(plan.insertions) + 1)
    }
    non_region = segmap_latent.labels.ravel() == 0

    per_object_maps = {
        k: SegmentMap(
            LATENT, LATENT, np.where(segmap_latent.labels == k, k, 0)
        )
        for k in regions
    }
    self_corr_full = build_correspondence(segmap_latent, "self")

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(plan.insertions))

    # Per-object samplers start from the background noise latent with fresh
    # noise inside their own region.
    z_top = bg_traj.z(n)
    scale = float(np.sqrt(np.mean(flatten_latent(z_top) ** 2)))
    samplers: list[np.ndarray] = []
    for k, ins in enumerate(plan.insertions, start=1):
        f = flatten_latent(z_top).copy()
        rng = np.random.Generator(np.random.PCG64(children[k - 1]))
        f[regions[k]] = scale * rng.standard_normal((int(regions[k].sum()), f.shape[1]))
        samplers.append(unflatten_latent(f))
    z_background = z_top

    y_non = plan.non_object_prompt
    y_gen = plan.combined_prompt
    merged: np.ndarray | None = None
    seg_masks: dict[str, RegionMask] = {}
    seg_latent = np.zeros(LATENT * LATENT, dtype=bool)
    seg_union: RegionMask | None = None

    for i in range(n, 0, -1):
        phase = schedule.phase_at(i)
        if phase == "multi":
            lam_t = lam.value(i / n)
            for idx, ins in enumerate(plan.insertions):
                k = idx + 1
                hook = InsertionHook(
                    self_corr=build_correspondence(per_object_maps[k], "self"),
                    cross_corr=_cross_corr(
                        per_object_maps[k], ins.single_object_prompt, {k: governed[k]}
                    ),
                    lam=lam_t,
                )
                z_obj = backend.denoise_step(samplers[idx], i, ins.single_object_prompt, hook)
                z_amb = backend.denoise_step(samplers[idx], i, y_non)
                f = flatten_latent(z_amb).copy()
                f[regions[k]] = flatten_latent(z_obj)[regions[k]]
                samplers[idx] = unflatten_latent(f)
            z_background = backend.denoise_step(z_background, i, y_non)
            continue

        if merged is None:
            # Entering the merge phase: stitch the per-object samplers and
            # the background sampler into one latent.
            f = flatten_latent(z_background).copy()
            for k in regions:
                f[regions[k]] = flatten_latent(samplers[k - 1])[regions[k]]
            merged = unflatten_latent(f)

        if phase == "merge":
            lam_t = lam.value(i / n)
            hook = InsertionHook(
                self_corr=self_corr_full,
                cross_corr=_cross_corr(segmap_latent, y_gen, governed),
                lam=lam_t,
            )
            z_gen = backend.denoise_step(merged, i, y_gen, hook)
            z_amb = backend.denoise_step(merged, i, y_non)
            f = flatten_latent(z_amb).copy()
            f[~non_region] = flatten_latent(z_gen)[~non_region]
            merged = unflatten_latent(f)
            continue

        if seg_union is None:
            # Entering the blend phase: segment the partially generated
            # objects to get precise masks.
            backend.decode(merged)  # the preview the segmenter would see
            for k, ins in enumerate(plan.insertions, start=1):
                best = select_candidate(segmenter.segment(seg_image_id, ins.label))
                mask = best.mask if best is not None else rasterize_box(ins.bbox, *size)
                if mask.is_empty():
                    mask = rasterize_box(ins.bbox, *size)
                seg_masks[ins.node_id] = mask
            seg_union = mask_union(list(seg_masks.values()))
            seg_latent = _latent_cells(seg_union)

        z_gen = backend.denoise_step(merged, i, y_gen)
        f = flatten_latent(z_gen).copy()
        f[~seg_latent] = flatten_latent(bg_traj.z(i - 1))[~seg_latent]
        merged = unflatten_latent(f)

    assert merged is not None and seg_union is not None
    return InsertionResult(z0=merged, seg_masks=seg_masks, seg_union=seg_union)


def _composite(edited: np.ndarray, source: np.ndarray, region: RegionMask) -> np.ndarray:
    """Per-pixel: edited inside the region, source outside."""
    w = region.bits[..., None].astype(edited.dtype)
    return w * edited + (1.0 - w) * source


@dataclass(frozen=True)
class ExecutionResult:
    image: np.ndarray
    graph: SceneGraph
    edit_region: RegionMask  # union of everything the edit was allowed to touch
    removal_mask: RegionMask | None
    seg_masks: dict[str, RegionMask]


def execute_plan(
    plan: EditPlan,
    source_image: np.ndarray,
    scene_caption: str,
    backend,
    segmenter: SegmenterHandle,
    seed: int = 0,
    schedule: PhaseSchedule | None = None,
    lam: LambdaSchedule = LambdaSchedule(),
    seg_image_id: str = "insertion-preview",
) -> ExecutionResult:
    """Removals first (one pass over the unioned mask), then insertions.

    The final image is composited at image resolution: outside the removal
    mask and the segmented insertion masks the source pixels pass through
    untouched.
    """
    width, height = plan.source_graph.image_size
    if not plan.removals and not plan.insertions:
        empty = RegionMask.zeros(width, height)
        return ExecutionResult(source_image, plan.target_graph, empty, None, {})

    schedule = schedule or PhaseSchedule(n=backend.steps)
    ss = np.random.SeedSequence(seed)
    seed_rm, seed_ins = ss.spawn(2)

    image = source_image
    removal_mask: RegionMask | None = None
    if plan.removals:
        removal_mask = mask_union([mask for _, mask in plan.removals])
        traj = ddim_invert(image, scene_caption, backend)
        z0 = run_removal(traj, removal_mask, plan.non_object_prompt, backend, seed_rm)
        image = _composite(backend.decode(z0), image, removal_mask)

    seg_masks: dict[str, RegionMask] = {}
    seg_union: RegionMask | None = None
    if plan.insertions:
        bg_traj = ddim_invert(image, scene_caption, backend)
        result = run_insertion(
            bg_traj, plan, schedule, backend, segmenter, seed_ins, seg_image_id, lam
        )
        seg_masks = result.seg_masks
        seg_union = result.seg_union
        image = _composite(backend.decode(result.z0), image, seg_union)

    graph = plan.target_graph
    if seg_masks:
        nodes = []
        for node in graph.nodes:
            if node.id in seg_masks:
                mask = seg_masks[node.id]
                nodes.append(
                    dc_replace(
                        node, mask=mask, bbox=mask.tight_bbox(), ungrounded=False
                    )
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


def modulation_spec_for(plan: EditPlan, schedule: PhaseSchedule, lam: LambdaSchedule) -> ModulationSpec:
    """Declarative modulation description exported over the worker wire."""
    segment_map = None
    if plan.insertions:
        width, height = plan.source_graph.image_size
        boxes = [(ins.bbox, k) for k, ins in enumerate(plan.insertions, start=1)]
        segmap = compose_generation_map(boxes, (width, height))
        segment_map = mask_to_rle(
            RegionMask(width, height, (segmap.labels > 0).astype(np.uint8))
        )
    return ModulationSpec(
        size=plan.source_graph.image_size,
        masks=tuple(mask_to_rle(mask) for _, mask in plan.removals),
        segment_map=segment_map,
        lam=lam,
        phase_schedule=schedule,
    )
