"""Edit evaluation: graph-derived checklists and background fidelity.

Three checklist metrics, each scored by an LLM shown the source and edited
images side by side: element composition (every intended removal/addition/
replacement happened and everything else survived, scale 3), relation
alignment (every target-graph relation holds, scale 3, scores snap to
{0, 3}), and image quality (four fixed aspects, scale 2). Reported scores
are normalized to [0, 1] by dividing each item by its scale and averaging.

Background fidelity is computed directly: MSE/PSNR over the pixels the edit
was not allowed to touch, and mean SSIM (11x11 gaussian window, sigma 1.5)
over the same region eroded so every window fits inside it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .gateway import MalformedReply, ProviderHandle, complete_chat, parse_tagged_reply, render_template
from .graph import SceneGraph
from .parser import ImageHandle
from .prompts import SCORE_CHECKLIST
from .regions import RegionMask

PSNR_CAP_DB = 100.0

EC_SCALE = 3
RA_SCALE = 3
IQ_SCALE = 2

IQ_ASPECTS = (
    "no anomalies such as distorted faces, limbs, or object boundaries",
    "inserted or revealed content matches the scene's texture and color",
    "lighting and shadows stay consistent with the original background",
    "the edited image is overall realistic",
)


class DegenerateInput(ValueError):
    pass


class EmptyRegion(ValueError):
    pass


@dataclass(frozen=True)
class ChecklistItem:
    description: str
    scale: int


@dataclass(frozen=True)
class Checklist:
    metric: str  # "element-composition" | "relation-alignment" | "image-quality"
    items: tuple[ChecklistItem, ...]


def _label(graph: SceneGraph, node_id: str) -> str:
    return graph.node(node_id).label if graph.has_node(node_id) else node_id


def build_checklists(source: SceneGraph, target: SceneGraph) -> dict[str, Checklist]:
    """Derive the three checklists from the source/target graph pair."""
    src_ids = set(source.node_ids())
    tgt_ids = set(target.node_ids())

    ec_items: list[ChecklistItem] = []
    for node_id in [i for i in source.node_ids() if i not in tgt_ids]:
        ec_items.append(ChecklistItem(f"the {_label(source, node_id)} is removed", EC_SCALE))
    for node_id in [i for i in source.node_ids() if i in tgt_ids]:
        before, after = source.node(node_id), target.node(node_id)
        if before.label != after.label:
            ec_items.append(
                ChecklistItem(f"the {before.label} is replaced by {after.label}", EC_SCALE)
            )
        else:
            ec_items.append(ChecklistItem(f"the {before.label} is preserved", EC_SCALE))
    for node_id in [i for i in target.node_ids() if i not in src_ids]:
        ec_items.append(ChecklistItem(f"the {_label(target, node_id)} is added", EC_SCALE))

    ra_items = tuple(
        ChecklistItem(
            f"the {_label(target, e.s)} is {e.p} the {_label(target, e.o)}", RA_SCALE
        )
        for e in target.edges
    )

    iq_items = tuple(ChecklistItem(aspect, IQ_SCALE) for aspect in IQ_ASPECTS)

    return {
        "element-composition": Checklist("element-composition", tuple(ec_items)),
        "relation-alignment": Checklist("relation-alignment", ra_items),
        "image-quality": Checklist("image-quality", iq_items),
    }


def snap_binary(score: float, scale: int) -> float:
    """Snap to {0, scale}, nearest wins, exact midpoint rounds down."""
    return float(scale) if score > scale / 2.0 else 0.0


@dataclass(frozen=True)
class MetricResult:
    metric: str
    items: tuple[ChecklistItem, ...]
    scores: tuple[float, ...]
    notes: tuple[str, ...] = ()

    @property
    def normalized(self) -> float:
        """Mean of per-item score/scale; an empty checklist scores 1.0."""
        if not self.items:
            return 1.0
        return float(
            np.mean([s / item.scale for s, item in zip(self.scores, self.items)])
        )


def score_checklist(
    checklist: Checklist,
    source: ImageHandle,
    edited: ImageHandle,
    provider: ProviderHandle,
) -> MetricResult:
    """One scoring conversation: both images attached, one score per item."""
    if not checklist.items:
        return MetricResult(checklist.metric, (), ())
    items_json = json.dumps(
        [{"description": it.description, "scale": it.scale} for it in checklist.items]
    )
    turns = render_template(
        SCORE_CHECKLIST,
        {"metric": checklist.metric, "items": items_json},
        attachments=(source.attachment(), edited.attachment()),
    )
    raw = parse_tagged_reply(complete_chat(turns, provider), "ChecklistReply")
    if len(raw) != len(checklist.items):
        raise MalformedReply(
            f"{checklist.metric} reply has {len(raw)} scores for "
            f"{len(checklist.items)} items"
        )
    notes: list[str] = []
    scores: list[float] = []
    for value, item in zip(raw, checklist.items):
        clamped = min(max(float(value), 0.0), float(item.scale))
        if clamped != value:
            notes.append(f"score {value} for {item.description!r} clamped to {clamped}")
        if checklist.metric == "relation-alignment":
            clamped = snap_binary(clamped, item.scale)
        scores.append(clamped)
    return MetricResult(checklist.metric, checklist.items, tuple(scores), tuple(notes))


_METRIC_KEYS = {
    "element-composition": "ec",
    "relation-alignment": "ra",
    "image-quality": "iq",
}


@dataclass(frozen=True)
class EditReport:
    edit_id: str
    results: dict[str, MetricResult]
    background: "BackgroundReport | None" = None

    def to_wire(self) -> dict:
        wire: dict = {"edit_id": self.edit_id}
        for metric, key in _METRIC_KEYS.items():
            wire[key] = round(self.results[metric].normalized, 6)
        wire["checklists"] = [
            {
                "metric": metric,
                "items": [
                    {"description": it.description, "scale": it.scale, "score": s}
                    for it, s in zip(r.items, r.scores)
                ],
            }
            for metric, r in self.results.items()
        ]
        notes = [n for r in self.results.values() for n in r.notes]
        if notes:
            wire["notes"] = notes
        if self.background is not None:
            wire["background"] = self.background.to_wire()
        return wire


def evaluate_edit(
    edit_id: str,
    source_graph: SceneGraph,
    target_graph: SceneGraph,
    source: ImageHandle,
    edited: ImageHandle,
    provider: ProviderHandle,
    background: "BackgroundReport | None" = None,
) -> EditReport:
    checklists = build_checklists(source_graph, target_graph)
    results = {
        metric: score_checklist(cl, source, edited, provider)
        for metric, cl in checklists.items()
    }
    return EditReport(edit_id, results, background)


# --- agreement -----------------------------------------------------------------


def pearson(xs, ys) -> float:
    """Pearson correlation; rejects short or constant inputs."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInput(f"shapes {x.shape} and {y.shape} do not align")
    if x.size < 2:
        raise DegenerateInput("need at least two pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = float(np.sqrt((dx**2).sum() * (dy**2).sum()))
    if denom == 0.0:
        raise DegenerateInput("an input is constant")
    return float((dx * dy).sum() / denom)


# --- background fidelity ---------------------------------------------------------

_SSIM_WIN = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2


def _gaussian_kernel() -> np.ndarray:
    r = _SSIM_WIN // 2
    ax = np.arange(-r, r + 1, dtype=float)
    g = np.exp(-(ax**2) / (2 * _SSIM_SIGMA**2))
    k = np.outer(g, g)
    return k / k.sum()


def _windows(img: np.ndarray) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(img, (_SSIM_WIN, _SSIM_WIN))


def _ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """SSIM over all fully-interior 11x11 windows of one channel."""
    k = _gaussian_kernel()
    wa, wb = _windows(a), _windows(b)
    ua = np.tensordot(wa, k, axes=((2, 3), (0, 1)))
    ub = np.tensordot(wb, k, axes=((2, 3), (0, 1)))
    uaa = np.tensordot(wa * wa, k, axes=((2, 3), (0, 1)))
    ubb = np.tensordot(wb * wb, k, axes=((2, 3), (0, 1)))
    uab = np.tensordot(wa * wb, k, axes=((2, 3), (0, 1)))
    va = uaa - ua**2
    vb = ubb - ub**2
    cov = uab - ua * ub
    num = (2 * ua * ub + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (ua**2 + ub**2 + _SSIM_C1) * (va + vb + _SSIM_C2)
    return num / den


def _erode(include: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion by a (2r+1)^2 square: True where the window is all True."""
    padded = np.pad(include, radius, mode="constant", constant_values=False)
    win = np.lib.stride_tricks.sliding_window_view(
        padded, (2 * radius + 1, 2 * radius + 1)
    )
    return win.all(axis=(2, 3))


@dataclass(frozen=True)
class BackgroundReport:
    mse: float
    psnr_db: float
    ssim: float
    pixels: int  # pixels the MSE/PSNR cover
    ssim_pixels: int  # pixels the SSIM mean covers (eroded region)

    def to_wire(self) -> dict:
        return {
            "mse": self.mse,
            "psnr_db": self.psnr_db,
            "ssim": self.ssim,
            "pixels": self.pixels,
            "ssim_pixels": self.ssim_pixels,
        }


def background_metrics(
    source: np.ndarray, edited: np.ndarray, edit_region: RegionMask
) -> BackgroundReport:
    """Fidelity of everything outside the edit region.

    PSNR assumes a [0, 1] signal range and is capped at 100 dB (a zero-MSE
    background would otherwise be infinite). SSIM uses the standard gaussian
    11x11 window and is averaged over the pixels whose whole window lies
    outside the edit region and inside the image.
    """
    if source.shape != edited.shape or source.ndim != 3:
        raise DegenerateInput(f"shapes {source.shape} and {edited.shape} do not align")
    include = edit_region.complement().bits.astype(bool)
    if not include.any():
        raise EmptyRegion("the edit region covers the whole image")

    diff = (source - edited)[include]
    mse = float(np.mean(diff**2))
    psnr = PSNR_CAP_DB if mse == 0.0 else min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)

    r = _SSIM_WIN // 2
    eroded = _erode(include, r)
    inner = eroded[r:-r, r:-r]  # align with the valid window grid
    if not inner.any():
        raise EmptyRegion("no full SSIM window fits outside the edit region")
    maps = [
        _ssim_map(source[..., c], edited[..., c])[inner] for c in range(source.shape[2])
    ]
    ssim = float(np.mean([m.mean() for m in maps]))

    return BackgroundReport(
        mse=mse,
        psnr_db=float(psnr),
        ssim=ssim,
        pixels=int(include.sum()),
        ssim_pixels=int(inner.sum()),
    )
