"""Open-vocabulary segmenter handles: seeded mock and HTTP worker client.

Wire protocol: request `{"image_id": ..., "phrase": ...}`, reply
`{"candidates": [{"mask": "rle:...", "bbox": [x0,y0,x1,y1], "score": s}]}`.
The mock serves candidates from a seed table; the remote client speaks the
same protocol to a segmentation worker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .regions import BoundingBox, RegionMask, mask_from_rle, mask_to_rle


class SegmenterUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class SegmentCandidate:
    mask: RegionMask
    bbox: BoundingBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


class SegmenterHandle(Protocol):
    def segment(self, image_id: str, phrase: str) -> list[SegmentCandidate]: ...


def select_candidate(candidates: Sequence[SegmentCandidate]) -> SegmentCandidate | None:
    """Best candidate: highest score, then larger mask, then top-left box."""
    if not candidates:
        return None
    return min(
        candidates,
        key=lambda c: (-c.score, -c.mask.area, c.bbox.y0, c.bbox.x0),
    )


def candidate_to_wire(c: SegmentCandidate) -> dict:
    return {"mask": mask_to_rle(c.mask), "bbox": c.bbox.as_list(), "score": c.score}


def candidate_from_wire(wire: dict, size: tuple[int, int]) -> SegmentCandidate:
    return SegmentCandidate(
        mask=mask_from_rle(wire["mask"], size[0], size[1]),
        bbox=BoundingBox(*wire["bbox"]),
        score=float(wire["score"]),
    )


class MockSegmenter:
    """Serves pre-seeded candidates per (image id, phrase); else none.

    Seed table shape:
        {"<image_id>": {"size": [W, H], "phrases": {"<phrase>": [cand...]}}}
    """

    def __init__(self, seeds: dict):
        self.seeds = seeds

    @classmethod
    def from_file(cls, path: str | Path) -> "MockSegmenter":
        with Path(path).open(encoding="utf-8") as fh:
            return cls(json.load(fh))

    def segment(self, image_id: str, phrase: str) -> list[SegmentCandidate]:
        entry = self.seeds.get(image_id)
        if entry is None:
            return []
        size = tuple(entry["size"])
        raw = entry.get("phrases", {}).get(phrase, [])
        return [candidate_from_wire(c, size) for c in raw]


class RemoteSegmenter:
    """HTTP client for a segmentation worker speaking the wire protocol."""

    def __init__(self, base_url: str, image_size: tuple[int, int]):
        self.base_url = base_url.rstrip("/")
        self.image_size = image_size

    def segment(self, image_id: str, phrase: str) -> list[SegmentCandidate]:
        import requests

        try:
            resp = requests.post(
                self.base_url + "/segment",
                json={"image_id": image_id, "phrase": phrase},
                timeout=60,
            )
            resp.raise_for_status()
            payload = resp.json()
        except Exception as exc:  # noqa: BLE001 - one failure kind at this boundary
            raise SegmenterUnavailable(f"{self.base_url}: {exc}") from exc
        return [candidate_from_wire(c, self.image_size) for c in payload["candidates"]]
