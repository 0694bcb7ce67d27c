"""Small synthetic scenes for the toy backend, plus PNG plumbing.

Images are 32x32 RGB floats in [0, 1], painted in 4x4-aligned rectangles so
the backend's block encoder represents them exactly. `demo_scene` bundles
one ready-to-use scene: the image, its PNG bytes, segmenter seeds, and the
scripted provider's scene description.
"""

from __future__ import annotations

import base64
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .parser import ImageHandle
from .regions import BoundingBox, RegionMask, mask_to_rle, rasterize_box
from .scripted import SceneScript

SIZE = 32


def canvas(color=(0.5, 0.5, 0.5)) -> np.ndarray:
    return np.ones((SIZE, SIZE, 3), dtype=float) * np.asarray(color, dtype=float)


def paint_rect(image: np.ndarray, box: BoundingBox, color) -> np.ndarray:
    """New image with the box's pixels set to `color` (pixel-center rule)."""
    out = image.copy()
    bits = rasterize_box(box, image.shape[1], image.shape[0]).bits.astype(bool)
    out[bits] = np.asarray(color, dtype=float)
    return out


def image_to_png(image: np.ndarray) -> bytes:
    arr = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_to_image(png: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(png)) as im:
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=float) / 255.0


def png_to_b64(png: bytes) -> str:
    return base64.b64encode(png).decode("ascii")


def b64_to_png(data: str) -> bytes:
    return base64.b64decode(data, validate=True)


def handle_for(image_id: str, png: bytes) -> ImageHandle:
    digest = hashlib.sha256(png).hexdigest()
    with Image.open(io.BytesIO(png)) as im:
        width, height = im.size
    return ImageHandle(id=image_id, sha256=digest, width=width, height=height)


def _mask_for(box: BoundingBox) -> RegionMask:
    return rasterize_box(box, SIZE, SIZE)


@dataclass(frozen=True)
class SceneBundle:
    """A painted scene plus everything the scripted pipeline needs to see it."""

    image_id: str
    image: np.ndarray
    png: bytes
    handle: ImageHandle
    script: SceneScript
    segmenter_seeds: dict
    object_boxes: dict[str, BoundingBox] = field(default_factory=dict)


TABLE_BOX = BoundingBox(4 / 32, 16 / 32, 28 / 32, 28 / 32)
CUBE_BOX = BoundingBox(12 / 32, 8 / 32, 20 / 32, 16 / 32)


def demo_scene(image_id: str = "demo") -> SceneBundle:
    """A red cube on a grey table against a light wall."""
    image = canvas((0.62, 0.64, 0.66))
    image = paint_rect(image, TABLE_BOX, (0.45, 0.38, 0.30))
    image = paint_rect(image, CUBE_BOX, (0.85, 0.12, 0.10))
    png = image_to_png(image)

    def candidate(box: BoundingBox, score: float) -> dict:
        return {"mask": mask_to_rle(_mask_for(box)), "bbox": box.as_list(), "score": score}

    seeds = {
        image_id: {
            "size": [SIZE, SIZE],
            "phrases": {
                "red cube": [candidate(CUBE_BOX, 0.95)],
                "table": [candidate(TABLE_BOX, 0.90)],
            },
        }
    }
    script = SceneScript(
        caption="A red cube sits on a wooden table in a bright room.",
        objects=("red cube", "table", {"label": "wall", "background": True}),
        relations=(("red cube", "on", "table"),),
        node_captions={
            "red cube": "A small matte red cube with sharp edges.",
            "table": "A plain wooden table with a flat top.",
            "wall": "A plain light grey wall.",
        },
    )
    return SceneBundle(
        image_id=image_id,
        image=image,
        png=png,
        handle=handle_for(image_id, png),
        script=script,
        segmenter_seeds=seeds,
        object_boxes={"red cube": CUBE_BOX, "table": TABLE_BOX},
    )
