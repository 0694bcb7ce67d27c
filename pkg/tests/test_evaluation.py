"""Evaluator: checklist derivation, score arithmetic, background fidelity."""

from __future__ import annotations

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from sgedit.evaluation import (
    EC_SCALE,
    IQ_ASPECTS,
    IQ_SCALE,
    RA_SCALE,
    BackgroundReport,
    Checklist,
    ChecklistItem,
    DegenerateInput,
    EditReport,
    EmptyRegion,
    MetricResult,
    background_metrics,
    build_checklists,
    evaluate_edit,
    pearson,
    score_checklist,
    snap_binary,
)
from sgedit.gateway import MalformedReply
from sgedit.graph import apply_delta, delta_from_wire
from sgedit.regions import RegionMask, rasterize_box, BoundingBox
from sgedit.scripted import ScriptedProvider

from session_flow import ADD_DELTA, REMOVE_DELTA, REPLACE_DELTA


def empty_region(w=32, h=32) -> RegionMask:
    return RegionMask.zeros(w, h)


# --- checklist derivation -----------------------------------------------------------


def test_checklists_for_replacement(parsed):
    target = apply_delta(parsed.graph, delta_from_wire(REPLACE_DELTA, parsed.graph))
    lists = build_checklists(parsed.graph, target)
    assert [it.description for it in lists["element-composition"].items] == [
        "the red cube is replaced by green sphere",
        "the table is preserved",
        "the wall is preserved",
    ]
    assert all(it.scale == EC_SCALE for it in lists["element-composition"].items)
    assert [it.description for it in lists["relation-alignment"].items] == [
        "the green sphere is on the table"
    ]
    assert [it.description for it in lists["image-quality"].items] == list(IQ_ASPECTS)
    assert all(it.scale == IQ_SCALE for it in lists["image-quality"].items)


def test_checklists_for_remove_and_add(parsed):
    delta = {"actions": REMOVE_DELTA["actions"] + ADD_DELTA["actions"]}
    target = apply_delta(parsed.graph, delta_from_wire(delta, parsed.graph))
    lists = build_checklists(parsed.graph, target)
    assert [it.description for it in lists["element-composition"].items] == [
        "the red cube is removed",
        "the table is preserved",
        "the wall is preserved",
        "the blue ball is added",
    ]
    assert [it.description for it in lists["relation-alignment"].items] == [
        "the blue ball is on the table"
    ]


# --- score arithmetic ---------------------------------------------------------------


def test_snap_binary_midpoint_rounds_down():
    assert snap_binary(3.0, 3) == 3.0
    assert snap_binary(2.0, 3) == 3.0
    assert snap_binary(1.5, 3) == 0.0
    assert snap_binary(1.0, 3) == 0.0
    assert snap_binary(1.0, 2) == 0.0


def test_normalized_score_oracles():
    items = tuple(ChecklistItem(f"item {i}", EC_SCALE) for i in range(4))
    assert MetricResult("element-composition", items, (3.0, 3.0, 0.0, 3.0)).normalized == 0.75
    assert MetricResult("element-composition", (), ()).normalized == 1.0
    mixed = (ChecklistItem("a", 3), ChecklistItem("b", 2))
    assert MetricResult("m", mixed, (3.0, 1.0)).normalized == pytest.approx(0.75)


def checklist(metric: str, n: int, scale: int) -> Checklist:
    return Checklist(metric, tuple(ChecklistItem(f"item {i}", scale) for i in range(n)))


def test_score_checklist_full_marks_by_default(bundle):
    provider = ScriptedProvider()
    result = score_checklist(
        checklist("element-composition", 3, EC_SCALE), bundle.handle, bundle.handle, provider
    )
    assert result.scores == (3.0, 3.0, 3.0)
    assert result.normalized == 1.0 and result.notes == ()


def test_score_checklist_applies_overrides(bundle):
    provider = ScriptedProvider(checklist_scores={"element-composition": [3, 3, 0, 3]})
    result = score_checklist(
        checklist("element-composition", 4, EC_SCALE), bundle.handle, bundle.handle, provider
    )
    assert result.scores == (3.0, 3.0, 0.0, 3.0)
    assert result.normalized == 0.75


def test_score_checklist_clamps_and_notes(bundle):
    provider = ScriptedProvider(checklist_scores={"image-quality": [5, -1, 2, 2]})
    result = score_checklist(
        checklist("image-quality", 4, IQ_SCALE), bundle.handle, bundle.handle, provider
    )
    assert result.scores == (2.0, 0.0, 2.0, 2.0)
    assert len(result.notes) == 2 and "clamped" in result.notes[0]


def test_score_checklist_snaps_relation_scores(bundle):
    provider = ScriptedProvider(checklist_scores={"relation-alignment": [2, 1]})
    result = score_checklist(
        checklist("relation-alignment", 2, RA_SCALE), bundle.handle, bundle.handle, provider
    )
    assert result.scores == (3.0, 0.0)


def test_score_checklist_rejects_wrong_count(bundle):
    provider = ScriptedProvider(checklist_scores={"element-composition": [3, 3]})
    with pytest.raises(Exception):  # scripted refuses before the gateway can parse
        score_checklist(
            checklist("element-composition", 3, EC_SCALE), bundle.handle, bundle.handle, provider
        )


class FlatProvider:
    """Replies with a fixed scores list regardless of the checklist length."""

    def __init__(self, scores):
        self.reply = "scores: " + str(list(scores))

    def complete(self, turns):
        return self.reply


def test_score_checklist_rejects_length_mismatch_from_provider(bundle):
    with pytest.raises(MalformedReply):
        score_checklist(
            checklist("image-quality", 4, IQ_SCALE), bundle.handle, bundle.handle, FlatProvider([2, 2])
        )


def test_empty_checklist_short_circuits(bundle):
    class Exploding:
        def complete(self, turns):  # pragma: no cover - must never run
            raise AssertionError("provider should not be called")

    result = score_checklist(
        Checklist("relation-alignment", ()), bundle.handle, bundle.handle, Exploding()
    )
    assert result.normalized == 1.0 and result.scores == ()


# --- report wire ---------------------------------------------------------------------


def test_evaluate_edit_report_wire(parsed, bundle):
    target = apply_delta(parsed.graph, delta_from_wire(REPLACE_DELTA, parsed.graph))
    provider = ScriptedProvider(checklist_scores={"element-composition": [3, 3, 0]})
    bg = BackgroundReport(mse=0.0, psnr_db=100.0, ssim=1.0, pixels=900, ssim_pixels=400)
    report = evaluate_edit(
        "edit-0001", parsed.graph, target, bundle.handle, bundle.handle, provider, bg
    )
    wire = report.to_wire()
    assert wire["edit_id"] == "edit-0001"
    assert wire["ec"] == pytest.approx(2 / 3, abs=1e-6)
    assert wire["ra"] == 1.0 and wire["iq"] == 1.0
    assert [c["metric"] for c in wire["checklists"]] == [
        "element-composition",
        "relation-alignment",
        "image-quality",
    ]
    ec_items = wire["checklists"][0]["items"]
    assert ec_items[2] == {"description": "the wall is preserved", "scale": 3, "score": 0.0}
    assert wire["background"] == bg.to_wire()
    assert "notes" not in wire


def test_report_notes_surface_in_wire(bundle, parsed):
    result = MetricResult(
        "image-quality",
        (ChecklistItem("a", 2),),
        (2.0,),
        notes=("score 5 for 'a' clamped to 2.0",),
    )
    full = {
        "element-composition": MetricResult("element-composition", (), ()),
        "relation-alignment": MetricResult("relation-alignment", (), ()),
        "image-quality": result,
    }
    wire = EditReport("edit-0002", full).to_wire()
    assert wire["notes"] == ["score 5 for 'a' clamped to 2.0"]
    assert "background" not in wire


# --- agreement ------------------------------------------------------------------------


def test_pearson_closed_form():
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(15 / np.sqrt(228), abs=1e-12)
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)
    assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_matches_numpy_corrcoef():
    rng = np.random.default_rng(0)
    for _ in range(25):
        x = rng.normal(size=40)
        y = rng.normal(size=40)
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-9)


def test_pearson_rejects_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        pearson([1.0], [2.0])
    with pytest.raises(DegenerateInput):
        pearson([1, 2, 3], [5, 5, 5])
    with pytest.raises(DegenerateInput):
        pearson([1, 2], [1, 2, 3])


# --- background fidelity ----------------------------------------------------------------


def test_uniform_offset_gives_20db():
    rng = np.random.default_rng(1)
    source = rng.uniform(0.2, 0.7, size=(32, 32, 3))
    report = background_metrics(source, source + 0.1, empty_region())
    assert report.mse == pytest.approx(0.01, abs=1e-12)
    assert report.psnr_db == pytest.approx(20.0, abs=1e-9)
    assert report.pixels == 32 * 32
    assert report.ssim_pixels == 22 * 22


def test_identical_images_hit_the_psnr_cap():
    img = np.random.default_rng(2).uniform(size=(32, 32, 3))
    report = background_metrics(img, img.copy(), empty_region())
    assert report.mse == 0.0 and report.psnr_db == 100.0
    assert report.ssim == pytest.approx(1.0, abs=1e-12)


def test_ssim_matches_skimage_on_full_frames():
    rng = np.random.default_rng(3)
    a = rng.uniform(size=(32, 32, 3))
    b = np.clip(a + rng.normal(scale=0.05, size=a.shape), 0.0, 1.0)
    ours = background_metrics(a, b, empty_region()).ssim
    reference = np.mean(
        [
            structural_similarity(
                a[..., c],
                b[..., c],
                win_size=11,
                gaussian_weights=True,
                sigma=1.5,
                use_sample_covariance=False,
                data_range=1.0,
            )
            for c in range(3)
        ]
    )
    assert ours == pytest.approx(reference, abs=1e-9)


def test_ssim_masked_region_matches_skimage_map():
    rng = np.random.default_rng(4)
    a = rng.uniform(size=(40, 40, 3))
    b = np.clip(a + rng.normal(scale=0.03, size=a.shape), 0.0, 1.0)
    region = rasterize_box(BoundingBox(0.0, 0.0, 0.5, 0.5), 40, 40)
    report = background_metrics(a, b, region)

    include = region.complement().bits.astype(bool)
    padded = np.pad(include, 5, mode="constant", constant_values=False)
    eroded = np.lib.stride_tricks.sliding_window_view(padded, (11, 11)).all(axis=(2, 3))
    inner = eroded[5:-5, 5:-5]
    expected = np.mean(
        [
            structural_similarity(
                a[..., c],
                b[..., c],
                win_size=11,
                gaussian_weights=True,
                sigma=1.5,
                use_sample_covariance=False,
                data_range=1.0,
                full=True,
            )[1][5:-5, 5:-5][inner].mean()
            for c in range(3)
        ]
    )
    assert report.ssim == pytest.approx(expected, abs=1e-9)
    assert report.ssim_pixels == int(inner.sum())
    assert report.pixels == int(include.sum())


def test_background_rejects_empty_or_sliver_regions():
    img = np.zeros((32, 32, 3))
    full = RegionMask(32, 32, np.ones((32, 32), dtype=np.uint8))
    with pytest.raises(EmptyRegion):
        background_metrics(img, img, full)
    # a 4-pixel strip survives the complement but no 11x11 window fits
    bits = np.ones((32, 32), dtype=np.uint8)
    bits[:, :4] = 0
    with pytest.raises(EmptyRegion):
        background_metrics(img, img, RegionMask(32, 32, bits))
    with pytest.raises(DegenerateInput):
        background_metrics(img, np.zeros((16, 16, 3)), empty_region())
