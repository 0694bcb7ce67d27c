"""HTTP service: the interactive editing loop over the engine.

Endpoints: POST /projects (parse an uploaded image), GET /projects/{id},
POST /projects/{id}/edits (plan preview), POST .../edits/{eid}/confirm
(launch execution), GET /jobs/{id} (poll), POST /projects/{id}/evaluate,
GET /projects/{id}/export (deterministic archive). POST /worker exposes the
diffusion-worker wire protocol backed by the same toy backend.

Jobs run on daemon threads; one writer per project (409 otherwise). Provider
failures surface as 502 with the pipeline stage that failed. Nothing reads
the clock, so a fixed request sequence reproduces identical state.
"""

from __future__ import annotations

import binascii
import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable

from fastapi import Body, FastAPI, HTTPException, Response

from .attention import LambdaSchedule
from .backend import ToyDenoiser
from .concepts import FinetuneReceipt, apply_receipt, emit_finetune_job, foreground_nodes
from .controller import MissingMask, plan_edit, plan_to_wire
from .evaluation import EmptyRegion, background_metrics, evaluate_edit
from .gateway import (
    MalformedReply,
    MemoryRecordingProvider,
    ProviderHandle,
    ProviderUnavailable,
    ReplayMiss,
)
from .graph import SceneGraph, apply_delta, delta_from_wire, graph_to_wire
from .parser import ImageHandle, parse_scene
from .project import (
    EditRecord,
    ProjectBusy,
    ProjectStore,
    UnknownEdit,
    UnknownJob,
    UnknownProject,
    export_archive,
)
from .regions import mask_from_rle, mask_to_rle
from .sampling import PhaseSchedule, execute_plan
from .segmenter import MockSegmenter, SegmenterHandle
from .toyimages import b64_to_png, demo_scene, handle_for, image_to_png, png_to_image
from .worker import ToyWorker


@dataclass
class ServiceConfig:
    provider: ProviderHandle | None = None
    segmenter: SegmenterHandle | None = None
    backend_factory: Callable[[], ToyDenoiser] = ToyDenoiser
    lam: LambdaSchedule = field(default_factory=LambdaSchedule)
    schedule: PhaseSchedule | None = None


def _fail(status: int, stage: str, message: str):
    raise HTTPException(status_code=status, detail={"stage": stage, "message": message})


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    """Build the service; defaults to the scripted demo scene end to end."""
    config = config or ServiceConfig()
    if config.provider is None or config.segmenter is None:
        bundle = demo_scene()
        if config.provider is None:
            from .scripted import ScriptedProvider

            config.provider = ScriptedProvider({bundle.image_id: bundle.script})
        if config.segmenter is None:
            config.segmenter = MockSegmenter(bundle.segmenter_seeds)

    app = FastAPI(title="sgedit", docs_url=None, redoc_url=None)
    try:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )
    except ImportError:  # pragma: no cover - middleware is part of fastapi
        pass

    store = ProjectStore()
    provider = MemoryRecordingProvider(config.provider)
    segmenter = config.segmenter
    worker = ToyWorker(config.backend_factory(), segmenter)
    app.state.store = store
    app.state.provider = provider
    app.state.worker = worker

    # -- helpers ----------------------------------------------------------

    def get_project(project_id: str):
        try:
            return store.project(project_id)
        except UnknownProject:
            _fail(404, "lookup", f"unknown project {project_id!r}")

    def learn_concepts(graph: SceneGraph) -> tuple[SceneGraph, dict | None]:
        """Submit the finetune job for every learnable foreground node."""
        learnable = [
            n
            for n in foreground_nodes(graph)
            if n.mask is not None and not n.ungrounded and n.caption
        ]
        if not learnable:
            return graph, None
        subgraph = SceneGraph(graph.width, graph.height, tuple(learnable))
        job = emit_finetune_job(subgraph)
        reply = worker.handle({"op": "finetune", "job": job.to_wire()})
        if "error" in reply:
            _fail(502, "finetune", reply["error"]["message"])
        receipt = reply["receipt"]
        return apply_receipt(graph, FinetuneReceipt.from_wire(receipt)), receipt

    def run_edit(project, record: EditRecord, job_id: str, seed: int):
        try:
            backend = config.backend_factory()
            schedule = config.schedule or PhaseSchedule(n=backend.steps)
            result = execute_plan(
                record.plan,
                record.base_image,
                project.scene_caption,
                backend,
                segmenter,
                seed=seed,
                schedule=schedule,
                lam=config.lam,
                seg_image_id=f"{record.id}-preview",
            )
            store.finish_job(
                job_id,
                result_image=result.image,
                result_png=image_to_png(result.image),
                result_graph=result.graph,
                edit_region_rle=mask_to_rle(result.edit_region),
            )
        except Exception as exc:  # job boundary: failures land in the record
            store.finish_job(job_id, error=f"{type(exc).__name__}: {exc}")

    # -- endpoints ----------------------------------------------------------

    @app.post("/projects", status_code=201)
    def create_project(payload: dict = Body(...)):
        encoded = payload.get("image_png_b64")
        if not isinstance(encoded, str) or not encoded:
            _fail(400, "upload", "image_png_b64 is required")
        try:
            png = b64_to_png(encoded)
            image = png_to_image(png)
        except (binascii.Error, ValueError, OSError) as exc:
            _fail(400, "upload", f"undecodable image: {exc}")
        image_id = payload.get("image_id") or hashlib.sha256(png).hexdigest()[:12]
        handle = handle_for(image_id, png)
        try:
            parsed = parse_scene(handle, provider, segmenter)
        except (ProviderUnavailable, ReplayMiss) as exc:
            _fail(502, "parse", str(exc))
        except MalformedReply as exc:
            _fail(502, "parse", str(exc))
        graph, receipt = learn_concepts(parsed.graph)
        project = store.add_project(
            image_id=image_id,
            source_png=png,
            source_image=image,
            handle=handle,
            scene_caption=parsed.scene_caption,
            parsed_graph=parsed.graph,
            graph=graph,
            receipt=receipt,
            notes=parsed.notes,
        )
        return project.to_wire()

    @app.get("/projects/{project_id}")
    def read_project(project_id: str):
        return get_project(project_id).to_wire()

    @app.post("/projects/{project_id}/edits", status_code=201)
    def submit_edit(project_id: str, payload: dict = Body(...)):
        project = get_project(project_id)
        try:
            delta = delta_from_wire(payload, project.graph)
            apply_delta(project.graph, delta)  # surface bad references as 400
        except (KeyError, ValueError, TypeError) as exc:
            _fail(400, "delta", f"invalid delta: {exc}")
        try:
            plan = plan_edit(project.graph, delta, provider)
        except (ProviderUnavailable, ReplayMiss) as exc:
            _fail(502, "plan", str(exc))
        except MalformedReply as exc:
            _fail(502, "plan", str(exc))
        except MissingMask as exc:
            _fail(400, "plan", str(exc))
        record = store.add_edit(
            project_id,
            delta_wire=payload,
            plan=plan,
            plan_wire=plan_to_wire(plan),
        )
        return {
            "edit_id": record.id,
            "status": record.status,
            "plan": record.plan_wire,
            "target_graph": graph_to_wire(plan.target_graph),
        }

    @app.post("/projects/{project_id}/edits/{edit_id}/confirm", status_code=202)
    def confirm_edit(project_id: str, edit_id: str, payload: dict = Body(default={})):
        project = get_project(project_id)
        seed = int(payload.get("seed", 0))
        try:
            job = store.begin_job(project_id, edit_id)
        except UnknownEdit:
            _fail(404, "lookup", f"unknown edit {edit_id!r}")
        except ProjectBusy as exc:
            raise HTTPException(status_code=409, detail={"stage": "confirm", "message": str(exc)})
        record = project.edits[edit_id]
        record.seed = seed
        record.base_image = (
            project.edits[project.history[-1]].result_image
            if project.history
            else project.source_image
        )
        record.base_png = (
            project.edits[project.history[-1]].result_png
            if project.history
            else project.source_png
        )
        thread = threading.Thread(
            target=run_edit, args=(project, record, job.id, seed), daemon=True
        )
        thread.start()
        return {"job_id": job.id, "edit_id": edit_id, "status": "running"}

    @app.get("/jobs/{job_id}")
    def read_job(job_id: str):
        try:
            return store.job(job_id).to_wire()
        except UnknownJob:
            _fail(404, "lookup", f"unknown job {job_id!r}")

    @app.post("/projects/{project_id}/evaluate")
    def evaluate(project_id: str, payload: dict = Body(...)):
        project = get_project(project_id)
        edit_id = payload.get("edit_id", "")
        try:
            record = store.edit(project_id, edit_id)
        except UnknownEdit:
            _fail(404, "lookup", f"unknown edit {edit_id!r}")
        if record.status != "done":
            raise HTTPException(
                status_code=409,
                detail={"stage": "evaluate", "message": f"edit is {record.status}"},
            )
        width, height = project.graph.width, project.graph.height
        region = mask_from_rle(record.edit_region_rle, width, height)
        try:
            background = background_metrics(record.base_image, record.result_image, region)
        except EmptyRegion:
            background = None
        base_handle = ImageHandle(
            id=f"{edit_id}-base",
            sha256=hashlib.sha256(record.base_png).hexdigest(),
            width=width,
            height=height,
        )
        edited_handle = ImageHandle(
            id=f"{edit_id}-result",
            sha256=hashlib.sha256(record.result_png).hexdigest(),
            width=width,
            height=height,
        )
        try:
            report = evaluate_edit(
                edit_id,
                record.plan.source_graph,
                record.result_graph or record.plan.target_graph,
                base_handle,
                edited_handle,
                provider,
                background,
            )
        except (ProviderUnavailable, ReplayMiss) as exc:
            _fail(502, "evaluate", str(exc))
        except MalformedReply as exc:
            _fail(502, "evaluate", str(exc))
        wire = report.to_wire()
        store.set_report(project_id, edit_id, wire)
        return wire

    @app.get("/projects/{project_id}/export")
    def export_project(project_id: str):
        project = get_project(project_id)
        data = export_archive(project, transcript=provider.dump())
        return Response(
            content=data,
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="{project_id}.zip"'},
        )

    @app.post("/worker")
    def worker_endpoint(payload: dict = Body(...)):
        return worker.handle(payload)

    return app


def main():  # pragma: no cover - thin uvicorn launcher
    import argparse

    import uvicorn

    args = argparse.ArgumentParser(description="Run the sgedit service")
    args.add_argument("--host", default="127.0.0.1")
    args.add_argument("--port", type=int, default=8321)
    opts = args.parse_args()
    uvicorn.run(create_app(), host=opts.host, port=opts.port)
