"""Project store: parsed scenes, edit history, jobs, and archive export.

Projects are kept in memory behind one lock; snapshots handed out are
immutable value objects so readers never block. Ids are deterministic
counters (proj-0001, edit-0001, job-0001) and nothing here reads the clock,
so identical request sequences produce identical stores — and identical
export archives, byte for byte.
"""

from __future__ import annotations

import io
import json
import threading
import zipfile
from dataclasses import dataclass, field

import numpy as np

from .controller import EditPlan
from .graph import SceneGraph, graph_from_wire, graph_to_wire
from .parser import ImageHandle, ParseNote

# Fixed zip member timestamp: archives must not depend on wall-clock time.
_EPOCH = (1980, 1, 1, 0, 0, 0)


class UnknownProject(KeyError):
    pass


class UnknownEdit(KeyError):
    pass


class UnknownJob(KeyError):
    pass


class ProjectBusy(RuntimeError):
    """Another job is already mutating this project."""


@dataclass
class EditRecord:
    id: str
    delta_wire: dict
    plan: EditPlan
    plan_wire: dict
    status: str = "planned"  # planned | running | done | failed
    seed: int | None = None
    base_image: np.ndarray | None = None  # what the edit was applied to
    base_png: bytes | None = None
    result_image: np.ndarray | None = None
    result_png: bytes | None = None
    edit_region_rle: str | None = None
    result_graph: SceneGraph | None = None
    report: dict | None = None
    error: str | None = None


@dataclass
class JobRecord:
    id: str
    project_id: str
    edit_id: str
    status: str = "running"  # running | done | failed
    progress: float = 0.0
    error: str | None = None

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "project_id": self.project_id,
            "edit_id": self.edit_id,
            "status": self.status,
            "progress": self.progress,
            "error": self.error,
        }


@dataclass
class Project:
    id: str
    image_id: str
    source_png: bytes
    source_image: np.ndarray
    handle: ImageHandle
    scene_caption: str
    parsed_graph: SceneGraph
    graph: SceneGraph  # current graph = parsed graph folded over done edits
    receipt: dict | None = None
    notes: tuple[ParseNote, ...] = ()
    edits: dict[str, EditRecord] = field(default_factory=dict)
    history: list[str] = field(default_factory=list)  # edit ids, completion order
    active_job: str | None = None

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "image_id": self.image_id,
            "scene_caption": self.scene_caption,
            "graph": graph_to_wire(self.graph),
            "parsed_graph": graph_to_wire(self.parsed_graph),
            "receipt": self.receipt,
            "notes": [{"kind": n.kind, "detail": n.detail} for n in self.notes],
            "history": [
                {
                    "edit_id": eid,
                    "delta": self.edits[eid].delta_wire,
                    "plan": self.edits[eid].plan_wire,
                    "seed": self.edits[eid].seed,
                    "result_image": f"images/{eid}.png",
                    "edit_region": self.edits[eid].edit_region_rle,
                    "report": self.edits[eid].report,
                }
                for eid in self.history
            ],
        }


class ProjectStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._projects: dict[str, Project] = {}
        self._jobs: dict[str, JobRecord] = {}
        self._seq: dict[str, int] = {}

    def _new_id(self, kind: str) -> str:
        self._seq[kind] = self._seq.get(kind, 0) + 1
        return f"{kind}-{self._seq[kind]:04d}"

    def add_project(self, **kwargs) -> Project:
        with self._lock:
            pid = self._new_id("proj")
            project = Project(id=pid, **kwargs)
            self._projects[pid] = project
            return project

    def project(self, project_id: str) -> Project:
        with self._lock:
            if project_id not in self._projects:
                raise UnknownProject(project_id)
            return self._projects[project_id]

    def add_edit(self, project_id: str, **kwargs) -> EditRecord:
        with self._lock:
            if project_id not in self._projects:
                raise UnknownProject(project_id)
            eid = self._new_id("edit")
            record = EditRecord(id=eid, **kwargs)
            self._projects[project_id].edits[eid] = record
            return record

    def edit(self, project_id: str, edit_id: str) -> EditRecord:
        project = self.project(project_id)
        with self._lock:
            if edit_id not in project.edits:
                raise UnknownEdit(edit_id)
            return project.edits[edit_id]

    def begin_job(self, project_id: str, edit_id: str) -> JobRecord:
        """Claim the project's single writer slot; ProjectBusy when taken."""
        with self._lock:
            if project_id not in self._projects:
                raise UnknownProject(project_id)
            project = self._projects[project_id]
            if edit_id not in project.edits:
                raise UnknownEdit(edit_id)
            if project.active_job is not None:
                raise ProjectBusy(f"job {project.active_job} is running")
            job = JobRecord(id=self._new_id("job"), project_id=project_id, edit_id=edit_id)
            self._jobs[job.id] = job
            project.active_job = job.id
            project.edits[edit_id].status = "running"
            return job

    def finish_job(
        self,
        job_id: str,
        *,
        error: str | None = None,
        result_image: np.ndarray | None = None,
        result_png: bytes | None = None,
        result_graph: SceneGraph | None = None,
        edit_region_rle: str | None = None,
    ) -> None:
        with self._lock:
            job = self._jobs[job_id]
            project = self._projects[job.project_id]
            record = project.edits[job.edit_id]
            project.active_job = None
            if error is not None:
                job.status = "failed"
                job.error = error
                record.status = "failed"
                record.error = error
                return
            job.status = "done"
            job.progress = 1.0
            record.status = "done"
            record.result_image = result_image
            record.result_png = result_png
            record.result_graph = result_graph
            record.edit_region_rle = edit_region_rle
            if result_graph is not None:
                project.graph = result_graph
            project.history.append(job.edit_id)

    def set_progress(self, job_id: str, progress: float) -> None:
        with self._lock:
            if job_id in self._jobs:
                self._jobs[job_id].progress = progress

    def job(self, job_id: str) -> JobRecord:
        with self._lock:
            if job_id not in self._jobs:
                raise UnknownJob(job_id)
            return self._jobs[job_id]

    def set_report(self, project_id: str, edit_id: str, report: dict) -> None:
        with self._lock:
            self._projects[project_id].edits[edit_id].report = report


# --- archive ------------------------------------------------------------------


def _project_json(project: Project) -> bytes:
    return (json.dumps(project.to_wire(), indent=2, sort_keys=True) + "\n").encode()


def export_archive(project: Project, transcript: str = "") -> bytes:
    """Deterministic zip: project JSON, images, transcript, fixed timestamps."""
    members: dict[str, bytes] = {
        "project.json": _project_json(project),
        "images/source.png": project.source_png,
    }
    for eid in project.history:
        record = project.edits[eid]
        if record.result_png is not None:
            members[f"images/{eid}.png"] = record.result_png
    if transcript:
        members["transcripts/gateway.jsonl"] = transcript.encode()

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(members):
            info = zipfile.ZipInfo(name, date_time=_EPOCH)
            info.external_attr = 0o644 << 16
            zf.writestr(info, members[name])
    return buf.getvalue()


@dataclass(frozen=True)
class ImportedProject:
    """Read-back view of an archive: the wire data plus raw members."""

    project: dict
    images: dict[str, bytes]
    transcript: str | None

    @property
    def graph(self) -> SceneGraph:
        return graph_from_wire(self.project["graph"])


def import_archive(data: bytes) -> ImportedProject:
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        names = zf.namelist()
        project = json.loads(zf.read("project.json").decode())
        images = {
            name.split("/", 1)[1]: zf.read(name)
            for name in names
            if name.startswith("images/")
        }
        transcript = (
            zf.read("transcripts/gateway.jsonl").decode()
            if "transcripts/gateway.jsonl" in names
            else None
        )
    return ImportedProject(project=project, images=images, transcript=transcript)
