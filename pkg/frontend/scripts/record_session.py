"""Regenerate the frontend session-test fixtures.

Run from the frontend directory (or anywhere):

    python3 scripts/record_session.py

Writes, into frontend/tests/fixtures/:

* demo.png             — the painted demo scene (32x32 RGB)
* segmenter_seeds.json — mock segmenter seed table for the demo scene
* transcript.jsonl     — recorded provider traffic for the canonical
                         four-edit UI session replayed by session.test.ts

The recorded session must mirror the browser test action for action and
seed for seed: modify-edge (21), replace (22), add (23), remove (24),
then evaluate the final edit. Both sides are deterministic, so the
transcript replays byte-for-byte.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from sgedit.gateway import RecordingProvider
from sgedit.scripted import ScriptedProvider
from sgedit.segmenter import MockSegmenter
from sgedit.service import ServiceConfig, create_app
from sgedit.toyimages import demo_scene, png_to_b64

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

MODIFY = {
    "actions": [
        {
            "type": "modify_edge",
            "edge": {"s": "red-cube", "p": "on", "o": "table"},
            "predicate": "in front of",
        }
    ]
}
REPLACE = {"actions": [{"type": "replace_node", "id": "red-cube", "label": "green sphere"}]}
ADD = {
    "actions": [
        {"type": "add_node", "label": "blue ball", "relations": [{"p": "on", "o": "table"}]}
    ]
}
REMOVE = {"actions": [{"type": "remove_node", "id": "blue-ball"}]}

SESSION = [(MODIFY, 21), (REPLACE, 22), (ADD, 23), (REMOVE, 24)]


def run_edit(client: TestClient, project_id: str, delta: dict, seed: int) -> str:
    preview = client.post(f"/projects/{project_id}/edits", json=delta)
    assert preview.status_code == 201, preview.text
    edit_id = preview.json()["edit_id"]
    confirm = client.post(
        f"/projects/{project_id}/edits/{edit_id}/confirm", json={"seed": seed}
    )
    assert confirm.status_code == 202, confirm.text
    job_id = confirm.json()["job_id"]
    deadline = time.time() + 30
    while time.time() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] in ("done", "failed"):
            assert job["status"] == "done", job
            return edit_id
        time.sleep(0.01)
    raise TimeoutError(f"job {job_id} did not finish")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    bundle = demo_scene()

    (FIXTURES / "demo.png").write_bytes(bundle.png)
    (FIXTURES / "segmenter_seeds.json").write_text(
        json.dumps(bundle.segmenter_seeds, indent=2, sort_keys=True) + "\n"
    )

    transcript = FIXTURES / "transcript.jsonl"
    transcript.write_text("")
    recorder = RecordingProvider(ScriptedProvider({bundle.image_id: bundle.script}), transcript)
    app = create_app(
        ServiceConfig(provider=recorder, segmenter=MockSegmenter(bundle.segmenter_seeds))
    )

    with TestClient(app) as client:
        created = client.post(
            "/projects",
            json={"image_id": bundle.image_id, "image_png_b64": png_to_b64(bundle.png)},
        )
        assert created.status_code == 201, created.text
        project_id = created.json()["id"]

        last_edit = ""
        for delta, seed in SESSION:
            last_edit = run_edit(client, project_id, delta, seed)

        report = client.post(f"/projects/{project_id}/evaluate", json={"edit_id": last_edit})
        assert report.status_code == 200, report.text

        final = client.get(f"/projects/{project_id}").json()
        labels = sorted(n["label"] for n in final["graph"]["nodes"])
        assert labels == ["green sphere", "table", "wall"], labels

    lines = transcript.read_text().strip().splitlines()
    print(f"wrote {len(lines)} transcript entries for the four-edit session")


if __name__ == "__main__":
    main()
