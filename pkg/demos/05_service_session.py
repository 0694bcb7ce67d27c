"""
The editing service over HTTP
=============================

The library fronts as a small HTTP service: upload an image to create a
project, submit graph deltas to preview plans, confirm to run them on a
background worker, then evaluate and export.  Here the app runs in-process
with the demo scene's scripted provider and mock segmenter.
"""

import base64
import json
import time
import warnings

warnings.filterwarnings("ignore", message="Using `httpx`")
from fastapi.testclient import TestClient  # noqa: E402

from sgedit.scripted import ScriptedProvider
from sgedit.segmenter import MockSegmenter
from sgedit.service import ServiceConfig, create_app
from sgedit.toyimages import demo_scene

bundle = demo_scene()
app = create_app(
    ServiceConfig(
        provider=ScriptedProvider({bundle.image_id: bundle.script}),
        segmenter=MockSegmenter(bundle.segmenter_seeds),
    )
)
client = TestClient(app)

# --- Create a project: the service parses the image into a scene graph and
# kicks off concept fine-tuning for every grounded object (on the toy
# backend that is a receipt with placeholder token handles).
created = client.post(
    "/projects",
    json={
        "image_id": bundle.image_id,
        "image_png_b64": base64.b64encode(bundle.png).decode(),
    },
)
project = created.json()
print("project:", project["id"])
print("caption:", project["scene_caption"])
print("nodes:", [n["id"] for n in project["graph"]["nodes"]])
print("token handles:", project["receipt"]["token_handles"])

# --- Submit a delta.  The response is a plan preview; nothing has run yet.
submitted = client.post(
    f"/projects/{project['id']}/edits",
    json={"actions": [{"type": "remove_node", "id": "red-cube"}]},
)
edit = submitted.json()
print("\nedit:", edit["edit_id"], "status:", edit["status"])
print("plan erases:", [r["node"] for r in edit["plan"]["removals"]])

# --- Confirm to execute.  The edit runs in a background job; poll until done.
confirmed = client.post(
    f"/projects/{project['id']}/edits/{edit['edit_id']}/confirm",
    json={"seed": 7},
)
job_id = confirmed.json()["job_id"]
job = client.get(f"/jobs/{job_id}").json()
while job["status"] not in ("done", "failed"):
    time.sleep(0.02)
    job = client.get(f"/jobs/{job_id}").json()
print("\njob:", job["id"], "->", job["status"], f"(progress {job['progress']:.0%})")

refreshed = client.get(f"/projects/{project['id']}").json()
print("graph after edit:", [n["id"] for n in refreshed["graph"]["nodes"]])
print("history:", [h["edit_id"] for h in refreshed["history"]])

# --- Evaluate the finished edit against its checklists.
report = client.post(
    f"/projects/{project['id']}/evaluate", json={"edit_id": edit["edit_id"]}
).json()
print("\nreport:", json.dumps({k: report[k] for k in ("ec", "ra", "iq")}))
print("background:", json.dumps(report["background"]))

# --- Export the whole project as a deterministic archive.
archive = client.get(f"/projects/{project['id']}/export")
print("\narchive:", len(archive.content), "bytes,",
      archive.headers["content-disposition"])
