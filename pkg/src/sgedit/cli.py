"""Command line mirroring the service endpoints.

  sgedit parse   --image scene.png --scripted scenes.json --segmenter-seeds s.json
  sgedit plan    --parse parse.json --edit delta.json ...
  sgedit apply   --parse parse.json --edit delta.json --image scene.png
                 --backend toy|worker:<url> --seed 7 --out edited.png
  sgedit eval    --source a.png --edited b.png --source-graph g0.json
                 --target-graph g1.json [--edit-region "rle:..."]
  sgedit export  --url http://host:port --project proj-0001 --out proj.zip
  sgedit serve   [--scripted scenes.json --segmenter-seeds s.json --port 8321]

The provider comes from --transcript (replay a recorded JSONL), --scripted
(a deterministic scene manifest), or the SGEDIT_PROVIDER_URL /
SGEDIT_PROVIDER_MODEL / SGEDIT_PROVIDER_KEY environment for a live
endpoint; --record captures traffic to a transcript for later replay.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .backend import ToyDenoiser
from .controller import plan_edit, plan_to_wire
from .evaluation import background_metrics, evaluate_edit
from .gateway import LiveProvider, RecordingProvider, ReplayProvider
from .graph import delta_from_wire, graph_from_wire, graph_to_wire
from .parser import parse_scene
from .regions import mask_from_rle, mask_to_rle
from .sampling import execute_plan
from .scripted import scripted_from_file
from .segmenter import MockSegmenter
from .toyimages import handle_for, image_to_png, png_to_image
from .worker import RemoteWorker, execute_plan_remote


def _provider(args):
    if getattr(args, "transcript", None):
        inner = ReplayProvider(args.transcript)
    elif getattr(args, "scripted", None):
        inner = scripted_from_file(args.scripted)
    elif os.environ.get("SGEDIT_PROVIDER_URL"):
        inner = LiveProvider(
            os.environ["SGEDIT_PROVIDER_URL"],
            os.environ.get("SGEDIT_PROVIDER_MODEL", ""),
            os.environ.get("SGEDIT_PROVIDER_KEY", ""),
        )
    else:
        raise SystemExit(
            "no provider: pass --transcript or --scripted, or set SGEDIT_PROVIDER_URL"
        )
    if getattr(args, "record", None):
        Path(args.record).write_text("")  # start a fresh transcript
        return RecordingProvider(inner, args.record)
    return inner


def _segmenter(args) -> MockSegmenter:
    if getattr(args, "segmenter_seeds", None):
        return MockSegmenter.from_file(args.segmenter_seeds)
    return MockSegmenter({})


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _load_graph(path: str):
    doc = _load_json(path)
    return graph_from_wire(doc["graph"] if "graph" in doc else doc)


def _load_parse(path: str) -> tuple:
    doc = _load_json(path)
    return graph_from_wire(doc["graph"]), doc.get("scene_caption", ""), doc.get("image_id", "")


def _dump(wire: dict) -> str:
    return json.dumps(wire, indent=2) + "\n"


def cmd_parse(args) -> int:
    png = Path(args.image).read_bytes()
    image_id = args.image_id or Path(args.image).stem
    handle = handle_for(image_id, png)
    result = parse_scene(handle, _provider(args), _segmenter(args))
    doc = {
        "image_id": image_id,
        "scene_caption": result.scene_caption,
        "graph": graph_to_wire(result.graph),
        "notes": [{"kind": n.kind, "detail": n.detail} for n in result.notes],
    }
    _write(_dump(doc), args.out)
    for note in result.notes:
        print(f"note: {note.kind}: {note.detail}", file=sys.stderr)
    return 0


def cmd_plan(args) -> int:
    graph, _, _ = _load_parse(args.parse)
    delta = delta_from_wire(_load_json(args.edit), graph)
    plan = plan_edit(graph, delta, _provider(args))
    doc = {
        "plan": plan_to_wire(plan),
        "source_graph": graph_to_wire(plan.source_graph),
        "target_graph": graph_to_wire(plan.target_graph),
    }
    _write(_dump(doc), args.out)
    return 0


def cmd_apply(args) -> int:
    graph, caption, _ = _load_parse(args.parse)
    delta = delta_from_wire(_load_json(args.edit), graph)
    provider = _provider(args)
    plan = plan_edit(graph, delta, provider)
    image = png_to_image(Path(args.image).read_bytes())
    segmenter = _segmenter(args)
    if args.backend == "toy":
        result = execute_plan(
            plan, image, caption, ToyDenoiser(), segmenter, seed=args.seed
        )
    elif args.backend.startswith("worker:"):
        remote = RemoteWorker(args.backend.split(":", 1)[1])
        result = execute_plan_remote(plan, image, caption, remote.send, seed=args.seed)
    else:
        raise SystemExit(f"unknown backend {args.backend!r} (use toy or worker:<url>)")
    Path(args.out).write_bytes(image_to_png(result.image))
    doc = {
        "graph": graph_to_wire(result.graph),
        "edit_region": mask_to_rle(result.edit_region),
        "seed": args.seed,
    }
    if args.graph_out:
        _write(_dump(doc), args.graph_out)
    return 0


def cmd_eval(args) -> int:
    source = png_to_image(Path(args.source).read_bytes())
    edited = png_to_image(Path(args.edited).read_bytes())
    source_graph = _load_graph(args.source_graph)
    target_graph = _load_graph(args.target_graph)
    background = None
    if args.edit_region:
        region = mask_from_rle(args.edit_region, source.shape[1], source.shape[0])
        background = background_metrics(source, edited, region)
    src_png = Path(args.source).read_bytes()
    out_png = Path(args.edited).read_bytes()
    report = evaluate_edit(
        args.edit_id,
        source_graph,
        target_graph,
        handle_for(f"{args.edit_id}-base", src_png),
        handle_for(f"{args.edit_id}-result", out_png),
        _provider(args),
        background,
    )
    _write(_dump(report.to_wire()), args.out)
    return 0


def cmd_export(args) -> int:
    import requests

    resp = requests.get(
        f"{args.url.rstrip('/')}/projects/{args.project}/export", timeout=60
    )
    resp.raise_for_status()
    Path(args.out).write_bytes(resp.content)
    print(f"wrote {len(resp.content)} bytes to {args.out}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:  # pragma: no cover - network loop
    import uvicorn

    from .service import ServiceConfig, create_app

    provider = _provider(args) if (args.transcript or args.scripted) else None
    segmenter = _segmenter(args) if args.segmenter_seeds else None
    app = create_app(ServiceConfig(provider=provider, segmenter=segmenter))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_provider_flags(p: argparse.ArgumentParser):
    p.add_argument("--transcript", help="replay transcript (JSONL)")
    p.add_argument("--scripted", help="scripted scene manifest (JSON)")
    p.add_argument("--record", help="record provider traffic to this JSONL file")
    p.add_argument("--segmenter-seeds", help="mock segmenter seed file (JSON)")


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="sgedit", description=__doc__)
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="image -> annotated scene graph")
    p.add_argument("--image", required=True)
    p.add_argument("--image-id")
    p.add_argument("--out")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("plan", help="graph + delta -> edit plan preview")
    p.add_argument("--parse", required=True, help="output of `sgedit parse`")
    p.add_argument("--edit", required=True, help="delta JSON ({\"actions\": [...]})")
    p.add_argument("--out")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("apply", help="plan and execute an edit end to end")
    p.add_argument("--parse", required=True)
    p.add_argument("--edit", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--backend", default="toy", help="toy | worker:<url>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="edited image PNG")
    p.add_argument("--graph-out", help="updated graph + edit region JSON")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval", help="score an edit against its graphs")
    p.add_argument("--source", required=True)
    p.add_argument("--edited", required=True)
    p.add_argument("--source-graph", required=True)
    p.add_argument("--target-graph", required=True)
    p.add_argument("--edit-region", help="RLE of the edited region for PSNR/SSIM")
    p.add_argument("--edit-id", default="edit-0001")
    p.add_argument("--out")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="download a project archive")
    p.add_argument("--url", required=True, help="service base URL")
    p.add_argument("--project", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_serve)

    return root


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
