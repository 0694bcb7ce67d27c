"""Chat-completion gateway: templating, structured replies, record/replay.

Providers are interchangeable objects with a single `complete(turns) -> str`
method. Two wrappers make any provider deterministic for tests and offline
runs: `RecordingProvider` appends request/reply pairs to a JSON-lines
transcript, `ReplayProvider` serves them back, keyed by a fingerprint of the
rendered conversation (image attachments enter the fingerprint through their
content hashes, never their bytes).
"""

from __future__ import annotations

import hashlib
import json
import re
import string
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .regions import BoundingBox


class ProviderUnavailable(RuntimeError):
    pass


class ReplayMiss(KeyError):
    """No stored reply for this request fingerprint."""


class UnboundPlaceholder(KeyError):
    pass


class MalformedReply(ValueError):
    """The reply lacks the expected block or the block fails validation."""

    def __init__(self, message: str, span: str = ""):
        super().__init__(f"{message} (near: {span!r})" if span else message)
        self.span = span


@dataclass(frozen=True)
class Attachment:
    """Reference to an image shown to a vision-capable provider."""

    ref: str
    sha256: str


@dataclass(frozen=True)
class ChatTurn:
    role: str
    content: str
    attachments: tuple[Attachment, ...] = ()

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.content and not self.attachments:
            raise ValueError("turn needs content or attachments")


def turn_to_wire(turn: ChatTurn) -> dict:
    wire: dict = {"role": turn.role, "content": turn.content}
    if turn.attachments:
        wire["attachments"] = [{"ref": a.ref, "sha256": a.sha256} for a in turn.attachments]
    return wire


def turn_from_wire(wire: dict) -> ChatTurn:
    return ChatTurn(
        wire["role"],
        wire["content"],
        tuple(Attachment(a["ref"], a["sha256"]) for a in wire.get("attachments", ())),
    )


def fingerprint(turns: Sequence[ChatTurn]) -> str:
    """Stable identity of a request; attachments enter by content hash."""
    canonical = json.dumps(
        [turn_to_wire(t) for t in turns], sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PromptTemplate:
    """System preamble + user body with $placeholders + worked examples."""

    name: str
    system: str
    body: str
    in_context_examples: tuple[tuple[str, str], ...] = ()


def render_template(
    tpl: PromptTemplate,
    bindings: dict[str, str],
    attachments: Sequence[Attachment] = (),
) -> list[ChatTurn]:
    """System turn, example user/assistant pairs, then the bound user turn."""
    try:
        body = string.Template(tpl.body).substitute(bindings)
    except KeyError as exc:
        raise UnboundPlaceholder(f"template {tpl.name!r} placeholder {exc}") from exc
    turns = [ChatTurn("system", tpl.system)]
    for example_in, example_out in tpl.in_context_examples:
        turns.append(ChatTurn("user", example_in))
        turns.append(ChatTurn("assistant", example_out))
    turns.append(ChatTurn("user", body, tuple(attachments)))
    return turns


class ProviderHandle(Protocol):
    def complete(self, turns: Sequence[ChatTurn]) -> str: ...


def complete_chat(turns: Sequence[ChatTurn], provider: ProviderHandle) -> str:
    """Run one request. Provider errors surface as ProviderUnavailable."""
    return provider.complete(turns)


class LiveProvider:
    """Minimal JSON chat endpoint client (POST {model, messages})."""

    def __init__(self, base_url: str, model: str, api_key: str = "", retries: int = 1):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.retries = retries

    def complete(self, turns: Sequence[ChatTurn]) -> str:
        import requests

        payload = {"model": self.model, "messages": [turn_to_wire(t) for t in turns]}
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for _ in range(max(1, self.retries)):
            try:
                resp = requests.post(
                    self.base_url + "/chat/completions", json=payload, headers=headers, timeout=60
                )
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - collapsed into one error kind
                last_error = exc
        raise ProviderUnavailable(f"{self.base_url}: {last_error}")


class RecordingProvider:
    """Wraps a provider and appends request/reply pairs to a transcript."""

    def __init__(self, inner: ProviderHandle, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()

    def complete(self, turns: Sequence[ChatTurn]) -> str:
        reply = self.inner.complete(turns)
        line = json.dumps(
            {
                "fingerprint": fingerprint(turns),
                "request": [turn_to_wire(t) for t in turns],
                "reply": reply,
            },
            sort_keys=True,
        )
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        return reply


class MemoryRecordingProvider:
    """Like RecordingProvider, but the transcript stays in memory.

    `dump()` renders the same JSONL a file recording would hold, so captured
    sessions can ship inside project archives and replay later.
    """

    def __init__(self, inner: ProviderHandle):
        self.inner = inner
        self.entries: list[dict] = []
        self._lock = threading.Lock()

    def complete(self, turns: Sequence[ChatTurn]) -> str:
        reply = self.inner.complete(turns)
        entry = {
            "fingerprint": fingerprint(turns),
            "request": [turn_to_wire(t) for t in turns],
            "reply": reply,
        }
        with self._lock:
            self.entries.append(entry)
        return reply

    def dump(self) -> str:
        with self._lock:
            return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.entries)


class ReplayProvider:
    """Serves stored replies by request fingerprint; read-only and reentrant."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.exists():
            raise ProviderUnavailable(f"transcript not found: {self.path}")
        self.replies: dict[str, str] = {}
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entry = json.loads(line)
                    self.replies[entry["fingerprint"]] = entry["reply"]

    def complete(self, turns: Sequence[ChatTurn]) -> str:
        key = fingerprint(turns)
        if key not in self.replies:
            head = turns[-1].content.splitlines()[0] if turns else ""
            raise ReplayMiss(f"no stored reply for {key[:12]}… (request starts: {head[:80]!r})")
        return self.replies[key]


# --- structured reply parsing -------------------------------------------------

OBJECTS = "objects"
RELATIONS = "relations"
CAPTION = "caption"
PLAN = "plan"
BBOX = "bbox"
SCORES = "scores"

_SCHEMA_KEYS = {
    "ObjectList": OBJECTS,
    "RelationList": RELATIONS,
    "Caption": CAPTION,
    "EditPlanReply": PLAN,
    "BBoxReply": BBOX,
    "ChecklistReply": SCORES,
}


@dataclass(frozen=True)
class InstanceItem:
    label: str
    background: bool = False


@dataclass(frozen=True)
class InsertItem:
    node: str
    bbox: BoundingBox | None = None


@dataclass(frozen=True)
class PlanReply:
    remove: tuple[str, ...] = ()
    insert: tuple[InsertItem, ...] = ()


def extract_block(reply: str, key: str):
    """Find `key:` in the reply and parse the JSON value that follows.

    Tolerant of surrounding prose and code fences. Returns None when the key
    is absent; raises MalformedReply when the key is present but the value
    does not parse.
    """
    match = re.search(rf"(?<![\w-]){re.escape(key)}\s*:", reply)
    if match is None:
        return None
    rest = reply[match.end():].lstrip()
    decoder = json.JSONDecoder()
    try:
        value, _ = decoder.raw_decode(rest)
    except json.JSONDecodeError as exc:
        raise MalformedReply(f"unparsable {key} block", span=rest[:60]) from exc
    return value


def _parse_bbox(raw, span: str) -> BoundingBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise MalformedReply("bbox must be 4 numbers", span=span)
    try:
        coords = [float(x) for x in raw]
    except (TypeError, ValueError) as exc:
        raise MalformedReply("bbox entries must be numeric", span=span) from exc
    if min(coords) < 0.0 or max(coords) > 1.0:
        raise MalformedReply(f"bbox {coords} leaves [0,1]", span=span)
    try:
        return BoundingBox(*coords)
    except ValueError as exc:
        raise MalformedReply(str(exc), span=span) from exc


def parse_tagged_reply(reply: str, schema: str):
    """Parse the block named by `schema` out of a free-form reply.

    Schemas: ObjectList -> list of InstanceItem; RelationList -> list of
    (s, p, o) triples; Caption -> non-empty text; EditPlanReply -> PlanReply;
    BBoxReply -> BoundingBox; ChecklistReply -> list of numbers.
    """
    if schema not in _SCHEMA_KEYS:
        raise ValueError(f"unknown schema {schema!r}")
    key = _SCHEMA_KEYS[schema]
    value = extract_block(reply, key)

    if schema == "Caption":
        if value is None:
            text = reply.strip().strip("`")
        elif isinstance(value, str):
            text = value.strip()
        else:
            raise MalformedReply("caption must be a string", span=str(value)[:60])
        if not text:
            raise MalformedReply("empty caption")
        return text

    if value is None:
        raise MalformedReply(f"no {key} block in reply", span=reply[:60])

    if schema == "ObjectList":
        if not isinstance(value, list):
            raise MalformedReply("objects must be a list", span=str(value)[:60])
        items = []
        for entry in value:
            if isinstance(entry, str):
                items.append(InstanceItem(entry))
            elif isinstance(entry, dict) and "label" in entry:
                items.append(InstanceItem(entry["label"], bool(entry.get("background", False))))
            else:
                raise MalformedReply(f"bad instance entry {entry!r}", span=str(entry)[:60])
        return items

    if schema == "RelationList":
        if not isinstance(value, list):
            raise MalformedReply("relations must be a list", span=str(value)[:60])
        triples = []
        for entry in value:
            if (
                not isinstance(entry, (list, tuple))
                or len(entry) != 3
                or not all(isinstance(x, str) and x for x in entry)
            ):
                raise MalformedReply(f"bad relation triple {entry!r}", span=str(entry)[:60])
            triples.append((entry[0], entry[1], entry[2]))
        return triples

    if schema == "BBoxReply":
        return _parse_bbox(value, span=str(value)[:60])

    if schema == "ChecklistReply":
        if not isinstance(value, list) or not all(isinstance(x, (int, float)) for x in value):
            raise MalformedReply("scores must be a list of numbers", span=str(value)[:60])
        return [float(x) for x in value]

    # EditPlanReply
    if not isinstance(value, dict):
        raise MalformedReply("plan must be an object", span=str(value)[:60])
    remove = value.get("remove", [])
    insert = value.get("insert", [])
    if not isinstance(remove, list) or not all(isinstance(x, str) for x in remove):
        raise MalformedReply("plan.remove must be a list of node ids", span=str(remove)[:60])
    if not isinstance(insert, list):
        raise MalformedReply("plan.insert must be a list", span=str(insert)[:60])
    inserts = []
    for entry in insert:
        if not isinstance(entry, dict) or "node" not in entry:
            raise MalformedReply(f"bad insert entry {entry!r}", span=str(entry)[:60])
        bbox = entry.get("bbox")
        if bbox is not None:
            # A garbled box inside a plan degrades to "no box" so the caller
            # can re-ask or fall back; the strict rule lives in BBoxReply.
            try:
                bbox = _parse_bbox(bbox, str(entry)[:60])
            except MalformedReply:
                bbox = None
        inserts.append(InsertItem(entry["node"], bbox))
    return PlanReply(tuple(remove), tuple(inserts))
