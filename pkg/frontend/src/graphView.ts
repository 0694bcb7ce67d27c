/**
 * Interactive node-link rendering of a scene graph into an SVG element.
 * Layout is seeded and deterministic; nodes are draggable; staged-delta
 * node ids render highlighted. Bad graph JSON shows an error banner
 * instead of throwing.
 */

import type { EdgeWire, GraphWire } from "./api.js";
import { layoutGraph, type Point } from "./layout.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GraphViewOptions {
  width?: number;
  height?: number;
  seed?: number;
  highlighted?: Set<string>;
  onSelectNode?: (id: string) => void;
  onSelectEdge?: (edge: EdgeWire) => void;
}

export interface GraphView {
  /** The SVG element placed into the container. */
  svg: SVGSVGElement;
  /** Exactly the graph JSON that was rendered. */
  graph: GraphWire;
  /** Node centers after layout (and after any drags). */
  positions: Map<string, Point>;
}

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

function isValidGraph(graph: unknown): graph is GraphWire {
  if (typeof graph !== "object" || graph === null) return false;
  const g = graph as GraphWire;
  return (
    Array.isArray(g.image_size) &&
    g.image_size.length === 2 &&
    Array.isArray(g.nodes) &&
    g.nodes.every((n) => typeof n?.id === "string" && typeof n?.label === "string") &&
    Array.isArray(g.edges) &&
    g.edges.every(
      (e) => typeof e?.s === "string" && typeof e?.p === "string" && typeof e?.o === "string",
    )
  );
}

function renderErrorBanner(container: HTMLElement, message: string): null {
  container.textContent = "";
  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.setAttribute("role", "alert");
  banner.textContent = message;
  container.appendChild(banner);
  return null;
}

export function renderGraph(
  container: HTMLElement,
  graph: unknown,
  opts: GraphViewOptions = {},
): GraphView | null {
  if (!isValidGraph(graph)) {
    return renderErrorBanner(container, "scene graph JSON does not match the schema");
  }
  const ids = new Set(graph.nodes.map((n) => n.id));
  if (ids.size !== graph.nodes.length) {
    return renderErrorBanner(container, "scene graph has duplicate node ids");
  }
  const danglingEdge = graph.edges.find((e) => !ids.has(e.s) || !ids.has(e.o));
  if (danglingEdge) {
    return renderErrorBanner(
      container,
      `edge (${danglingEdge.s}, ${danglingEdge.p}, ${danglingEdge.o}) references a missing node`,
    );
  }

  const { width = 480, height = 360, seed = 1, highlighted = new Set<string>() } = opts;
  container.textContent = "";

  if (graph.nodes.length === 0) {
    const hint = document.createElement("div");
    hint.className = "empty-state";
    hint.textContent = "No objects in this scene yet — parsing may still be running.";
    container.appendChild(hint);
    return null;
  }

  const positions = layoutGraph(graph, { width, height, seed });
  const svg = svgEl("svg", {
    class: "graph-view",
    viewBox: `0 0 ${width} ${height}`,
    width,
    height,
  });

  const edgeLayer = svgEl("g", { class: "edges" });
  const nodeLayer = svgEl("g", { class: "nodes" });
  svg.appendChild(edgeLayer);
  svg.appendChild(nodeLayer);

  const edgeParts: { edge: EdgeWire; line: SVGLineElement; label: SVGTextElement }[] = [];
  for (const edge of graph.edges) {
    const a = positions.get(edge.s)!;
    const b = positions.get(edge.o)!;
    const line = svgEl("line", {
      class: "edge-line",
      x1: a.x,
      y1: a.y,
      x2: b.x,
      y2: b.y,
      "marker-end": "url(#arrow)",
    });
    const label = svgEl("text", {
      class: "edge-label",
      x: (a.x + b.x) / 2,
      y: (a.y + b.y) / 2 - 6,
      "text-anchor": "middle",
    });
    label.textContent = edge.p;
    const group = svgEl("g", { class: "edge" });
    group.setAttribute("data-edge", `${edge.s}|${edge.p}|${edge.o}`);
    group.appendChild(line);
    group.appendChild(label);
    group.addEventListener("click", () => opts.onSelectEdge?.(edge));
    edgeLayer.appendChild(group);
    edgeParts.push({ edge, line, label });
  }

  const nodeGroups = new Map<string, SVGGElement>();
  for (const node of graph.nodes) {
    const p = positions.get(node.id)!;
    const classes = ["node"];
    if (highlighted.has(node.id)) classes.push("highlighted");
    if (node.ungrounded) classes.push("ungrounded");
    if (node.background) classes.push("background");
    const group = svgEl("g", {
      class: classes.join(" "),
      transform: `translate(${p.x}, ${p.y})`,
    });
    group.setAttribute("data-node-id", node.id);
    const circle = svgEl("circle", { r: 22, class: "node-circle" });
    const label = svgEl("text", {
      class: "node-label",
      y: 38,
      "text-anchor": "middle",
    });
    label.textContent = node.label;
    group.appendChild(circle);
    group.appendChild(label);
    group.addEventListener("click", () => opts.onSelectNode?.(node.id));
    nodeLayer.appendChild(group);
    nodeGroups.set(node.id, group);
  }

  const moveNode = (id: string, x: number, y: number) => {
    positions.set(id, { x, y });
    nodeGroups.get(id)!.setAttribute("transform", `translate(${x}, ${y})`);
    for (const { edge, line, label } of edgeParts) {
      if (edge.s !== id && edge.o !== id) continue;
      const a = positions.get(edge.s)!;
      const b = positions.get(edge.o)!;
      line.setAttribute("x1", String(a.x));
      line.setAttribute("y1", String(a.y));
      line.setAttribute("x2", String(b.x));
      line.setAttribute("y2", String(b.y));
      label.setAttribute("x", String((a.x + b.x) / 2));
      label.setAttribute("y", String((a.y + b.y) / 2 - 6));
    }
  };

  // pointer-based dragging; coordinates come from the SVG's bounding box
  for (const [id, group] of nodeGroups) {
    group.addEventListener("pointerdown", (down: PointerEvent) => {
      down.preventDefault();
      const start = positions.get(id)!;
      const originX = down.clientX;
      const originY = down.clientY;
      const onMove = (move: PointerEvent) => {
        moveNode(id, start.x + (move.clientX - originX), start.y + (move.clientY - originY));
      };
      const onUp = () => {
        svg.removeEventListener("pointermove", onMove);
        svg.removeEventListener("pointerup", onUp);
      };
      svg.addEventListener("pointermove", onMove);
      svg.addEventListener("pointerup", onUp);
    });
  }

  container.appendChild(svg);
  return { svg, graph, positions };
}
