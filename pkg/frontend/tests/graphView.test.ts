import { beforeEach, describe, expect, it } from "vitest";

import type { GraphWire } from "../src/api.js";
import { renderGraph } from "../src/graphView.js";

const golden: GraphWire = {
  image_size: [32, 32],
  nodes: [
    { id: "red-cube", label: "red cube" },
    { id: "table", label: "table" },
    { id: "wall", label: "wall", background: true },
    { id: "blue-ball", label: "blue ball", ungrounded: true },
  ],
  edges: [
    { s: "red-cube", p: "on", o: "table" },
    { s: "blue-ball", p: "on", o: "table" },
  ],
};

let container: HTMLElement;

beforeEach(() => {
  container = document.createElement("div");
  document.body.appendChild(container);
});

describe("renderGraph", () => {
  it("renders one group per node and labeled edges", () => {
    const view = renderGraph(container, golden, { seed: 5 });
    expect(view).not.toBeNull();
    const nodes = container.querySelectorAll("g.node, g.node.highlighted");
    expect(container.querySelectorAll("[data-node-id]").length).toBe(4);
    expect(nodes.length).toBe(4);
    const edgeLabels = [...container.querySelectorAll(".edge-label")].map(
      (el) => el.textContent,
    );
    expect(edgeLabels).toEqual(["on", "on"]);
    expect(
      container.querySelector('[data-edge="red-cube|on|table"]'),
    ).not.toBeNull();
  });

  it("returns exactly the rendered graph JSON", () => {
    const view = renderGraph(container, golden, { seed: 5 })!;
    expect(view.graph).toEqual(golden);
  });

  it("is deterministic for a fixed seed", () => {
    const first = renderGraph(container, golden, { seed: 9 })!;
    const again = renderGraph(container, golden, { seed: 9 })!;
    expect([...first.positions.entries()]).toEqual([...again.positions.entries()]);
  });

  it("marks highlighted and ungrounded nodes with classes", () => {
    renderGraph(container, golden, { seed: 5, highlighted: new Set(["table"]) });
    const table = container.querySelector('[data-node-id="table"]')!;
    expect(table.getAttribute("class")).toContain("highlighted");
    const ball = container.querySelector('[data-node-id="blue-ball"]')!;
    expect(ball.getAttribute("class")).toContain("ungrounded");
  });

  it("shows an empty-state hint for a graph with no nodes", () => {
    const view = renderGraph(container, { image_size: [32, 32], nodes: [], edges: [] });
    expect(view).toBeNull();
    expect(container.querySelector(".empty-state")?.textContent).toMatch(/No objects/);
  });

  it("shows an error banner for malformed JSON without crashing", () => {
    for (const bad of [
      null,
      42,
      { nodes: "nope" },
      { image_size: [32, 32], nodes: [{ id: 1 }], edges: [] },
    ]) {
      const view = renderGraph(container, bad);
      expect(view).toBeNull();
      expect(container.querySelector(".error-banner")).not.toBeNull();
    }
  });

  it("rejects duplicate ids and dangling edges with a banner", () => {
    const dupes: GraphWire = {
      image_size: [32, 32],
      nodes: [
        { id: "x", label: "x" },
        { id: "x", label: "x again" },
      ],
      edges: [],
    };
    expect(renderGraph(container, dupes)).toBeNull();
    expect(container.querySelector(".error-banner")?.textContent).toMatch(/duplicate/);

    const dangling: GraphWire = {
      image_size: [32, 32],
      nodes: [{ id: "a", label: "a" }],
      edges: [{ s: "a", p: "on", o: "gone" }],
    };
    expect(renderGraph(container, dangling)).toBeNull();
    expect(container.querySelector(".error-banner")?.textContent).toMatch(/missing node/);
  });

  it("reports selections through callbacks", () => {
    let selectedNode = "";
    let selectedEdge = "";
    renderGraph(container, golden, {
      seed: 5,
      onSelectNode: (id) => (selectedNode = id),
      onSelectEdge: (e) => (selectedEdge = `${e.s}|${e.p}|${e.o}`),
    });
    (container.querySelector('[data-node-id="wall"]') as SVGGElement).dispatchEvent(
      new MouseEvent("click", { bubbles: true }),
    );
    expect(selectedNode).toBe("wall");
    (container.querySelector('[data-edge="red-cube|on|table"]') as SVGGElement).dispatchEvent(
      new MouseEvent("click", { bubbles: true }),
    );
    expect(selectedEdge).toBe("red-cube|on|table");
  });

  it("moves a node and its edges on drag", () => {
    const view = renderGraph(container, golden, { seed: 5 })!;
    const before = { ...view.positions.get("red-cube")! };
    const group = container.querySelector('[data-node-id="red-cube"]') as SVGGElement;
    group.dispatchEvent(new PointerEvent("pointerdown", { clientX: 10, clientY: 10, bubbles: true }));
    view.svg.dispatchEvent(new PointerEvent("pointermove", { clientX: 35, clientY: 22, bubbles: true }));
    view.svg.dispatchEvent(new PointerEvent("pointerup", { bubbles: true }));
    const after = view.positions.get("red-cube")!;
    expect(after.x).toBeCloseTo(before.x + 25, 6);
    expect(after.y).toBeCloseTo(before.y + 12, 6);
    const line = container.querySelector('[data-edge="red-cube|on|table"] line')!;
    expect(Number(line.getAttribute("x1"))).toBeCloseTo(after.x, 6);
  });
});
