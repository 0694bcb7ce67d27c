import { describe, expect, it } from "vitest";

import type { GraphWire } from "../src/api.js";
import { layoutGraph, mulberry32 } from "../src/layout.js";

function graphOf(ids: string[], edges: [string, string, string][] = []): GraphWire {
  return {
    image_size: [32, 32],
    nodes: ids.map((id) => ({ id, label: id })),
    edges: edges.map(([s, p, o]) => ({ s, p, o })),
  };
}

describe("mulberry32", () => {
  it("is deterministic for a seed", () => {
    const a = mulberry32(42);
    const b = mulberry32(42);
    const seqA = [a(), a(), a()];
    const seqB = [b(), b(), b()];
    expect(seqA).toEqual(seqB);
  });

  it("yields values in [0, 1)", () => {
    const rand = mulberry32(7);
    for (let i = 0; i < 1000; i++) {
      const v = rand();
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThan(1);
    }
  });

  it("differs across seeds", () => {
    expect(mulberry32(1)()).not.toBe(mulberry32(2)());
  });
});

describe("layoutGraph", () => {
  const graph = graphOf(
    ["a", "b", "c", "d"],
    [
      ["a", "on", "b"],
      ["c", "near", "d"],
    ],
  );
  const opts = { width: 480, height: 360, seed: 3 };

  it("is deterministic for the same graph and seed", () => {
    const first = layoutGraph(graph, opts);
    const second = layoutGraph(graph, opts);
    expect([...first.entries()]).toEqual([...second.entries()]);
  });

  it("changes with the seed", () => {
    const first = layoutGraph(graph, { ...opts, seed: 3 });
    const second = layoutGraph(graph, { ...opts, seed: 4 });
    const moved = [...first.keys()].some((id) => {
      const a = first.get(id)!;
      const b = second.get(id)!;
      return a.x !== b.x || a.y !== b.y;
    });
    expect(moved).toBe(true);
  });

  it("keeps every node inside the viewport margins", () => {
    const positions = layoutGraph(graph, opts);
    for (const p of positions.values()) {
      expect(p.x).toBeGreaterThanOrEqual(40);
      expect(p.x).toBeLessThanOrEqual(480 - 40);
      expect(p.y).toBeGreaterThanOrEqual(40);
      expect(p.y).toBeLessThanOrEqual(360 - 40);
    }
  });

  it("positions every node and only those nodes", () => {
    const positions = layoutGraph(graph, opts);
    expect([...positions.keys()].sort()).toEqual(["a", "b", "c", "d"]);
  });

  it("separates unconnected nodes", () => {
    const positions = layoutGraph(graphOf(["a", "b"]), opts);
    const a = positions.get("a")!;
    const b = positions.get("b")!;
    expect(Math.hypot(a.x - b.x, a.y - b.y)).toBeGreaterThan(30);
  });

  it("centers a single node and returns empty for an empty graph", () => {
    expect(layoutGraph(graphOf(["only"]), opts).get("only")).toEqual({ x: 240, y: 180 });
    expect(layoutGraph(graphOf([]), opts).size).toBe(0);
  });
});
