/**
 * Deterministic node-link layout: seeded initial positions plus a few
 * force-directed iterations. Same graph + same seed = same coordinates,
 * which keeps the view stable across reloads and makes rendering testable.
 */

import type { GraphWire } from "./api.js";

export interface Point {
  x: number;
  y: number;
}

export interface LayoutOptions {
  width: number;
  height: number;
  seed?: number;
  iterations?: number;
}

/** Small fast PRNG: deterministic across platforms for a given seed. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function layoutGraph(
  graph: GraphWire,
  opts: LayoutOptions,
): Map<string, Point> {
  const { width, height, seed = 1, iterations = 60 } = opts;
  const ids = graph.nodes.map((n) => n.id);
  const positions = new Map<string, Point>();
  if (ids.length === 0) return positions;

  const rand = mulberry32(seed);
  const margin = 40;
  for (const id of ids) {
    positions.set(id, {
      x: margin + rand() * (width - 2 * margin),
      y: margin + rand() * (height - 2 * margin),
    });
  }
  if (ids.length === 1) {
    positions.set(ids[0], { x: width / 2, y: height / 2 });
    return positions;
  }

  const springLength = Math.min(width, height) / 2.5;
  const edges = graph.edges.filter(
    (e) => positions.has(e.s) && positions.has(e.o),
  );
  for (let iter = 0; iter < iterations; iter++) {
    const step = 0.85 ** iter * 12;
    const force = new Map<string, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));

    // pairwise repulsion
    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const a = positions.get(ids[i])!;
        const b = positions.get(ids[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        const dist = Math.max(Math.hypot(dx, dy), 1);
        dx /= dist;
        dy /= dist;
        const push = (springLength * springLength) / (dist * dist);
        const fa = force.get(ids[i])!;
        const fb = force.get(ids[j])!;
        fa.x += dx * push;
        fa.y += dy * push;
        fb.x -= dx * push;
        fb.y -= dy * push;
      }
    }
    // edge springs
    for (const e of edges) {
      const a = positions.get(e.s)!;
      const b = positions.get(e.o)!;
      let dx = b.x - a.x;
      let dy = b.y - a.y;
      const dist = Math.max(Math.hypot(dx, dy), 1);
      dx /= dist;
      dy /= dist;
      const pull = (dist - springLength) / springLength;
      const fa = force.get(e.s)!;
      const fb = force.get(e.o)!;
      fa.x += dx * pull;
      fa.y += dy * pull;
      fb.x -= dx * pull;
      fb.y -= dy * pull;
    }
    for (const id of ids) {
      const p = positions.get(id)!;
      const f = force.get(id)!;
      const mag = Math.max(Math.hypot(f.x, f.y), 1e-9);
      const clamp = Math.min(mag, 1) / mag;
      p.x = Math.min(Math.max(p.x + f.x * clamp * step, margin), width - margin);
      p.y = Math.min(Math.max(p.y + f.y * clamp * step, margin), height - margin);
    }
  }
  return positions;
}
