/**
 * Plan preview overlays: removal masks draw hatched, insertion boxes draw
 * dashed, both scaled from mask-grid / normalized-box space onto the
 * displayed image. Geometry is computed as plain data first so it can be
 * tested without a renderer, then painted into an SVG group.
 */

import type { PlanWire } from "./api.js";
import { decodeRle, maskRowRuns, type RowRun } from "./rle.js";

export interface MaskOverlay {
  kind: "removal-mask";
  node: string;
  /** horizontal runs in mask-grid cells */
  runs: RowRun[];
  gridWidth: number;
  gridHeight: number;
}

export interface BoxOverlay {
  kind: "insertion-box";
  node: string;
  label: string;
  /** normalized [x0, y0, x1, y1] */
  bbox: [number, number, number, number];
}

export interface PlanOverlays {
  masks: MaskOverlay[];
  boxes: BoxOverlay[];
}

/**
 * Decode a plan preview into overlay geometry. `imageSize` is the project's
 * [width, height]; removal masks arrive at exactly that resolution.
 */
export function planOverlays(plan: PlanWire, imageSize: [number, number]): PlanOverlays {
  const [gridWidth, gridHeight] = imageSize;
  const masks: MaskOverlay[] = plan.removals.map((removal) => ({
    kind: "removal-mask",
    node: removal.node,
    runs: maskRowRuns(decodeRle(removal.mask, gridWidth, gridHeight), gridWidth, gridHeight),
    gridWidth,
    gridHeight,
  }));
  const boxes: BoxOverlay[] = plan.insertions.map((insertion) => ({
    kind: "insertion-box",
    node: insertion.node,
    label: insertion.label,
    bbox: insertion.bbox,
  }));
  return { masks, boxes };
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

/** Ensure the hatch pattern the mask overlays reference exists in the SVG. */
function ensureHatchPattern(svg: SVGSVGElement) {
  if (svg.querySelector("#hatch")) return;
  const defs = svgEl("defs", {});
  const pattern = svgEl("pattern", {
    id: "hatch",
    width: 6,
    height: 6,
    patternUnits: "userSpaceOnUse",
    patternTransform: "rotate(45)",
  });
  pattern.appendChild(svgEl("rect", { width: 6, height: 6, fill: "transparent" }));
  pattern.appendChild(
    svgEl("line", { x1: 0, y1: 0, x2: 0, y2: 6, stroke: "#d33", "stroke-width": 2 }),
  );
  defs.appendChild(pattern);
  svg.insertBefore(defs, svg.firstChild);
}

/**
 * Paint overlays into an SVG of display size `width` x `height`, replacing
 * any previous overlay group. Returns the group for inspection.
 */
export function renderOverlays(
  svg: SVGSVGElement,
  overlays: PlanOverlays,
  width: number,
  height: number,
): SVGGElement {
  svg.querySelector("g.plan-overlays")?.remove();
  ensureHatchPattern(svg);
  const group = svgEl("g", { class: "plan-overlays" });

  for (const mask of overlays.masks) {
    const cellW = width / mask.gridWidth;
    const cellH = height / mask.gridHeight;
    const maskGroup = svgEl("g", { class: "removal-mask" });
    maskGroup.setAttribute("data-node", mask.node);
    for (const run of mask.runs) {
      maskGroup.appendChild(
        svgEl("rect", {
          x: run.x * cellW,
          y: run.y * cellH,
          width: run.length * cellW,
          height: cellH,
          fill: "url(#hatch)",
          stroke: "none",
        }),
      );
    }
    group.appendChild(maskGroup);
  }

  for (const box of overlays.boxes) {
    const [x0, y0, x1, y1] = box.bbox;
    const rect = svgEl("rect", {
      class: "insertion-box",
      x: x0 * width,
      y: y0 * height,
      width: (x1 - x0) * width,
      height: (y1 - y0) * height,
      fill: "none",
      stroke: "#36c",
      "stroke-width": 2,
      "stroke-dasharray": "6 4",
    });
    rect.setAttribute("data-node", box.node);
    const label = svgEl("text", {
      class: "insertion-label",
      x: x0 * width + 4,
      y: Math.max(y0 * height - 4, 10),
    });
    label.textContent = box.label;
    group.appendChild(rect);
    group.appendChild(label);
  }

  svg.appendChild(group);
  return group;
}
