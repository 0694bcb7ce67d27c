/**
 * Stage graph deltas client-side and validate them against the displayed
 * graph before they go to the server. The rules deliberately duplicate the
 * server's (unknown ids, missing edges, bad relation targets) so users get
 * instant feedback; the server remains the authority.
 */

import type { DeltaActionWire, DeltaWire, GraphWire } from "./api.js";

export function removeNode(id: string): DeltaActionWire {
  return { type: "remove_node", id };
}

export function addNode(
  label: string,
  relations: { p: string; o: string }[] = [],
): DeltaActionWire {
  return relations.length > 0
    ? { type: "add_node", label, relations }
    : { type: "add_node", label };
}

export function replaceNode(id: string, label: string): DeltaActionWire {
  return { type: "replace_node", id, label };
}

export function modifyEdge(
  edge: { s: string; p: string; o: string },
  predicate: string,
): DeltaActionWire {
  return { type: "modify_edge", edge, predicate };
}

/** Mirror of the server's label -> id slug assignment, for previews only. */
export function slugify(label: string): string {
  const stem = label
    .toLowerCase()
    .replace(/[^a-z0-9]+/g, "-")
    .replace(/^-+|-+$/g, "");
  return stem || "node";
}

export function assignNodeId(label: string, taken: Set<string>): string {
  const base = slugify(label);
  if (!taken.has(base)) return base;
  for (let i = 2; ; i++) {
    const candidate = `${base}-${i}`;
    if (!taken.has(candidate)) return candidate;
  }
}

function hasEdge(graph: GraphWire, edge: { s: string; p: string; o: string }): boolean {
  return graph.edges.some((e) => e.s === edge.s && e.p === edge.p && e.o === edge.o);
}

function validateAction(
  graph: GraphWire,
  action: DeltaActionWire,
  taken: Set<string>,
): string[] {
  const errors: string[] = [];
  switch (action.type) {
    case "remove_node": {
      if (!action.id) errors.push("remove_node needs an id");
      else if (!taken.has(action.id)) errors.push(`unknown node ${action.id}`);
      else taken.delete(action.id);
      break;
    }
    case "add_node": {
      if (!action.label || !action.label.trim()) {
        errors.push("add_node needs a label");
        break;
      }
      const newId = assignNodeId(action.label, taken);
      for (const rel of action.relations ?? []) {
        if (!rel.p || !rel.p.trim()) errors.push("relation needs a predicate");
        if (!rel.o || !taken.has(rel.o)) {
          errors.push(`relation target ${rel.o ?? "?"} does not exist`);
        }
      }
      taken.add(newId);
      break;
    }
    case "replace_node": {
      if (!action.id) errors.push("replace_node needs an id");
      else if (!taken.has(action.id)) errors.push(`unknown node ${action.id}`);
      if (!action.label || !action.label.trim()) {
        errors.push("replace_node needs a label");
      }
      break;
    }
    case "modify_edge": {
      if (!action.edge) {
        errors.push("modify_edge needs an edge");
        break;
      }
      if (!hasEdge(graph, action.edge)) {
        errors.push(
          `edge (${action.edge.s}, ${action.edge.p}, ${action.edge.o}) does not exist`,
        );
      }
      if (!action.predicate || !action.predicate.trim()) {
        errors.push("modify_edge needs a predicate");
      }
      break;
    }
    default:
      errors.push(`unknown action type ${(action as { type: string }).type}`);
  }
  return errors;
}

/**
 * All violations of a staged delta against the displayed graph; actions are
 * checked in order with earlier removals/additions taken into account, the
 * same way the server folds them.
 */
export function validateDelta(graph: GraphWire, delta: DeltaWire): string[] {
  const taken = new Set(graph.nodes.map((n) => n.id));
  const errors: string[] = [];
  for (const action of delta.actions) {
    errors.push(...validateAction(graph, action, taken));
  }
  if (delta.actions.length === 0) errors.push("delta has no actions");
  return errors;
}

/** Node ids a delta touches, for diff highlighting in the graph view. */
export function touchedNodeIds(graph: GraphWire, delta: DeltaWire): Set<string> {
  const touched = new Set<string>();
  const taken = new Set(graph.nodes.map((n) => n.id));
  for (const action of delta.actions) {
    switch (action.type) {
      case "remove_node":
      case "replace_node":
        if (action.id) touched.add(action.id);
        break;
      case "add_node":
        if (action.label) {
          const id = assignNodeId(action.label, taken);
          taken.add(id);
          touched.add(id);
        }
        break;
      case "modify_edge":
        if (action.edge) {
          touched.add(action.edge.s);
          touched.add(action.edge.o);
        }
        break;
    }
  }
  return touched;
}
