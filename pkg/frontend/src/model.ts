// Graph model mirroring the latest network view. Pure state + diffing so it
// stays unit-testable; rendering and polling live elsewhere. Everything here
// is reconstructible from API responses plus UI preferences.

import type { DemoStatus, NetworkView, ViewNode } from "./api.js";

export interface WireHandle {
  baseUri: string;
  path: string[];
}

const WIRE_RE = /<U>([^<>]*)<\/U>((?:<S>[^<>]*<\/S>)*)/;

/** Parse the <U>..</U><S>..</S> wire form of a handle. */
export function parseWire(wire: string): WireHandle {
  const match = WIRE_RE.exec(wire);
  if (!match || match[0] !== wire) {
    throw new Error(`malformed wire handle: ${wire}`);
  }
  const path: string[] = [];
  const segs = match[2];
  const segRe = /<S>([^<>]*)<\/S>/g;
  let seg: RegExpExecArray | null;
  while ((seg = segRe.exec(segs)) !== null) path.push(seg[1]);
  return { baseUri: match[1], path };
}

export type EdgeKind = "nesting" | "permanent" | "demo";

export interface GraphNode {
  id: string; // wire handle
  label: string;
  path: string[];
  depth: number;
  serviceType: string;
  sidId: string;
  shared: boolean;
  truncated: boolean;
  // layout state, preserved across polls
  x: number;
  y: number;
  vx: number;
  vy: number;
  pinned: boolean;
}

export interface GraphEdge {
  source: string;
  target: string;
  kind: EdgeKind;
}

/** Polls missed before the console shows the disconnected badge. */
export const MAX_MISSED_POLLS = 2;

export class GraphModel {
  nodes = new Map<string, GraphNode>();
  edges: GraphEdge[] = [];
  rootId: string | null = null;
  baseUri = "";
  collapsed = new Set<string>();
  selection: string | null = null;
  linkSource: string | null = null;
  missedPolls = 0;
  lastViewAt = 0;
  demo: DemoStatus | null = null;

  get disconnected(): boolean {
    return this.missedPolls > MAX_MISSED_POLLS;
  }

  /** Diff-apply a fresh view; layout state of surviving nodes is kept. */
  applyView(view: NetworkView, now: number = Date.now()): void {
    this.missedPolls = 0;
    this.lastViewAt = now;
    this.baseUri = view.base_uri;
    const seen = new Set<string>();
    const edges: GraphEdge[] = [];
    this.rootId = view.tree.handle;
    this.visit(view.tree, null, seen, edges);
    for (const id of [...this.nodes.keys()]) {
      if (!seen.has(id)) this.nodes.delete(id);
    }
    for (const id of [...this.collapsed]) {
      if (!seen.has(id)) this.collapsed.delete(id);
    }
    if (this.selection && !seen.has(this.selection)) this.selection = null;
    if (this.linkSource && !seen.has(this.linkSource)) this.linkSource = null;
    this.edges = edges.concat(this.demoEdges());
  }

  private visit(
    viewNode: ViewNode,
    parentId: string | null,
    seen: Set<string>,
    edges: GraphEdge[],
  ): void {
    const id = viewNode.handle;
    seen.add(id);
    const existing = this.nodes.get(id);
    if (existing) {
      existing.label = viewNode.name || "node";
      existing.depth = viewNode.depth;
      existing.serviceType = viewNode.service_type;
      existing.sidId = viewNode.sid.id;
      existing.shared = viewNode.sid.shared;
      existing.truncated = viewNode.truncated;
    } else {
      const base = parentId ? this.nodes.get(parentId) : undefined;
      const angle = Math.random() * Math.PI * 2;
      const radius = 40 + Math.random() * 40;
      this.nodes.set(id, {
        id,
        label: viewNode.name || "node",
        path: parseWire(id).path,
        depth: viewNode.depth,
        serviceType: viewNode.service_type,
        sidId: viewNode.sid.id,
        shared: viewNode.sid.shared,
        truncated: viewNode.truncated,
        x: (base ? base.x : 0) + Math.cos(angle) * radius,
        y: (base ? base.y : 0) + Math.sin(angle) * radius,
        vx: 0,
        vy: 0,
        pinned: false,
      });
    }
    if (parentId) edges.push({ source: parentId, target: id, kind: "nesting" });
    for (const link of viewNode.links) {
      edges.push({ source: id, target: link, kind: "permanent" });
    }
    for (const child of viewNode.children) {
      this.visit(child, id, seen, edges);
    }
  }

  /** A poll failed; after MAX_MISSED_POLLS the model reports disconnected. */
  applyFailure(): void {
    this.missedPolls += 1;
  }

  applyDemo(status: DemoStatus | null): void {
    this.demo = status;
    this.edges = this.edges.filter((e) => e.kind !== "demo").concat(this.demoEdges());
  }

  /** Demo link graph mapped onto node ids (services live under /demo). */
  private demoEdges(): GraphEdge[] {
    if (!this.demo || !this.demo.created) return [];
    const byName = new Map<string, string>();
    for (const node of this.nodes.values()) {
      if (node.path.length === 2 && node.path[0] === "demo") {
        byName.set(node.path[1], node.id);
      }
    }
    const out: GraphEdge[] = [];
    for (const [from, targets] of Object.entries(this.demo.links)) {
      const source = byName.get(from);
      if (!source) continue;
      for (const to of targets) {
        const target = byName.get(to);
        if (target) out.push({ source, target, kind: "demo" });
      }
    }
    return out;
  }

  toggleCollapsed(id: string): void {
    if (this.collapsed.has(id)) this.collapsed.delete(id);
    else this.collapsed.add(id);
  }

  /** Nodes hidden because an ancestor is collapsed. */
  private hiddenIds(): Set<string> {
    const hidden = new Set<string>();
    const children = new Map<string, string[]>();
    for (const edge of this.edges) {
      if (edge.kind !== "nesting") continue;
      const kids = children.get(edge.source) || [];
      kids.push(edge.target);
      children.set(edge.source, kids);
    }
    const bury = (id: string) => {
      for (const kid of children.get(id) || []) {
        if (!hidden.has(kid)) {
          hidden.add(kid);
          bury(kid);
        }
      }
    };
    for (const id of this.collapsed) bury(id);
    return hidden;
  }

  visibleNodes(): GraphNode[] {
    const hidden = this.hiddenIds();
    return [...this.nodes.values()].filter((n) => !hidden.has(n.id));
  }

  visibleEdges(): GraphEdge[] {
    const hidden = this.hiddenIds();
    return this.edges.filter(
      (e) =>
        !hidden.has(e.source) &&
        !hidden.has(e.target) &&
        this.nodes.has(e.source) &&
        this.nodes.has(e.target),
    );
  }

  /** A node shows an expansion marker when collapsed here or truncated by depth. */
  hasMarker(id: string): boolean {
    const node = this.nodes.get(id);
    if (!node) return false;
    return node.truncated || this.collapsed.has(id);
  }
}
