// Small force-directed layout: spring edges, pairwise repulsion, gentle
// centering. Positions live on the model's nodes and survive re-polls, so
// the graph does not jump when the view refreshes; dragged nodes are pinned.

import type { GraphEdge, GraphNode } from "./model.js";

export interface LayoutOptions {
  springLength: number;
  springStrength: number;
  repulsion: number;
  centering: number;
  damping: number;
  maxVelocity: number;
}

export const DEFAULT_OPTIONS: LayoutOptions = {
  springLength: 90,
  springStrength: 0.02,
  repulsion: 6000,
  centering: 0.005,
  damping: 0.85,
  maxVelocity: 18,
};

export function layoutStep(
  nodes: GraphNode[],
  edges: GraphEdge[],
  options: LayoutOptions = DEFAULT_OPTIONS,
): void {
  const byId = new Map(nodes.map((n) => [n.id, n]));
  // pairwise repulsion
  for (let i = 0; i < nodes.length; i++) {
    for (let j = i + 1; j < nodes.length; j++) {
      const a = nodes[i];
      const b = nodes[j];
      let dx = a.x - b.x;
      let dy = a.y - b.y;
      let dist2 = dx * dx + dy * dy;
      if (dist2 < 1) {
        // coincident nodes: nudge apart deterministically
        dx = (i - j) * 0.1 || 0.1;
        dy = 0.1;
        dist2 = dx * dx + dy * dy;
      }
      const force = options.repulsion / dist2;
      const dist = Math.sqrt(dist2);
      const fx = (dx / dist) * force;
      const fy = (dy / dist) * force;
      a.vx += fx;
      a.vy += fy;
      b.vx -= fx;
      b.vy -= fy;
    }
  }
  // springs along every edge kind
  for (const edge of edges) {
    const a = byId.get(edge.source);
    const b = byId.get(edge.target);
    if (!a || !b || a === b) continue;
    const dx = b.x - a.x;
    const dy = b.y - a.y;
    const dist = Math.max(1, Math.sqrt(dx * dx + dy * dy));
    const stretch = (dist - options.springLength) * options.springStrength;
    const fx = (dx / dist) * stretch;
    const fy = (dy / dist) * stretch;
    a.vx += fx;
    a.vy += fy;
    b.vx -= fx;
    b.vy -= fy;
  }
  // integrate
  for (const node of nodes) {
    if (node.pinned) {
      node.vx = 0;
      node.vy = 0;
      continue;
    }
    node.vx = (node.vx - node.x * options.centering) * options.damping;
    node.vy = (node.vy - node.y * options.centering) * options.damping;
    const speed = Math.sqrt(node.vx * node.vx + node.vy * node.vy);
    if (speed > options.maxVelocity) {
      node.vx = (node.vx / speed) * options.maxVelocity;
      node.vy = (node.vy / speed) * options.maxVelocity;
    }
    node.x += node.vx;
    node.y += node.vy;
  }
}

export function settle(
  nodes: GraphNode[],
  edges: GraphEdge[],
  iterations = 120,
  options: LayoutOptions = DEFAULT_OPTIONS,
): void {
  for (let i = 0; i < iterations; i++) layoutStep(nodes, edges, options);
}
