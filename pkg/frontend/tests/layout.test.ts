import { describe, expect, it } from "vitest";

import { DEFAULT_OPTIONS, layoutStep, settle } from "../src/layout.js";
import type { GraphEdge, GraphNode } from "../src/model.js";

function node(id: string, x: number, y: number): GraphNode {
  return {
    id,
    label: id,
    path: [id],
    depth: 1,
    serviceType: "echo",
    sidId: id,
    shared: false,
    truncated: false,
    x,
    y,
    vx: 0,
    vy: 0,
    pinned: false,
  };
}

function dist(a: GraphNode, b: GraphNode): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}

describe("force layout", () => {
  it("pulls connected nodes together and pushes strangers apart", () => {
    const a = node("a", -10, 0);
    const b = node("b", 10, 0);
    const c = node("c", 0, 15);
    const edges: GraphEdge[] = [{ source: "a", target: "b", kind: "nesting" }];
    settle([a, b, c], edges, 300);
    expect(dist(a, b)).toBeLessThan(dist(a, c));
    expect(dist(a, b)).toBeLessThan(dist(b, c));
  });

  it("spring settles near the configured edge length", () => {
    const a = node("a", -200, 0);
    const b = node("b", 200, 0);
    settle([a, b], [{ source: "a", target: "b", kind: "permanent" }], 500);
    const settled = dist(a, b);
    expect(settled).toBeGreaterThan(DEFAULT_OPTIONS.springLength * 0.5);
    expect(settled).toBeLessThan(DEFAULT_OPTIONS.springLength * 3);
  });

  it("pinned nodes never move", () => {
    const a = node("a", 5, 5);
    a.pinned = true;
    const b = node("b", 6, 5);
    settle([a, b], [{ source: "a", target: "b", kind: "nesting" }], 50);
    expect(a.x).toBe(5);
    expect(a.y).toBe(5);
    expect(dist(a, b)).toBeGreaterThan(1);
  });

  it("separates coincident nodes instead of dividing by zero", () => {
    const a = node("a", 0, 0);
    const b = node("b", 0, 0);
    layoutStep([a, b], []);
    expect(Number.isFinite(a.x) && Number.isFinite(b.x)).toBe(true);
    settle([a, b], [], 50);
    expect(dist(a, b)).toBeGreaterThan(1);
  });
});
