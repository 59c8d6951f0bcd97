// Canvas renderer and pointer interactions: pan/zoom, node dragging, the
// right-click context menu, and the explicit two-click link flow.

import type { GraphEdge, GraphModel, GraphNode } from "./model.js";

export const NODE_RADIUS = 14;

const TYPE_COLORS: Record<string, string> = {
  node: "#7048e8",
  auto: "#2b8a3e",
  echo: "#1971c2",
  counter: "#e8590c",
  "item store": "#0b7285",
  "query engine": "#862e9c",
};

const EDGE_COLORS: Record<string, string> = {
  nesting: "#adb5bd",
  permanent: "#1971c2",
  demo: "#2f9e44",
};

export interface MenuAction {
  label: string;
  run: () => void;
}

export interface RendererCallbacks {
  contextMenu(node: GraphNode | null, screenX: number, screenY: number): void;
  select(node: GraphNode | null): void;
}

export class GraphRenderer {
  private ctx: CanvasRenderingContext2D;
  offsetX = 0;
  offsetY = 0;
  scale = 1;
  private dragging: GraphNode | null = null;
  private panning = false;
  private lastPointer = { x: 0, y: 0 };

  constructor(
    private canvas: HTMLCanvasElement,
    private model: GraphModel,
    private callbacks: RendererCallbacks,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    this.offsetX = canvas.width / 2;
    this.offsetY = canvas.height / 2;
    this.bind();
  }

  private bind(): void {
    this.canvas.addEventListener("mousedown", (e) => this.onDown(e));
    this.canvas.addEventListener("mousemove", (e) => this.onMove(e));
    this.canvas.addEventListener("mouseup", () => this.onUp());
    this.canvas.addEventListener("mouseleave", () => this.onUp());
    this.canvas.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
    this.canvas.addEventListener("contextmenu", (e) => {
      e.preventDefault();
      const node = this.hit(e.offsetX, e.offsetY);
      this.callbacks.contextMenu(node, e.clientX, e.clientY);
    });
    this.canvas.addEventListener("dblclick", (e) => {
      const node = this.hit(e.offsetX, e.offsetY);
      if (node) this.model.toggleCollapsed(node.id);
    });
  }

  toWorld(screenX: number, screenY: number): { x: number; y: number } {
    return {
      x: (screenX - this.offsetX) / this.scale,
      y: (screenY - this.offsetY) / this.scale,
    };
  }

  hit(screenX: number, screenY: number): GraphNode | null {
    const { x, y } = this.toWorld(screenX, screenY);
    for (const node of this.model.visibleNodes().reverse()) {
      const dx = node.x - x;
      const dy = node.y - y;
      if (dx * dx + dy * dy <= NODE_RADIUS * NODE_RADIUS * 1.4) return node;
    }
    return null;
  }

  private onDown(e: MouseEvent): void {
    if (e.button !== 0) return;
    const node = this.hit(e.offsetX, e.offsetY);
    this.lastPointer = { x: e.offsetX, y: e.offsetY };
    if (node) {
      this.dragging = node;
      node.pinned = true;
      this.callbacks.select(node);
    } else {
      this.panning = true;
      this.callbacks.select(null);
    }
  }

  private onMove(e: MouseEvent): void {
    const dx = e.offsetX - this.lastPointer.x;
    const dy = e.offsetY - this.lastPointer.y;
    this.lastPointer = { x: e.offsetX, y: e.offsetY };
    if (this.dragging) {
      this.dragging.x += dx / this.scale;
      this.dragging.y += dy / this.scale;
    } else if (this.panning) {
      this.offsetX += dx;
      this.offsetY += dy;
    }
  }

  private onUp(): void {
    if (this.dragging) this.dragging.pinned = false;
    this.dragging = null;
    this.panning = false;
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.1 : 1 / 1.1;
    const world = this.toWorld(e.offsetX, e.offsetY);
    this.scale = Math.min(4, Math.max(0.2, this.scale * factor));
    this.offsetX = e.offsetX - world.x * this.scale;
    this.offsetY = e.offsetY - world.y * this.scale;
  }

  draw(): void {
    const { ctx, canvas } = this;
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.setTransform(this.scale, 0, 0, this.scale, this.offsetX, this.offsetY);
    for (const edge of this.model.visibleEdges()) this.drawEdge(edge);
    for (const node of this.model.visibleNodes()) this.drawNode(node);
  }

  private drawEdge(edge: GraphEdge): void {
    const a = this.model.nodes.get(edge.source);
    const b = this.model.nodes.get(edge.target);
    if (!a || !b) return;
    const ctx = this.ctx;
    ctx.strokeStyle = EDGE_COLORS[edge.kind];
    ctx.lineWidth = edge.kind === "nesting" ? 1 : 2;
    ctx.setLineDash(edge.kind === "demo" ? [5, 3] : []);
    ctx.beginPath();
    ctx.moveTo(a.x, a.y);
    ctx.lineTo(b.x, b.y);
    ctx.stroke();
    ctx.setLineDash([]);
    if (edge.kind !== "nesting") this.drawArrowhead(a, b);
  }

  private drawArrowhead(a: GraphNode, b: GraphNode): void {
    const ctx = this.ctx;
    const dx = b.x - a.x;
    const dy = b.y - a.y;
    const dist = Math.max(1, Math.sqrt(dx * dx + dy * dy));
    const tipX = b.x - (dx / dist) * (NODE_RADIUS + 2);
    const tipY = b.y - (dy / dist) * (NODE_RADIUS + 2);
    const angle = Math.atan2(dy, dx);
    ctx.beginPath();
    ctx.moveTo(tipX, tipY);
    ctx.lineTo(tipX - 7 * Math.cos(angle - 0.4), tipY - 7 * Math.sin(angle - 0.4));
    ctx.lineTo(tipX - 7 * Math.cos(angle + 0.4), tipY - 7 * Math.sin(angle + 0.4));
    ctx.closePath();
    ctx.fillStyle = this.ctx.strokeStyle as string;
    ctx.fill();
  }

  private drawNode(node: GraphNode): void {
    const ctx = this.ctx;
    ctx.beginPath();
    ctx.arc(node.x, node.y, NODE_RADIUS, 0, Math.PI * 2);
    ctx.fillStyle = TYPE_COLORS[node.serviceType] || "#495057";
    ctx.fill();
    if (node.id === this.model.selection) {
      ctx.lineWidth = 3;
      ctx.strokeStyle = "#f59f00";
      ctx.stroke();
    }
    if (node.id === this.model.linkSource) {
      ctx.lineWidth = 2;
      ctx.setLineDash([3, 2]);
      ctx.strokeStyle = "#e03131";
      ctx.stroke();
      ctx.setLineDash([]);
    }
    ctx.fillStyle = "#212529";
    ctx.font = "11px system-ui, sans-serif";
    ctx.textAlign = "center";
    const label = node.serviceType === "auto" && node.sidId
      ? `${node.label} [${node.sidId}]`
      : node.label;
    ctx.fillText(label, node.x, node.y + NODE_RADIUS + 12);
    if (this.model.hasMarker(node.id)) {
      ctx.fillStyle = "#ffffff";
      ctx.font = "bold 12px system-ui, sans-serif";
      ctx.fillText("+", node.x, node.y + 4);
    }
  }
}

/** Build the context-menu actions for a node (or the empty canvas). */
export function menuActions(
  model: GraphModel,
  node: GraphNode | null,
  handlers: {
    createLink(source: string, target: string, mutual: boolean): void;
    destroyLink(source: string, target: string): void;
    showMeta(node: GraphNode): void;
    showDynLinks(node: GraphNode): void;
  },
): MenuAction[] {
  if (!node) {
    return model.linkSource
      ? [{ label: "Cancel link", run: () => (model.linkSource = null) }]
      : [];
  }
  const actions: MenuAction[] = [];
  if (model.linkSource && model.linkSource !== node.id) {
    const source = model.linkSource;
    actions.push({
      label: `Create link here`,
      run: () => {
        handlers.createLink(source, node.id, false);
        model.linkSource = null;
      },
    });
    actions.push({
      label: `Create mutual link here`,
      run: () => {
        handlers.createLink(source, node.id, true);
        model.linkSource = null;
      },
    });
    actions.push({
      label: `Destroy link here`,
      run: () => {
        handlers.destroyLink(source, node.id);
        model.linkSource = null;
      },
    });
    actions.push({ label: "Cancel link", run: () => (model.linkSource = null) });
  } else {
    actions.push({
      label: "Start link from here",
      run: () => (model.linkSource = node.id),
    });
  }
  actions.push({ label: "Show metadata", run: () => handlers.showMeta(node) });
  actions.push({ label: "Show dynamic links", run: () => handlers.showDynLinks(node) });
  actions.push({
    label: model.collapsed.has(node.id) ? "Expand node" : "Collapse node",
    run: () => model.toggleCollapsed(node.id),
  });
  return actions;
}
