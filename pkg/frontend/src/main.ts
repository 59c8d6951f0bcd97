// Console entry point: wires the poll loop, graph canvas, side panels and
// toolbar together. One in-flight poll at a time; the view refreshes every
// second and the layout keeps user pan/zoom and node positions.

import { AdminApi, ApiError } from "./api.js";
import { DemoPanel } from "./demo.js";
import { layoutStep } from "./layout.js";
import { GraphModel, parseWire } from "./model.js";
import { GraphRenderer, menuActions } from "./render.js";

const POLL_INTERVAL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function toast(message: string): void {
  const box = el<HTMLDivElement>("toasts");
  const item = document.createElement("div");
  item.className = "toast";
  item.textContent = message;
  box.appendChild(item);
  setTimeout(() => item.remove(), 4000);
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.kind}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

function main(): void {
  const api = new AdminApi("");
  const model = new GraphModel();
  const demo = new DemoPanel(api, model, render);
  const canvas = el<HTMLCanvasElement>("graph");
  const menu = el<HTMLDivElement>("context-menu");
  const metaBox = el<HTMLTextAreaElement>("meta-box");
  const dynTable = el<HTMLTableSectionElement>("dyn-body");
  const badge = el<HTMLSpanElement>("conn-badge");
  const depthSlider = el<HTMLInputElement>("depth");
  const depthLabel = el<HTMLSpanElement>("depth-label");

  let depth = Number(depthSlider.value);
  let polling = false;

  const renderer = new GraphRenderer(canvas, model, {
    select(node) {
      model.selection = node ? node.id : null;
      if (node) showMeta(node.id);
    },
    contextMenu(node, x, y) {
      const actions = menuActions(model, node, {
        createLink: (source, target, mutual) =>
          api
            .editLink({ source, target, create: true, mutual })
            .then(poll)
            .catch((err) => toast(describeError(err))),
        destroyLink: (source, target) =>
          api
            .editLink({ source, target, create: false, mutual: true })
            .then(poll)
            .catch((err) => toast(describeError(err))),
        showMeta: (n) => showMeta(n.id),
        showDynLinks: (n) => showDynLinks(n.id),
      });
      openMenu(actions, x, y);
    },
  });

  function openMenu(actions: { label: string; run: () => void }[], x: number, y: number): void {
    menu.innerHTML = "";
    if (!actions.length) {
      menu.style.display = "none";
      return;
    }
    for (const action of actions) {
      const item = document.createElement("div");
      item.className = "menu-item";
      item.textContent = action.label;
      item.onclick = () => {
        menu.style.display = "none";
        action.run();
        render();
      };
      menu.appendChild(item);
    }
    menu.style.left = `${x}px`;
    menu.style.top = `${y}px`;
    menu.style.display = "block";
  }

  document.addEventListener("click", () => (menu.style.display = "none"));

  function showMeta(id: string): void {
    api
      .fetchMeta(parseWire(id).path)
      .then((xml) => (metaBox.value = xml))
      .catch((err) => toast(describeError(err)));
  }

  function showDynLinks(id: string): void {
    api
      .fetchDynLinks(parseWire(id).path)
      .then((links) => {
        dynTable.innerHTML = "";
        for (const link of links) {
          const row = document.createElement("tr");
          const target = parseWire(link.target).path.join("/") || link.target;
          row.innerHTML =
            `<td>${target}</td><td>${link.chain.join(" - ")}</td>` +
            `<td>${link.weight.toFixed(1)}</td><td>${link.hits}</td>` +
            `<td>${link.reliable ? "yes" : "no"}</td>`;
          dynTable.appendChild(row);
        }
        if (!links.length) {
          dynTable.innerHTML = "<tr><td colspan='5'>no dynamic links</td></tr>";
        }
      })
      .catch((err) => toast(describeError(err)));
  }

  async function poll(): Promise<void> {
    if (polling) return;
    polling = true;
    try {
      const view = await api.fetchView(depth);
      model.applyView(view);
      await demo.refresh();
    } catch {
      model.applyFailure();
    } finally {
      polling = false;
      render();
    }
  }

  function render(): void {
    badge.textContent = model.disconnected ? "disconnected" : "live";
    badge.className = model.disconnected ? "badge bad" : "badge ok";
    el<HTMLSpanElement>("demo-state").textContent = demo.summary();
  }

  depthSlider.oninput = () => {
    depth = Number(depthSlider.value);
    depthLabel.textContent = String(depth);
    void poll();
  };
  depthLabel.textContent = String(depth);

  el<HTMLButtonElement>("demo-create").onclick = () =>
    void demo
      .create({
        n: Number(el<HTMLInputElement>("demo-n").value),
        id_len: Number(el<HTMLInputElement>("demo-len").value),
        seed: Number(el<HTMLInputElement>("demo-seed").value),
        period: 1.0,
      })
      .then(poll);
  el<HTMLButtonElement>("demo-start").onclick = () => void demo.start();
  el<HTMLButtonElement>("demo-stop").onclick = () => void demo.stop();

  function frame(): void {
    layoutStep(model.visibleNodes(), model.visibleEdges());
    renderer.draw();
    requestAnimationFrame(frame);
  }

  void poll();
  setInterval(() => void poll(), POLL_INTERVAL_MS);
  requestAnimationFrame(frame);
}

main();
