// Scripted browser-side test against a live node: spawns the Python server,
// then drives the console's own API client and graph model against it.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AdminApi } from "../src/api.js";
import { GraphModel } from "../src/model.js";

const ROOT = dirname(dirname(dirname(fileURLToPath(import.meta.url))));
const PYTHON = process.env.SERVNET_PYTHON || "python3";

function pythonAvailable(): boolean {
  const probe = spawnSync(PYTHON, ["-c", "import servnet"], {
    env: { ...process.env, PYTHONPATH: join(ROOT, "src") },
  });
  return probe.status === 0;
}

const HAVE_NODE = pythonAvailable();

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

describe.skipIf(!HAVE_NODE)("console against a live node", () => {
  let server: ChildProcess;
  let api: AdminApi;

  beforeAll(async () => {
    server = spawn(PYTHON, ["-m", "servnet.cli", "serve", "--listen", "127.0.0.1:0"], {
      env: { ...process.env, PYTHONPATH: join(ROOT, "src") },
      stdio: ["ignore", "pipe", "inherit"],
    });
    const base: string = await new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("server did not start")), 15000);
      let buffered = "";
      server.stdout!.on("data", (chunk: Buffer) => {
        buffered += chunk.toString();
        const match = /listening at (http:\/\/[^\s]+)/.exec(buffered);
        if (match) {
          clearTimeout(timer);
          resolve(match[1]);
        }
      });
    });
    api = new AdminApi(base);
  }, 20000);

  afterAll(() => {
    server?.kill();
  });

  it("shows a newly added service within two poll cycles", async () => {
    const model = new GraphModel();
    model.applyView(await api.fetchView(3));
    expect(model.visibleNodes()).toHaveLength(1); // bare root
    const created = Date.now();
    await api.demo("create_services", { n: 4, id_len: 6, seed: 9 });
    let found = false;
    while (!found && Date.now() - created < 2000) {
      model.applyView(await api.fetchView(3));
      found = [...model.nodes.values()].some((n) => n.label === "auto-00");
      if (!found) await sleep(100);
    }
    expect(found).toBe(true);
    expect(Date.now() - created).toBeLessThan(2000);
  }, 10000);

  it("renders a created permanent link as an edge", async () => {
    const model = new GraphModel();
    model.applyView(await api.fetchView(3));
    const a = [...model.nodes.values()].find((n) => n.label === "auto-00")!;
    const b = [...model.nodes.values()].find((n) => n.label === "auto-01")!;
    await api.editLink({ source: a.id, target: b.id, create: true, mutual: false });
    model.applyView(await api.fetchView(3));
    const permanent = model
      .visibleEdges()
      .filter((e) => e.kind === "permanent")
      .map((e) => [e.source, e.target]);
    expect(permanent).toContainEqual([a.id, b.id]);
  }, 10000);

  it("demo panel's converged graph matches the API's link graph", async () => {
    await api.demo("create_services", { n: 6, id_len: 6, seed: 3, period: 0.02 });
    await api.demo("start");
    let status = await api.demo("status");
    const deadline = Date.now() + 15000;
    while (!status.converged && Date.now() < deadline) {
      await sleep(50);
      status = await api.demo("status");
    }
    expect(status.converged).toBe(true);
    const model = new GraphModel();
    model.applyView(await api.fetchView(3));
    model.applyDemo(status);
    const names = (id: string) =>
      [...model.nodes.values()].find((n) => n.id === id)!.label;
    const rendered: Record<string, string[]> = {};
    for (const edge of model.visibleEdges().filter((e) => e.kind === "demo")) {
      (rendered[names(edge.source)] ??= []).push(names(edge.target));
    }
    for (const targets of Object.values(rendered)) targets.sort();
    expect(rendered).toEqual(status.links);
    // every demo service's string ID is available for display
    for (const id of Object.values(status.ids)) expect(id).toHaveLength(6);
  }, 30000);
});
