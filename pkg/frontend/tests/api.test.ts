import { afterEach, describe, expect, it, vi } from "vitest";

import { AdminApi, ApiError } from "../src/api.js";

type Call = { url: string; init?: RequestInit };

function mockFetch(responses: Array<{ status: number; body: unknown }>) {
  const calls: Call[] = [];
  let i = 0;
  vi.stubGlobal("fetch", async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    const next = responses[Math.min(i++, responses.length - 1)];
    return new Response(JSON.stringify(next.body), {
      status: next.status,
      headers: { "Content-Type": "application/json" },
    });
  });
  return calls;
}

afterEach(() => vi.unstubAllGlobals());

describe("AdminApi", () => {
  it("fetches the view at the requested depth", async () => {
    const calls = mockFetch([{ status: 200, body: { base_uri: "u", depth: 2, tree: {} } }]);
    const api = new AdminApi("http://node:1");
    const view = await api.fetchView(2);
    expect(calls[0].url).toBe("http://node:1/admin/view?depth=2");
    expect(view.depth).toBe(2);
  });

  it("sends the admin token header when configured", async () => {
    const calls = mockFetch([{ status: 200, body: [] }]);
    const api = new AdminApi("", "sesame");
    await api.fetchDynLinks(["a", "b"]);
    expect(calls[0].url).toBe("/admin/dynlinks/a/b");
    const headers = calls[0].init?.headers as Record<string, string> | undefined;
    expect(headers ?? {}).toMatchObject({ "X-Admin-Token": "sesame" });
  });

  it("posts link edits as JSON", async () => {
    const calls = mockFetch([{ status: 200, body: { ok: true } }]);
    const api = new AdminApi("");
    await api.editLink({ source: "<U>u</U><S>a</S>", target: "<U>u</U><S>b</S>",
                         create: true, mutual: true });
    expect(calls[0].url).toBe("/admin/link");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toMatchObject({ mutual: true });
  });

  it("surfaces the server's error kind", async () => {
    mockFetch([{ status: 409, body: { error: "CrossNetworkPermanentLink",
                                      message: "stay local" } }]);
    const api = new AdminApi("");
    const err = await api
      .editLink({ source: "s", target: "t", create: true, mutual: false })
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.kind).toBe("CrossNetworkPermanentLink");
    expect(err.status).toBe(409);
  });

  it("drives the demo endpoint with action payloads", async () => {
    const calls = mockFetch([{ status: 200, body: { created: true, running: false,
      round: 0, converged: false, ids: {}, links: {} } }]);
    const api = new AdminApi("");
    const status = await api.demo("create_services", { n: 5, id_len: 4, seed: 2 });
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      action: "create_services", n: 5, id_len: 4, seed: 2 });
    expect(status.created).toBe(true);
  });
});
