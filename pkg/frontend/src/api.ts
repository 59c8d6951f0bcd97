// Typed client for the node's JSON admin API. The console talks to the
// node only through these endpoints.

export interface SidInfo {
  id: string;
  shared: boolean;
}

export interface ViewNode {
  name: string;
  sid: SidInfo;
  service_type: string;
  depth: number;
  handle: string;
  links: string[];
  children: ViewNode[];
  truncated: boolean;
}

export interface NetworkView {
  base_uri: string;
  depth: number;
  tree: ViewNode;
}

export interface DynLink {
  target: string;
  chain: string[];
  weight: number;
  hits: number;
  reliable: boolean;
}

export interface DemoStatus {
  created: boolean;
  running: boolean;
  round: number;
  converged: boolean;
  ids: Record<string, string>;
  links: Record<string, string[]>;
}

export interface LinkRequest {
  source: string;
  target: string;
  create: boolean;
  mutual: boolean;
}

export class ApiError extends Error {
  constructor(public status: number, public kind: string, message: string) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let kind = `HTTP ${resp.status}`;
  let message = resp.statusText;
  try {
    const body = await resp.json();
    if (body && body.error) {
      kind = body.error;
      message = body.message || message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, kind, message);
}

export class AdminApi {
  constructor(private base: string = "", private token?: string) {}

  private headers(json: boolean): Record<string, string> {
    const out: Record<string, string> = {};
    if (json) out["Content-Type"] = "application/json";
    if (this.token) out["X-Admin-Token"] = this.token;
    return out;
  }

  private async get(path: string): Promise<Response> {
    const resp = await fetch(this.base + path, { headers: this.headers(false) });
    if (!resp.ok) throw await parseError(resp);
    return resp;
  }

  private async post(path: string, payload: unknown): Promise<Response> {
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(payload),
    });
    if (!resp.ok) throw await parseError(resp);
    return resp;
  }

  async fetchView(depth: number): Promise<NetworkView> {
    const resp = await this.get(`/admin/view?depth=${depth}`);
    return (await resp.json()) as NetworkView;
  }

  /** Metadata XML for the service at a path ([] = the node root). */
  async fetchMeta(path: string[]): Promise<string> {
    const suffix = path.map(encodeURIComponent).join("/");
    const resp = await this.get(`/admin/meta/${suffix}`);
    return await resp.text();
  }

  async fetchDynLinks(path: string[]): Promise<DynLink[]> {
    const suffix = path.map(encodeURIComponent).join("/");
    const resp = await this.get(`/admin/dynlinks/${suffix}`);
    return (await resp.json()) as DynLink[];
  }

  async editLink(req: LinkRequest): Promise<void> {
    await this.post("/admin/link", req);
  }

  async demo(
    action: "create_services" | "start" | "stop" | "status",
    params: Record<string, number> = {},
  ): Promise<DemoStatus> {
    const resp = await this.post("/admin/demo", { action, ...params });
    return (await resp.json()) as DemoStatus;
  }
}
