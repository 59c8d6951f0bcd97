// Self-organization demo panel: create services with string IDs, start and
// stop rounds, and keep the model's demo status fresh while running.

import type { AdminApi, DemoStatus } from "./api.js";
import type { GraphModel } from "./model.js";

export interface DemoParams {
  n: number;
  id_len: number;
  seed: number;
  period: number;
}

export class DemoPanel {
  status: DemoStatus | null = null;
  lastError: string | null = null;

  constructor(
    private api: AdminApi,
    private model: GraphModel,
    private onChange: () => void = () => {},
  ) {}

  private apply(status: DemoStatus): void {
    this.status = status;
    this.lastError = null;
    this.model.applyDemo(status);
    this.onChange();
  }

  private fail(err: unknown): void {
    this.lastError = err instanceof Error ? err.message : String(err);
    this.onChange();
  }

  async create(params: DemoParams): Promise<void> {
    try {
      this.apply(await this.api.demo("create_services", { ...params }));
    } catch (err) {
      this.fail(err);
    }
  }

  async start(): Promise<void> {
    try {
      this.apply(await this.api.demo("start"));
    } catch (err) {
      this.fail(err); // DemoNotCreated renders as a prompt to create first
    }
  }

  async stop(): Promise<void> {
    try {
      this.apply(await this.api.demo("stop"));
    } catch (err) {
      this.fail(err);
    }
  }

  async refresh(): Promise<void> {
    if (!this.status || !this.status.created) return;
    try {
      this.apply(await this.api.demo("status"));
    } catch (err) {
      this.fail(err);
    }
  }

  summary(): string {
    if (this.lastError) return this.lastError;
    if (!this.status || !this.status.created) {
      return "no demo services; create some first";
    }
    const state = this.status.converged
      ? "converged"
      : this.status.running
        ? "running"
        : "stopped";
    return `round ${this.status.round} (${state})`;
  }
}
