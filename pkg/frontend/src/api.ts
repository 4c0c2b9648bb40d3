/** Typed client for the session service; fetch is injectable for tests. */

import type {
  PartitionResponse,
  ProgressPayload,
  ReportPayload,
  SessionDetail,
  SnapshotPayload,
} from "./types.js";

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const response = await this.fetchImpl(`${this.baseUrl}/api/v1${path}`, init);
    const text = await response.text();
    if (!response.ok) throw new ApiError(response.status, text);
    return JSON.parse(text) as T;
  }

  createSession(taskKind: string): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", { task_kind: taskKind });
  }

  getSession(sid: string): Promise<SessionDetail> {
    return this.request("GET", `/sessions/${sid}`);
  }

  listSessions(): Promise<{ sessions: { id: string; task_kind: string }[] }> {
    return this.request("GET", "/sessions");
  }

  startRun(sid: string, generations: number, token: string): Promise<{ iteration: number }> {
    return this.request("POST", `/sessions/${sid}/runs`, {
      generations,
      request_token: token,
    });
  }

  getProgress(sid: string): Promise<ProgressPayload> {
    return this.request("GET", `/sessions/${sid}/progress`);
  }

  getSnapshot(sid: string, iteration: number): Promise<SnapshotPayload> {
    return this.request("GET", `/sessions/${sid}/iterations/${iteration}/snapshot`);
  }

  submitPartition(
    sid: string,
    selectedCells: number[][],
    token: string,
  ): Promise<PartitionResponse> {
    return this.request("POST", `/sessions/${sid}/partition`, {
      selected_cells: selectedCells,
      request_token: token,
    });
  }

  continueRun(
    sid: string,
    mode: string,
    penaltyWeight: number,
    generations: number,
    token: string,
  ): Promise<{ iteration: number }> {
    return this.request("POST", `/sessions/${sid}/continue`, {
      mode,
      penalty_weight: penaltyWeight,
      generations,
      request_token: token,
    });
  }

  getReport(sid: string, targetExit?: number): Promise<ReportPayload> {
    const query = targetExit ? `?target_exit=${targetExit}` : "";
    return this.request("GET", `/sessions/${sid}/report${query}`);
  }

  /** Poll progress at a fixed interval until the run leaves the running state. */
  async pollUntilIdle(
    sid: string,
    onTick: (p: ProgressPayload) => void,
    intervalMs = 1000,
    sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ): Promise<ProgressPayload> {
    for (;;) {
      const progress = await this.getProgress(sid);
      onTick(progress);
      if (progress.state !== "running") return progress;
      await sleep(intervalMs);
    }
  }
}
