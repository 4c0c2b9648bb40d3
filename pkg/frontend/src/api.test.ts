import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "./api.js";

function mockFetch(handlers: Record<string, (init?: RequestInit) => unknown>) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const key = `${init?.method ?? "GET"} ${url}`;
    const handler = handlers[key];
    if (!handler) {
      return new Response(JSON.stringify({ detail: "not found" }), { status: 404 });
    }
    const value = handler(init);
    return new Response(JSON.stringify(value), { status: 200 });
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("creates sessions and reads ids", async () => {
    const { impl, calls } = mockFetch({
      "POST /api/v1/sessions": () => ({ session_id: "abc123" }),
    });
    const client = new ApiClient("", impl);
    const created = await client.createSession("planner");
    expect(created.session_id).toBe("abc123");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ task_kind: "planner" });
  });

  it("carries the request token on mutations", async () => {
    const { impl, calls } = mockFetch({
      "POST /api/v1/sessions/s/continue": () => ({ iteration: 1 }),
    });
    const client = new ApiClient("", impl);
    await client.continueRun("s", "combined", 10, 64, "tok-1");
    const body = JSON.parse(String(calls[0].init?.body));
    expect(body.request_token).toBe("tok-1");
    expect(body.mode).toBe("combined");
    expect(body.penalty_weight).toBe(10);
  });

  it("raises ApiError with status on failure", async () => {
    const impl = async () =>
      new Response(JSON.stringify({ detail: "no partition submitted yet" }), {
        status: 409,
      });
    const client = new ApiClient("", impl);
    await expect(client.getReport("s")).rejects.toThrowError(ApiError);
    await expect(client.getReport("s")).rejects.toThrow(/409/);
  });

  it("polls until the run leaves the running state", async () => {
    let polls = 0;
    const impl = async () => {
      polls += 1;
      const state = polls < 3 ? "running" : "idle";
      return new Response(
        JSON.stringify({
          state,
          generation: polls,
          total_generations: 3,
          occupancy: polls * 10,
          failure: null,
        }),
        { status: 200 },
      );
    };
    const client = new ApiClient("", impl);
    const ticks: number[] = [];
    const sleep = vi.fn(async () => {});
    const final = await client.pollUntilIdle("s", (p) => ticks.push(p.generation), 5, sleep);
    expect(final.state).toBe("idle");
    expect(ticks).toEqual([1, 2, 3]);
    expect(sleep).toHaveBeenCalledTimes(2);
  });
});
