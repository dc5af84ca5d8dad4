import { describe, expect, it } from "vitest";

import { ApiError, Client } from "../src/api.js";

function fetchStub(
  handler: (url: string, init?: RequestInit) => { status: number; body: unknown },
): typeof fetch {
  return (async (url: string | URL | Request, init?: RequestInit) => {
    const { status, body } = handler(String(url), init);
    return new Response(typeof body === "string" ? body : JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
}

describe("api client", () => {
  it("encodes the rater id in the next-item query", async () => {
    let seen = "";
    const client = new Client(
      "",
      fetchStub((url) => {
        seen = url;
        return { status: 200, body: { done: true, item: null } };
      }),
    );
    const response = await client.nextItem("rater with spaces");
    expect(response.done).toBe(true);
    expect(seen).toBe("/api/items/next?rater=rater%20with%20spaces");
  });

  it("posts ratings as JSON to /api/ratings", async () => {
    let captured: { url: string; body: unknown } | null = null;
    const client = new Client(
      "http://x",
      fetchStub((url, init) => {
        captured = { url, body: JSON.parse(String(init?.body)) };
        return { status: 200, body: { ok: true, item_id: 2 } };
      }),
    );
    await client.submitRating({
      item_id: 2,
      rater: "r",
      correctness: 1,
      granularity: 2,
      readability: 3,
    });
    expect(captured!.url).toBe("http://x/api/ratings");
    expect(captured!.body).toEqual({
      item_id: 2,
      rater: "r",
      correctness: 1,
      granularity: 2,
      readability: 3,
    });
  });

  it("turns 4xx bodies into ApiError with the field name", async () => {
    const client = new Client(
      "",
      fetchStub(() => ({
        status: 400,
        body: { error: "correctness must be an integer in [1, 5]", field: "correctness" },
      })),
    );
    try {
      await client.submitRating({
        item_id: 1,
        rater: "r",
        correctness: 9 as never,
        granularity: 1,
        readability: 1,
      });
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).field).toBe("correctness");
      expect((err as ApiError).status).toBe(400);
    }
  });

  it("posts edits with snake_case keys", async () => {
    let body: unknown = null;
    const client = new Client(
      "",
      fetchStub((_url, init) => {
        body = JSON.parse(String(init?.body));
        return { status: 200, body: { ok: true, item: null } };
      }),
    );
    await client.submitEdit(3, "verifier", ["bad span"], "fixed text");
    expect(body).toEqual({
      item_id: 3,
      approver: "verifier",
      removed_spans: ["bad span"],
      added_text: "fixed text",
    });
  });
});
