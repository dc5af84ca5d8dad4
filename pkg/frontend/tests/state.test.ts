import { describe, expect, it } from "vitest";

import { ApiError, Client, Item, NextItemResponse } from "../src/api.js";
import { Session, canSubmit, emptyDraft, isValidScore } from "../src/state.js";

function fakeItem(id: number): Item {
  return {
    item_id: id,
    audio1_url: `/api/audio/a${id}`,
    audio2_url: `/api/audio/b${id}`,
    explanation: `explanation ${id}`,
    tier: 1,
    status: "pending",
    notice: "volume notice",
    instructions: "task instructions",
    rubric: {
      correctness: { question: "q1", scale: { "1": "bad", "5": "great" } },
      granularity: { question: "q2", scale: {} },
      readability: { question: "q3", scale: {} },
    },
  };
}

class FakeClient extends Client {
  items: Item[];
  ratings: unknown[] = [];
  failWith: Error | null = null;

  constructor(items: Item[]) {
    super("", (() => {
      throw new Error("fake client never fetches");
    }) as unknown as typeof fetch);
    this.items = items;
  }

  override async nextItem(rater: string): Promise<NextItemResponse> {
    void rater;
    if (this.failWith) throw this.failWith;
    const item = this.items.shift() ?? null;
    return { done: item === null, item };
  }

  override async submitRating(body: never): Promise<{ ok: boolean; item_id: number }> {
    if (this.failWith) throw this.failWith;
    this.ratings.push(body);
    return { ok: true, item_id: (body as { item_id: number }).item_id };
  }
}

describe("score validation", () => {
  it("accepts only integers 1..5", () => {
    expect(isValidScore(1)).toBe(true);
    expect(isValidScore(5)).toBe(true);
    expect(isValidScore(0)).toBe(false);
    expect(isValidScore(6)).toBe(false);
    expect(isValidScore(3.5)).toBe(false);
    expect(isValidScore(null)).toBe(false);
    expect(isValidScore("4")).toBe(false);
  });

  it("blocks submit until every dimension is set and valid", () => {
    const draft = emptyDraft();
    expect(canSubmit(draft)).toBe(false);
    draft.correctness = 3;
    draft.granularity = 4;
    expect(canSubmit(draft)).toBe(false);
    draft.readability = 5;
    expect(canSubmit(draft)).toBe(true);
    draft.granularity = 0;
    expect(canSubmit(draft)).toBe(false);
  });
});

describe("session flow", () => {
  it("requires a rater id", () => {
    expect(() => new Session(new FakeClient([]), "")).toThrow(/rater/);
  });

  it("walks the queue and posts exactly the widget values", async () => {
    const client = new FakeClient([fakeItem(1), fakeItem(2)]);
    const session = new Session(client, "r1");
    await session.loadNext();
    expect(session.snapshot().phase).toBe("rating");
    expect(session.snapshot().item?.item_id).toBe(1);
    expect(session.canSubmit()).toBe(false);

    session.setScore("correctness", 3);
    session.setScore("granularity", 4);
    session.setScore("readability", 5);
    expect(session.canSubmit()).toBe(true);
    const ok = await session.submitRating();
    expect(ok).toBe(true);
    expect(client.ratings).toEqual([
      { item_id: 1, rater: "r1", correctness: 3, granularity: 4, readability: 5 },
    ]);
    // next item loaded, draft cleared
    const snap = session.snapshot();
    expect(snap.item?.item_id).toBe(2);
    expect(snap.draft).toEqual(emptyDraft());
  });

  it("refuses to submit an incomplete draft", async () => {
    const client = new FakeClient([fakeItem(1)]);
    const session = new Session(client, "r1");
    await session.loadNext();
    session.setScore("correctness", 2);
    expect(await session.submitRating()).toBe(false);
    expect(client.ratings).toHaveLength(0);
  });

  it("shows the completion screen when the queue is empty", async () => {
    const session = new Session(new FakeClient([]), "r1");
    await session.loadNext();
    expect(session.snapshot().phase).toBe("done");
  });

  it("surfaces the service's field error inline and keeps the draft", async () => {
    const client = new FakeClient([fakeItem(1)]);
    const session = new Session(client, "r1");
    await session.loadNext();
    session.setScore("correctness", 1);
    session.setScore("granularity", 1);
    session.setScore("readability", 1);
    client.failWith = new ApiError("granularity must be an integer in [1, 5]", 400, "granularity");
    expect(await session.submitRating()).toBe(false);
    const snap = session.snapshot();
    expect(snap.errorField).toBe("granularity");
    expect(snap.draft.correctness).toBe(1); // draft preserved
    expect(snap.phase).toBe("rating");
  });

  it("keeps the draft across network failures and allows retry", async () => {
    const client = new FakeClient([fakeItem(1), fakeItem(2)]);
    const session = new Session(client, "r1");
    await session.loadNext();
    session.setScore("correctness", 4);
    session.setScore("granularity", 4);
    session.setScore("readability", 4);
    client.failWith = new TypeError("fetch failed");
    expect(await session.submitRating()).toBe(false);
    expect(session.snapshot().offline).toBe(true);
    expect(session.snapshot().draft.readability).toBe(4);
    client.failWith = null;
    expect(await session.submitRating()).toBe(true);
    expect(client.ratings).toHaveLength(1);
  });
});
