// Session state machine, kept free of DOM concerns so it is testable.
// The invariants live here: submit stays disabled until every rating
// widget holds an integer in [1, 5], the POST body always equals the
// widget values, and a failed submit preserves the draft for retry.

import { ApiError, Client, Item } from "./api.js";

export const DIMENSIONS = ["correctness", "granularity", "readability"] as const;
export type Dimension = (typeof DIMENSIONS)[number];

export interface RatingDraft {
  correctness: number | null;
  granularity: number | null;
  readability: number | null;
}

export interface EditDraft {
  removedSpans: string[];
  addedText: string;
}

export type Phase = "idle" | "loading" | "rating" | "done" | "error";

export function emptyDraft(): RatingDraft {
  return { correctness: null, granularity: null, readability: null };
}

export function isValidScore(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value) && value >= 1 && value <= 5;
}

export function canSubmit(draft: RatingDraft): boolean {
  return DIMENSIONS.every((dim) => isValidScore(draft[dim]));
}

export interface SessionSnapshot {
  phase: Phase;
  rater: string;
  item: Item | null;
  draft: RatingDraft;
  editDraft: EditDraft;
  error: string;
  errorField: string | null;
  offline: boolean;
}

export class Session {
  private phase: Phase = "idle";
  private item: Item | null = null;
  private draft: RatingDraft = emptyDraft();
  private editDraft: EditDraft = { removedSpans: [], addedText: "" };
  private error = "";
  private errorField: string | null = null;
  private offline = false;

  constructor(
    private readonly client: Client,
    readonly rater: string,
  ) {
    if (!rater) throw new Error("a rater id is required to start a session");
  }

  snapshot(): SessionSnapshot {
    return {
      phase: this.phase,
      rater: this.rater,
      item: this.item,
      draft: { ...this.draft },
      editDraft: { ...this.editDraft, removedSpans: [...this.editDraft.removedSpans] },
      error: this.error,
      errorField: this.errorField,
      offline: this.offline,
    };
  }

  setScore(dim: Dimension, value: number | null): void {
    this.draft[dim] = value;
    this.errorField = null;
    this.error = "";
  }

  setEditDraft(removedSpans: string[], addedText: string): void {
    this.editDraft = { removedSpans, addedText };
  }

  canSubmit(): boolean {
    return this.phase === "rating" && this.item !== null && canSubmit(this.draft);
  }

  async loadNext(): Promise<void> {
    this.phase = "loading";
    try {
      const response = await this.client.nextItem(this.rater);
      this.offline = false;
      if (response.done || response.item === null) {
        this.phase = "done";
        this.item = null;
      } else {
        this.phase = "rating";
        this.item = response.item;
        this.draft = emptyDraft();
        this.editDraft = { removedSpans: [], addedText: "" };
      }
      this.error = "";
      this.errorField = null;
    } catch (err) {
      this.phase = "error";
      this.offline = !(err instanceof ApiError);
      this.error = err instanceof Error ? err.message : String(err);
    }
  }

  /** POST exactly the widget values; on success the next item loads. */
  async submitRating(): Promise<boolean> {
    if (!this.canSubmit() || this.item === null) return false;
    const body = {
      item_id: this.item.item_id,
      rater: this.rater,
      correctness: this.draft.correctness as number,
      granularity: this.draft.granularity as number,
      readability: this.draft.readability as number,
    };
    try {
      await this.client.submitRating(body);
    } catch (err) {
      // the draft survives any failure so the rater can correct and retry
      if (err instanceof ApiError) {
        this.error = err.message;
        this.errorField = err.field ?? null;
        this.offline = false;
      } else {
        this.error = "network error; your scores are kept, retry when back online";
        this.offline = true;
      }
      return false;
    }
    await this.loadNext();
    return true;
  }

  /** Verification mode: submit an edit, then re-fetch to show the result. */
  async submitEdit(): Promise<boolean> {
    if (this.item === null) return false;
    try {
      const result = await this.client.submitEdit(
        this.item.item_id,
        this.rater,
        this.editDraft.removedSpans,
        this.editDraft.addedText,
      );
      this.item = result.item;
      this.editDraft = { removedSpans: [], addedText: "" };
      this.error = "";
      this.errorField = null;
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.error = err.message;
        this.errorField = err.field ?? null;
      } else {
        this.error = "network error; the edit draft is kept";
        this.offline = true;
      }
      return false;
    }
  }
}
