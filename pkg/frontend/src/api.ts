// Typed client for the annotation service API. The service is the source
// of truth; this layer only shapes requests and surfaces typed errors.

export interface RubricDimension {
  question: string;
  scale: Record<string, string>;
}

export type Rubric = Record<string, RubricDimension>;

export interface Item {
  item_id: number;
  audio1_url: string;
  audio2_url: string;
  explanation: string;
  tier: number;
  status: string;
  notice: string;
  instructions: string;
  rubric: Rubric;
}

export interface NextItemResponse {
  done: boolean;
  item: Item | null;
}

export interface RatingBody {
  item_id: number;
  rater: string;
  correctness: number;
  granularity: number;
  readability: number;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly field?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let message = `request failed with status ${response.status}`;
  let field: string | undefined;
  try {
    const body = await response.json();
    if (typeof body.error === "string") message = body.error;
    if (typeof body.field === "string") field = body.field;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(message, response.status, field);
}

export class Client {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  nextItem(rater: string): Promise<NextItemResponse> {
    return this.getJson(`/api/items/next?rater=${encodeURIComponent(rater)}`);
  }

  item(id: number): Promise<{ item: Item }> {
    return this.getJson(`/api/items/${id}`);
  }

  submitRating(body: RatingBody): Promise<{ ok: boolean; item_id: number }> {
    return this.postJson("/api/ratings", body);
  }

  submitEdit(
    itemId: number,
    approver: string,
    removedSpans: string[],
    addedText: string,
  ): Promise<{ ok: boolean; item: Item }> {
    return this.postJson("/api/edits", {
      item_id: itemId,
      approver,
      removed_spans: removedSpans,
      added_text: addedText,
    });
  }

  async exportCsv(): Promise<string> {
    const response = await this.fetchFn(this.baseUrl + "/api/export");
    if (!response.ok) throw await parseError(response);
    return response.text();
  }

  audioUrl(item: Item, which: 1 | 2): string {
    return this.baseUrl + (which === 1 ? item.audio1_url : item.audio2_url);
  }
}
