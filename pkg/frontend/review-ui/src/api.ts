/* Client for the review service HTTP API.
 *
 * Decisions carry an idempotency key generated once per submit intent:
 * a retry after a network failure reuses the key, so the ledger never
 * records the same decision twice.
 */

export type Decision = "approved" | "flagged" | "excluded";

export interface AnnotationBox {
  box: [number, number, number, number];
  kind: "pii" | "product" | "order";
  fine_label: string;
  element_kind: "text" | "input" | "image";
  source_key: string;
  has_value: boolean;
}

export interface PreviewMeta {
  dims: [number, number];
  fill_state: string;
  annotations: AnnotationBox[];
  image_url: string;
}

export interface ReviewItem {
  layout_id: string;
  decision: string;
  iteration_count: number;
  history: { decision: string; note: string }[];
  previews: Record<string, PreviewMeta>;
  remaining: number;
}

export interface GateReport {
  layouts: number;
  by_status: Record<string, number>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export function makeIdempotencyKey(): string {
  return `${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class ReviewApi {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      throw new ApiError(`${path}: HTTP ${response.status}`, response.status);
    }
    return (await response.json()) as T;
  }

  async queueNext(): Promise<ReviewItem | null> {
    const data = await this.request<ReviewItem | { done: true }>("/queue/next");
    return "done" in data ? null : data;
  }

  async getLayout(layoutId: string): Promise<ReviewItem> {
    return this.request<ReviewItem>(`/layout/${layoutId}`);
  }

  /** Submit a decision; pass the same key again to retry safely. */
  async decide(
    layoutId: string, decision: Decision, note = "",
    idempotencyKey: string = makeIdempotencyKey(),
  ): Promise<{ key: string }> {
    await this.request(`/layout/${layoutId}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        decision, note, idempotency_key: idempotencyKey,
      }),
    });
    return { key: idempotencyKey };
  }

  async rerender(layoutId: string): Promise<ReviewItem> {
    return this.request<ReviewItem>(`/layout/${layoutId}/rerender`, {
      method: "POST",
    });
  }

  async report(): Promise<GateReport> {
    return this.request<GateReport>("/report");
  }
}
