// Typed client for the study server's JSON endpoints.

export type Combination = 'structure_only' | 'text_only' | 'structure_plus_text';

export interface NextItem {
  done: boolean;
  item_id: string | null;
  question: string | null;
}

export interface RevealPayload {
  combination: Combination;
  text: string | null;
  structure: string | null;
}

export interface ResponseBody {
  annotator: string;
  item_id: string;
  answer_text: string | null;
  unanswerable: boolean;
  elapsed_ms: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class StudyApi {
  private fetchFn: FetchLike;
  private base: string;

  constructor(fetchFn?: FetchLike, base = '') {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    this.base = base;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, `${path} failed with ${response.status}`);
    }
    return (await response.json()) as T;
  }

  next(annotator: string): Promise<NextItem> {
    return this.request<NextItem>(`/api/next?annotator=${encodeURIComponent(annotator)}`);
  }

  reveal(annotator: string, itemId: string): Promise<RevealPayload> {
    return this.request<RevealPayload>('/api/reveal', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ annotator, item_id: itemId }),
    });
  }

  async submit(body: ResponseBody): Promise<void> {
    await this.request<unknown>('/api/response', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }
}
