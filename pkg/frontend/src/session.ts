// One annotation item's state machine.
//
// The timer starts exactly at the question_shown -> content_revealed
// transition (after the reveal payload has arrived) and elapsed time is read
// from a monotonic clock at submission. No context is fetched before
// reveal() is called.

import { NextItem, RevealPayload, StudyApi, Combination } from './api.js';

export type Phase = 'question_shown' | 'content_revealed' | 'submitted';

export class PayloadMismatch extends Error {}

export function payloadConsistent(payload: RevealPayload): boolean {
  const expectations: Record<Combination, { text: boolean; structure: boolean }> = {
    text_only: { text: true, structure: false },
    structure_only: { text: false, structure: true },
    structure_plus_text: { text: true, structure: true },
  };
  const expected = expectations[payload.combination];
  if (!expected) {
    return false;
  }
  return (payload.text != null) === expected.text
    && (payload.structure != null) === expected.structure;
}

export class Session {
  phase: Phase = 'question_shown';
  itemId: string | null = null;
  question: string | null = null;
  done = false;

  private revealTimestamp: number | null = null;
  private pendingElapsedMs: number | null = null;
  private readonly now: () => number;

  constructor(
    private readonly api: StudyApi,
    private readonly annotator: string,
    now?: () => number,
  ) {
    this.now = now ?? (() => performance.now());
  }

  async loadNext(): Promise<NextItem> {
    const next = await this.api.next(this.annotator);
    this.done = next.done;
    this.itemId = next.item_id;
    this.question = next.question;
    this.phase = 'question_shown';
    this.revealTimestamp = null;
    this.pendingElapsedMs = null;
    return next;
  }

  async reveal(): Promise<RevealPayload> {
    if (this.phase !== 'question_shown' || this.itemId === null) {
      throw new Error(`cannot reveal in phase ${this.phase}`);
    }
    const payload = await this.api.reveal(this.annotator, this.itemId);
    if (!payloadConsistent(payload)) {
      // The timer does not start on a bad payload; the caller shows an
      // error banner and the phase stays question_shown.
      throw new PayloadMismatch(`payload inconsistent for ${payload.combination}`);
    }
    this.revealTimestamp = this.now();
    this.phase = 'content_revealed';
    return payload;
  }

  async submit(answer: { answerText: string } | { unanswerable: true }): Promise<void> {
    if (this.phase !== 'content_revealed' || this.itemId === null
        || this.revealTimestamp === null) {
      throw new Error(`cannot submit in phase ${this.phase}`);
    }
    // A failed post preserves the originally measured elapsed time so a
    // retry does not inflate it.
    const elapsed = this.pendingElapsedMs
      ?? Math.max(1, Math.round(this.now() - this.revealTimestamp));
    this.pendingElapsedMs = elapsed;
    const body = {
      annotator: this.annotator,
      item_id: this.itemId,
      answer_text: 'answerText' in answer ? answer.answerText : null,
      unanswerable: !('answerText' in answer),
      elapsed_ms: elapsed,
    };
    await this.api.submit(body);
    this.phase = 'submitted';
    this.pendingElapsedMs = null;
  }
}
