// Single-page annotation flow: question frame, "Show content" reveal, timed
// answer entry or unanswerable marking, then the next assigned item. One item
// at a time, no back navigation.

import { StudyApi } from './api.js';
import { PayloadMismatch, Session } from './session.js';
import { renderBanner, renderContext, renderQuestion } from './view.js';

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

export interface StartOptions {
  api?: StudyApi;
  annotator?: string;
  now?: () => number;
}

export async function start(options: StartOptions = {}): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const annotator = options.annotator ?? params.get('annotator');
  const questionBox = el<HTMLElement>('question-box');
  const contextBox = el<HTMLElement>('context-box');
  const statusBox = el<HTMLElement>('status-box');
  const revealButton = el<HTMLButtonElement>('reveal-button');
  const answerInput = el<HTMLInputElement>('answer-input');
  const submitButton = el<HTMLButtonElement>('submit-button');
  const unanswerableButton = el<HTMLButtonElement>('unanswerable-button');
  const answerRow = el<HTMLElement>('answer-row');

  if (!annotator) {
    renderBanner('Add ?annotator=<your id> to the URL to begin.', statusBox);
    return;
  }
  const session = new Session(options.api ?? new StudyApi(), annotator, options.now);

  function showQuestionFrame(): void {
    contextBox.textContent = '';
    statusBox.textContent = '';
    answerInput.value = '';
    answerRow.hidden = true;
    revealButton.hidden = false;
  }

  async function advance(): Promise<void> {
    const next = await session.loadNext();
    if (next.done) {
      questionBox.textContent = '';
      contextBox.textContent = '';
      answerRow.hidden = true;
      revealButton.hidden = true;
      statusBox.textContent = 'All assigned items are done. Thank you!';
      return;
    }
    renderQuestion(next.question ?? '', questionBox);
    showQuestionFrame();
  }

  revealButton.addEventListener('click', async () => {
    try {
      const payload = await session.reveal();
      renderContext(payload.combination, payload, contextBox);
      revealButton.hidden = true;
      answerRow.hidden = false;
      answerInput.focus();
    } catch (error) {
      if (error instanceof PayloadMismatch) {
        renderBanner('Context did not match; timer not started.', statusBox);
      } else {
        renderBanner('Could not load content. Try again.', statusBox);
      }
    }
  });

  async function submit(answer: { answerText: string } | { unanswerable: true }):
      Promise<void> {
    try {
      await session.submit(answer);
      await advance();
    } catch {
      renderBanner('Submission failed. Your timing is preserved; retry.', statusBox);
    }
  }

  submitButton.addEventListener('click', () => {
    const text = answerInput.value.trim();
    if (text) {
      void submit({ answerText: text });
    }
  });
  answerInput.addEventListener('keydown', (event) => {
    if (event.key === 'Enter' && answerInput.value.trim()) {
      void submit({ answerText: answerInput.value.trim() });
    }
  });
  unanswerableButton.addEventListener('click', () => {
    void submit({ unanswerable: true });
  });

  await advance();
}

if (typeof document !== 'undefined' && document.getElementById('question-box')) {
  void start();
}
