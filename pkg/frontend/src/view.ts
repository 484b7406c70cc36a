// DOM rendering for the annotation frames. Structure is shown as the plain
// outline/markdown text the server sends; no colors or graphical layout.

import { Combination, RevealPayload } from './api.js';
import { payloadConsistent } from './session.js';

function panel(className: string, content: string): HTMLElement {
  const element = document.createElement('pre');
  element.className = `panel ${className}`;
  element.textContent = content;
  return element;
}

export function renderContext(
  combination: Combination,
  payload: RevealPayload,
  container: HTMLElement,
): boolean {
  container.textContent = '';
  if (payload.combination !== combination || !payloadConsistent(payload)) {
    const banner = document.createElement('div');
    banner.className = 'error-banner';
    banner.textContent = 'Context payload did not match the expected combination.';
    container.appendChild(banner);
    return false;
  }
  if (payload.structure != null) {
    container.appendChild(panel('structure', payload.structure));
  }
  if (payload.text != null) {
    container.appendChild(panel('passage', payload.text));
  }
  return true;
}

export function renderQuestion(question: string, container: HTMLElement): void {
  container.textContent = '';
  const heading = document.createElement('div');
  heading.className = 'question';
  heading.textContent = question;
  container.appendChild(heading);
}

export function renderBanner(message: string, container: HTMLElement): void {
  const banner = document.createElement('div');
  banner.className = 'error-banner';
  banner.textContent = message;
  container.appendChild(banner);
}
