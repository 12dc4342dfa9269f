// Browser bootstrap: wires ConsoleApp state to the page.

import { ConsoleApp } from './app.js';
import { renderDetail, renderError, renderFeed, renderNotice, renderQueue } from './render.js';
import type { DecisionAction, HumanRole } from './types.js';

function param(name: string, fallback: string): string {
  const url = new URL(window.location.href);
  return url.searchParams.get(name) ?? window.localStorage.getItem(`ugov.${name}`) ?? fallback;
}

const baseUrl = param('api', 'http://127.0.0.1:7340');
const humanId = param('operator', 'operator');
const token = param('token', '') || undefined;

const app = new ConsoleApp(baseUrl, humanId, token);

const $ = (selector: string): HTMLElement => {
  const node = document.querySelector(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node as HTMLElement;
};

function draw(): void {
  $('#queue').innerHTML = renderQueue(app.state.tasks, app.state.selectedTaskId ?? undefined);
  $('#messages').innerHTML =
    renderError(app.state.error) + renderNotice(app.state.notice);
  $('#feed').innerHTML = renderFeed(app.state.feed);
  const detailHost = $('#detail');
  if (app.state.selectedTask && app.state.detail && app.state.table) {
    detailHost.innerHTML = renderDetail(app.state.selectedTask, app.state.detail, app.state.table);
  } else {
    detailHost.innerHTML = '<p class="empty">Select an escalation to review it.</p>';
  }
}

app.onChange(draw);

document.addEventListener('click', (event) => {
  const target = event.target as HTMLElement;
  const card = target.closest<HTMLElement>('.task-card');
  if (card?.dataset.taskId) {
    void app.select(card.dataset.taskId).then(() => app.claim(card.dataset.taskId!));
    return;
  }
  const button = target.closest<HTMLButtonElement>('button.act');
  if (button) {
    const form = button.closest<HTMLFormElement>('form.decision-form');
    if (!form?.dataset.taskId) return;
    const role = (form.querySelector('[name=role]') as HTMLSelectElement).value as HumanRole;
    const justification = (
      form.querySelector('[name=justification]') as HTMLTextAreaElement
    ).value;
    void app.act(
      form.dataset.taskId,
      button.dataset.action as DecisionAction,
      role,
      justification,
    );
  }
});

const stepButton = document.querySelector('#step');
stepButton?.addEventListener('click', () => {
  void app.api.step().then(
    () => app.refreshQueue(),
    (error) => {
      app.state.error = error instanceof Error ? error.message : String(error);
      draw();
    },
  );
});

void app.start().then(draw, (error) => {
  $('#messages').innerHTML = renderError(
    `cannot reach ${baseUrl}: ${error instanceof Error ? error.message : error}`,
  );
});
