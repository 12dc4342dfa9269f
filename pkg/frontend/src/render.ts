// HTML renderers: pure string producers so layout is testable without a DOM.

import {
  describeEntry,
  evidenceCounts,
  legalDecisionActions,
  legalNextStates,
  sortQueue,
  taskRisk,
} from './logic.js';
import type {
  AuditEntry,
  EscalationTask,
  EvidenceItem,
  RecordDetail,
  TransitionTable,
} from './types.js';
import { HUMAN_ROLES } from './types.js';

export function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderQueue(tasks: EscalationTask[], selected?: string): string {
  if (tasks.length === 0) {
    return '<p class="empty">No pending escalations.</p>';
  }
  const cards = sortQueue(tasks).map((task) => {
    const record = task.view.unresolved_uncertainties.find((r) => r.id === task.record_id);
    const counts = evidenceCounts(task);
    const klass = task.id === selected ? 'task-card selected' : 'task-card';
    return `<article class="${klass}" data-task-id="${esc(task.id)}">
      <header>
        <span class="risk">risk ${taskRisk(task).toFixed(3)}</span>
        <span class="status">${esc(task.status)}${task.claimed_by ? ` by ${esc(task.claimed_by)}` : ''}</span>
      </header>
      <h3>${esc(record?.topic || task.record_id)}</h3>
      <p>${esc(task.view.current_decision)}</p>
      <footer>
        <span>${esc(record?.kind.family ?? '')}/${esc(record?.kind.leaf ?? '')}</span>
        <span>${counts.total} evidence items</span>
      </footer>
    </article>`;
  });
  return cards.join('\n');
}

function renderEvidencePane(title: string, items: EvidenceItem[]): string {
  const rows = items
    .map(
      (item) => `<li data-evidence-id="${esc(item.id)}">
        <span class="weight">w=${item.weight}</span>
        <span class="origin">${esc(item.origin_agent || item.source)}</span>
        <span class="payload">${esc(item.payload)}</span>
      </li>`,
    )
    .join('\n');
  return `<section class="evidence-pane" data-pane="${esc(title)}">
    <h4>${esc(title)} (${items.length})</h4>
    <ul>${rows}</ul>
  </section>`;
}

export function renderLifecycle(detail: RecordDetail, table: TransitionTable): string {
  const nexts = new Set(legalNextStates(detail.record, table));
  const nodes = table.states
    .map((state) => {
      const classes = ['state'];
      if (state === detail.record.state) classes.push('current');
      if (nexts.has(state)) classes.push('reachable');
      if (table.terminal_states.includes(state)) classes.push('terminal');
      return `<span class="${classes.join(' ')}" data-state="${esc(state)}">${esc(state)}</span>`;
    })
    .join('<span class="arrow"> </span>');
  return `<div class="lifecycle">${nodes}</div>`;
}

export function renderDetail(
  task: EscalationTask,
  detail: RecordDetail,
  table: TransitionTable,
): string {
  const view = task.view;
  const counts = evidenceCounts(task);
  const actions = legalDecisionActions(detail.record, table);
  const buttons = actions
    .map(
      (action) =>
        `<button type="button" class="act" data-action="${esc(action)}">${esc(action)}</button>`,
    )
    .join('\n');
  const roles = HUMAN_ROLES.map((r) => `<option value="${r}">${r}</option>`).join('');
  const unresolved = view.unresolved_uncertainties
    .map(
      (r) =>
        `<li>${esc(r.id)} ${esc(r.kind.family)}/${esc(r.kind.leaf)} — ${esc(r.state)}, risk ${r.risk.toFixed(3)}, c=${r.confidence.toFixed(3)}</li>`,
    )
    .join('\n');
  const assumptions = view.assumptions.map((a) => `<li>${esc(a)}</li>`).join('\n');
  return `<div class="detail" data-record-id="${esc(detail.record.id)}">
  <h2>${esc(detail.record.topic || detail.record.id)}</h2>
  <p class="decision"><strong>Current decision:</strong> ${esc(view.current_decision)}</p>
  ${renderLifecycle(detail, table)}
  <section class="unresolved">
    <h4>Unresolved uncertainties (${view.unresolved_uncertainties.length})</h4>
    <ul>${unresolved}</ul>
  </section>
  <div class="evidence-columns" data-evidence-count="${counts.total}">
    ${renderEvidencePane('Supporting', view.supporting_evidence)}
    ${renderEvidencePane('Conflicting', view.conflicting_evidence)}
    ${renderEvidencePane('Neutral', view.neutral_evidence)}
  </div>
  <section class="assumptions"><h4>Assumptions</h4><ul>${assumptions}</ul></section>
  <section class="consequences">
    <p><strong>If acted on:</strong> ${esc(view.consequences.of_action)}</p>
    <p><strong>If not acted on:</strong> ${esc(view.consequences.of_inaction)}</p>
  </section>
  <form class="decision-form" data-task-id="${esc(task.id)}">
    <label>Role <select name="role">${roles}</select></label>
    <label>Justification <textarea name="justification" rows="2"></textarea></label>
    <div class="actions">${buttons}</div>
  </form>
</div>`;
}

export function renderFeed(entries: AuditEntry[], limit = 50): string {
  const shown = entries.slice(-limit).reverse();
  const rows = shown
    .map((entry) => `<li data-event-id="${entry.event.id}">${esc(describeEntry(entry))}</li>`)
    .join('\n');
  return `<ul class="feed">${rows}</ul>`;
}

export function renderError(message: string | null): string {
  return message ? `<div class="error" role="alert">${esc(message)}</div>` : '';
}

export function renderNotice(message: string | null): string {
  return message ? `<div class="notice">${esc(message)}</div>` : '';
}
