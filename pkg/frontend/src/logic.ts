// Pure view-model logic: queue ordering, evidence accounting, legal actions.
// Kept DOM-free so every rule the console enforces is unit-testable.

import type {
  AuditEntry,
  DecisionAction,
  EscalationTask,
  TransitionTable,
  UncertaintyRecord,
} from './types.js';

export function taskRisk(task: EscalationTask): number {
  const own = task.view.unresolved_uncertainties.find((r) => r.id === task.record_id);
  return own?.risk ?? 0;
}

/** Queue ordering contract: highest risk first, then newest escalation. */
export function sortQueue(tasks: EscalationTask[]): EscalationTask[] {
  return [...tasks].sort(
    (a, b) => taskRisk(b) - taskRisk(a) || b.created_event_id - a.created_event_id,
  );
}

export interface EvidenceCounts {
  supporting: number;
  conflicting: number;
  neutral: number;
  total: number;
}

export function evidenceCounts(task: EscalationTask): EvidenceCounts {
  const v = task.view;
  return {
    supporting: v.supporting_evidence.length,
    conflicting: v.conflicting_evidence.length,
    neutral: v.neutral_evidence.length,
    total:
      v.supporting_evidence.length +
      v.conflicting_evidence.length +
      v.neutral_evidence.length,
  };
}

/** Every evidence item that appears anywhere in the record's history. */
export function evidenceIdsFromHistory(history: AuditEntry[]): Set<string> {
  const ids = new Set<string>();
  for (const entry of history) {
    const payload = entry.event.payload as {
      evidence?: { id: string }[];
      record?: { evidence?: { id: string }[] };
    };
    for (const item of payload.evidence ?? []) ids.add(item.id);
    for (const item of payload.record?.evidence ?? []) ids.add(item.id);
  }
  return ids;
}

const GUARD_TO_ACTION: Record<string, DecisionAction> = {
  'human-resolves': 'Resolve',
  'human-accepts-risk': 'AcceptRisk',
  'human-requests-more-evidence': 'RequestMoreEvidence',
};

/**
 * Decision buttons for a record are derived from the server's transition
 * table, never hardcoded: exactly the human-decision rules applicable to the
 * record's state and category, plus AuthorizeAdaptation (which adapts the
 * system without deciding the record's fate).
 */
export function legalDecisionActions(
  record: UncertaintyRecord,
  table: TransitionTable,
): DecisionAction[] {
  const actions: DecisionAction[] = [];
  for (const rule of table.rules) {
    if (rule.from !== record.state || rule.event_kind !== 'HumanDecision') continue;
    if (rule.epistemological_only && record.kind.category === 'Ontological') continue;
    const action = GUARD_TO_ACTION[rule.guard];
    if (action && !actions.includes(action)) actions.push(action);
  }
  if (actions.length > 0) actions.push('AuthorizeAdaptation');
  return actions;
}

/** Legal next states for the lifecycle diagram. */
export function legalNextStates(record: UncertaintyRecord, table: TransitionTable): string[] {
  const targets = new Set<string>();
  for (const rule of table.rules) {
    if (rule.from !== record.state) continue;
    if (rule.epistemological_only && record.kind.category === 'Ontological') continue;
    targets.add(rule.to);
  }
  return table.states.filter((s) => targets.has(s));
}

/** Client-side validation; the server re-validates. */
export function validateDecision(justification: string): string | null {
  if (!justification.trim()) {
    return 'justification must be non-empty: decisions are recorded with accountability';
  }
  return null;
}

/** Feed reducer: dedupe by event id, keep log order. */
export function appendEntries(feed: AuditEntry[], incoming: AuditEntry[]): AuditEntry[] {
  const seen = new Set(feed.map((e) => e.event.id));
  const merged = [...feed];
  for (const entry of incoming) {
    if (!seen.has(entry.event.id)) {
      seen.add(entry.event.id);
      merged.push(entry);
    }
  }
  merged.sort((a, b) => a.event.id - b.event.id);
  return merged;
}

export function describeEntry(entry: AuditEntry): string {
  const transition =
    entry.prior_state && entry.new_state && entry.prior_state !== entry.new_state
      ? `${entry.prior_state} -> ${entry.new_state}`
      : (entry.new_state ?? '');
  const parts = [
    `#${entry.event.id}`,
    `t${entry.event.timestamp}`,
    entry.event.kind,
    entry.event.target,
    transition,
  ].filter(Boolean);
  if (entry.actor) parts.push(`by ${entry.actor}`);
  if (entry.residual) parts.push('[residual]');
  return parts.join(' ');
}
