// Shared builders for console tests.

import type {
  AuditEntry,
  EscalationTask,
  EvidenceItem,
  RecordDetail,
  TransitionTable,
  UncertaintyRecord,
} from '../src/types.js';

export function evidence(id: string, polarity: EvidenceItem['polarity'], payload = ''): EvidenceItem {
  return {
    id,
    timestamp: 1,
    source: 'AgentReasoning',
    polarity,
    weight: polarity === 'Neutral' ? 0 : 0.5,
    payload,
    origin_agent: 'agent-x',
  };
}

export function record(overrides: Partial<UncertaintyRecord> = {}): UncertaintyRecord {
  return {
    id: 'u-1',
    kind: { category: 'Epistemological', family: 'Inferential', leaf: 'Prediction' },
    scope: ['decision:test'],
    provenance: { created_by: 'a', created_at: 1, valid_from: 1, source_artifact: 's' },
    evidence: [],
    confidence: 0.72,
    risk: { severity: 0.85, likelihood: 0.75, risk: 0.6375 },
    expiry: null,
    upstream: [],
    downstream: [],
    state: 'Escalated',
    belief_statement: 'suspected finding',
    belief_agent: 'agent-x',
    topic: 'test topic',
    annotations: {},
    ...overrides,
  };
}

export function task(overrides: Partial<EscalationTask> = {}, rec = record()): EscalationTask {
  return {
    id: `${rec.id}:e1`,
    record_id: rec.id,
    episode: 1,
    created_event_id: 10,
    status: 'Pending',
    claimed_by: null,
    view: {
      current_decision: rec.belief_statement,
      unresolved_uncertainties: [
        {
          id: rec.id,
          kind: rec.kind,
          state: rec.state,
          confidence: rec.confidence,
          risk: rec.risk.risk,
          topic: rec.topic,
          belief_statement: rec.belief_statement,
        },
      ],
      supporting_evidence: [evidence('e1', 'Supporting', 'pro')],
      conflicting_evidence: [evidence('e2', 'Conflicting', 'con')],
      neutral_evidence: [evidence('e3', 'Neutral', 'note')],
      assumptions: ['risk is severity x likelihood'],
      consequences: { of_action: 'commits now', of_inaction: 'stays blocked' },
    },
    ...overrides,
  };
}

export function detail(rec = record()): RecordDetail {
  return { record: rec, history: [] };
}

export const TABLE: TransitionTable = {
  format_version: 1,
  states: ['Detected', 'Characterized', 'Mitigated', 'Resolved', 'Escalated', 'Expired'],
  terminal_states: ['Expired', 'Resolved'],
  lifecycle_event_kinds: [
    'CharacterizationCompleted',
    'MitigationInitiated',
    'EvidenceAccumulated',
    'DecisionCommitted',
    'OrchestratorEscalation',
    'HumanDecision',
    'TimerElapsed',
  ],
  rules: [
    { from: 'Detected', event_kind: 'CharacterizationCompleted', guard: 'always', to: 'Characterized', epistemological_only: false, engine_completed: false, residual: false },
    { from: 'Characterized', event_kind: 'MitigationInitiated', guard: 'always', to: 'Mitigated', epistemological_only: false, engine_completed: false, residual: false },
    { from: 'Mitigated', event_kind: 'EvidenceAccumulated', guard: 'resolution-thresholds-met', to: 'Resolved', epistemological_only: true, engine_completed: false, residual: false },
    { from: 'Mitigated', event_kind: 'DecisionCommitted', guard: 'always', to: 'Expired', epistemological_only: false, engine_completed: false, residual: true },
    { from: 'Mitigated', event_kind: 'EvidenceAccumulated', guard: 'risk-above-escalation', to: 'Escalated', epistemological_only: false, engine_completed: false, residual: false },
    { from: 'Mitigated', event_kind: 'OrchestratorEscalation', guard: 'always', to: 'Escalated', epistemological_only: false, engine_completed: false, residual: false },
    { from: 'Escalated', event_kind: 'EvidenceAccumulated', guard: 'risk-refined-within-escalation', to: 'Mitigated', epistemological_only: false, engine_completed: false, residual: false },
    { from: 'Escalated', event_kind: 'HumanDecision', guard: 'human-requests-more-evidence', to: 'Mitigated', epistemological_only: false, engine_completed: false, residual: false },
    { from: 'Escalated', event_kind: 'HumanDecision', guard: 'human-accepts-risk', to: 'Expired', epistemological_only: false, engine_completed: false, residual: true },
    { from: 'Escalated', event_kind: 'HumanDecision', guard: 'human-resolves', to: 'Resolved', epistemological_only: true, engine_completed: true, residual: false },
    { from: 'Escalated', event_kind: 'TimerElapsed', guard: 'expiry-reached', to: 'Expired', epistemological_only: false, engine_completed: true, residual: true },
  ],
};

export function auditEntry(id: number, overrides: Partial<AuditEntry> = {}): AuditEntry {
  return {
    event: { id, timestamp: 1, target: 'u-1', kind: 'EvidenceAccumulated', payload: {}, actor: 'a' },
    prior_state: 'Mitigated',
    new_state: 'Mitigated',
    guard_fired: null,
    actor: 'a',
    policy_version: 'policy-v1',
    residual: false,
    engine_completed: false,
    ...overrides,
  };
}
