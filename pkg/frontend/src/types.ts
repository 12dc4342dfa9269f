// Wire types mirroring the governance API's canonical JSON bodies.

export interface KindTriple {
  category: 'Epistemological' | 'Ontological';
  family: string;
  leaf: string;
}

export interface EvidenceItem {
  id: string;
  timestamp: number;
  source: string;
  polarity: 'Supporting' | 'Conflicting' | 'Neutral';
  weight: number;
  payload: string;
  origin_agent: string;
}

export interface RiskAssessment {
  severity: number;
  likelihood: number;
  risk: number;
}

export interface UncertaintyRecord {
  id: string;
  kind: KindTriple;
  scope: string[];
  provenance: { created_by: string; created_at: number; valid_from: number; source_artifact: string };
  evidence: EvidenceItem[];
  confidence: number;
  risk: RiskAssessment;
  expiry: number | null;
  upstream: string[];
  downstream: string[];
  state: string;
  belief_statement: string;
  belief_agent: string;
  topic: string;
  annotations: Record<string, string>;
}

export interface RecordSummary {
  id: string;
  kind: KindTriple;
  state: string;
  confidence: number;
  risk: number;
  topic: string;
  belief_statement: string;
}

export interface TaskView {
  current_decision: string;
  unresolved_uncertainties: RecordSummary[];
  supporting_evidence: EvidenceItem[];
  conflicting_evidence: EvidenceItem[];
  neutral_evidence: EvidenceItem[];
  assumptions: string[];
  consequences: { of_action: string; of_inaction: string };
}

export interface EscalationTask {
  id: string;
  record_id: string;
  episode: number;
  created_event_id: number;
  status: 'Pending' | 'Claimed' | 'Decided';
  claimed_by: string | null;
  view: TaskView;
}

export interface LifecycleEvent {
  id: number;
  timestamp: number;
  target: string;
  kind: string;
  payload: Record<string, unknown>;
  actor: string;
}

export interface AuditEntry {
  event: LifecycleEvent;
  prior_state: string | null;
  new_state: string | null;
  guard_fired: string | null;
  actor: string;
  policy_version: string;
  residual: boolean;
  engine_completed: boolean;
}

export interface TransitionRule {
  from: string;
  event_kind: string;
  guard: string;
  to: string;
  epistemological_only: boolean;
  engine_completed: boolean;
  residual: boolean;
}

export interface TransitionTable {
  format_version: number;
  states: string[];
  terminal_states: string[];
  lifecycle_event_kinds: string[];
  rules: TransitionRule[];
}

export interface RecordDetail {
  record: UncertaintyRecord;
  history: AuditEntry[];
}

export type DecisionAction = 'Resolve' | 'AcceptRisk' | 'RequestMoreEvidence' | 'AuthorizeAdaptation';

export type HumanRole = 'Interpretation' | 'Judgment' | 'RiskAcceptance' | 'Governance';

export const HUMAN_ROLES: HumanRole[] = [
  'Interpretation',
  'Judgment',
  'RiskAcceptance',
  'Governance',
];

export interface DecisionRequest {
  human_id: string;
  role: HumanRole;
  action: DecisionAction;
  justification: string;
}
