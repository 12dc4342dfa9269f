// Thin client over the governance API. Errors carry the server's error kind
// so the app can surface them inline instead of swallowing them.

import type {
  AuditEntry,
  DecisionRequest,
  EscalationTask,
  RecordDetail,
  TransitionTable,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public kind: string,
    public detail: string,
  ) {
    super(`${kind}: ${detail}`);
  }
}

export interface Session {
  baseUrl: string;
  token?: string;
}

export function connect(baseUrl: string, token?: string): Session {
  return { baseUrl: baseUrl.replace(/\/$/, ''), token };
}

async function request<T>(
  session: Session,
  method: 'GET' | 'POST',
  path: string,
  body?: unknown,
): Promise<T> {
  const headers: Record<string, string> = { 'content-type': 'application/json' };
  if (session.token) headers['authorization'] = `Bearer ${session.token}`;
  const response = await fetch(session.baseUrl + path, {
    method,
    headers,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await response.text();
  if (!response.ok) {
    let kind = `HTTP ${response.status}`;
    let detail = text;
    try {
      const parsed = JSON.parse(text);
      kind = parsed.error ?? kind;
      detail = parsed.detail ?? detail;
    } catch {
      // non-JSON error body: keep raw text
    }
    throw new ApiError(response.status, kind, detail);
  }
  return JSON.parse(text) as T;
}

export class ApiClient {
  constructor(public session: Session) {}

  listEscalations(): Promise<EscalationTask[]> {
    return request(this.session, 'GET', '/escalations');
  }

  getTask(taskId: string): Promise<EscalationTask> {
    return request(this.session, 'GET', `/escalations/${encodeURIComponent(taskId)}`);
  }

  getRecord(recordId: string): Promise<RecordDetail> {
    return request(this.session, 'GET', `/records/${encodeURIComponent(recordId)}`);
  }

  getHistory(recordId: string): Promise<AuditEntry[]> {
    return request(this.session, 'GET', `/records/${encodeURIComponent(recordId)}/history`);
  }

  getTransitionTable(): Promise<TransitionTable> {
    return request(this.session, 'GET', '/transition-table');
  }

  claim(taskId: string, humanId: string): Promise<EscalationTask> {
    return request(this.session, 'POST', `/escalations/${encodeURIComponent(taskId)}/claim`, {
      human_id: humanId,
    });
  }

  decide(taskId: string, decision: DecisionRequest): Promise<AuditEntry[]> {
    return request(
      this.session,
      'POST',
      `/escalations/${encodeURIComponent(taskId)}/decision`,
      decision,
    );
  }

  step(): Promise<Record<string, unknown>> {
    return request(this.session, 'POST', '/scenario/step');
  }
}
