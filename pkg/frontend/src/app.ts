// Console orchestration: holds state, talks to the API, reacts to the live
// feed. DOM wiring lives in main.ts; this class is headless and testable.

import { ApiClient, ApiError, connect } from './api.js';
import { appendEntries, validateDecision } from './logic.js';
import { openFeed, type FeedHandle } from './stream.js';
import type {
  AuditEntry,
  DecisionAction,
  EscalationTask,
  HumanRole,
  RecordDetail,
  TransitionTable,
} from './types.js';

export interface ConsoleState {
  tasks: EscalationTask[];
  selectedTaskId: string | null;
  detail: RecordDetail | null;
  selectedTask: EscalationTask | null;
  feed: AuditEntry[];
  table: TransitionTable | null;
  error: string | null;
  notice: string | null;
}

export class ConsoleApp {
  readonly api: ApiClient;
  readonly humanId: string;
  state: ConsoleState = {
    tasks: [],
    selectedTaskId: null,
    detail: null,
    selectedTask: null,
    feed: [],
    table: null,
    error: null,
    notice: null,
  };
  private feedHandle: FeedHandle | null = null;
  private listeners: Array<() => void> = [];

  constructor(baseUrl: string, humanId: string, token?: string) {
    this.api = new ApiClient(connect(baseUrl, token));
    this.humanId = humanId;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  private fail(error: unknown): void {
    this.state.error = error instanceof Error ? error.message : String(error);
    this.notify();
  }

  async start(): Promise<void> {
    this.state.table = await this.api.getTransitionTable();
    await this.refreshQueue();
    const since = this.state.feed.length
      ? this.state.feed[this.state.feed.length - 1].event.id
      : 0;
    this.feedHandle = openFeed(
      this.api.session,
      since,
      (entry) => this.onFeedEntry(entry),
      (error) => {
        // transient: the reader reconnects by itself, but surface it
        this.state.notice = `feed reconnecting: ${error instanceof Error ? error.message : error}`;
        this.notify();
      },
    );
  }

  stop(): void {
    this.feedHandle?.stop();
    this.feedHandle = null;
  }

  async refreshQueue(): Promise<void> {
    try {
      this.state.tasks = await this.api.listEscalations();
      this.state.error = null;
    } catch (error) {
      this.fail(error);
      return;
    }
    if (
      this.state.selectedTaskId &&
      !this.state.tasks.some((t) => t.id === this.state.selectedTaskId)
    ) {
      // the selected task left the queue (decided or de-escalated)
      this.state.selectedTaskId = null;
      this.state.detail = null;
      this.state.selectedTask = null;
    }
    this.notify();
  }

  async select(taskId: string): Promise<void> {
    try {
      const task =
        this.state.tasks.find((t) => t.id === taskId) ?? (await this.api.getTask(taskId));
      this.state.selectedTaskId = taskId;
      this.state.selectedTask = task;
      this.state.detail = await this.api.getRecord(task.record_id);
      this.state.error = null;
    } catch (error) {
      this.fail(error);
      return;
    }
    this.notify();
  }

  async claim(taskId: string): Promise<void> {
    try {
      const task = await this.api.claim(taskId, this.humanId);
      this.state.tasks = this.state.tasks.map((t) => (t.id === task.id ? task : t));
      if (this.state.selectedTaskId === task.id) this.state.selectedTask = task;
      this.state.error = null;
    } catch (error) {
      this.fail(error);
      return;
    }
    this.notify();
  }

  /**
   * Submit a decision. Validation failures never leave the client; a
   * WrongState response means another operator won the race, so the task is
   * refreshed and marked Decided rather than silently dropped.
   */
  async act(
    taskId: string,
    action: DecisionAction,
    role: HumanRole,
    justification: string,
  ): Promise<boolean> {
    const validation = validateDecision(justification);
    if (validation) {
      this.state.error = validation;
      this.notify();
      return false;
    }
    try {
      await this.api.decide(taskId, {
        human_id: this.humanId,
        role,
        action,
        justification,
      });
      this.state.notice = `${action} submitted for ${taskId}`;
      this.state.error = null;
    } catch (error) {
      if (error instanceof ApiError && error.kind === 'WrongStateError') {
        try {
          const task = await this.api.getTask(taskId);
          this.state.tasks = this.state.tasks.map((t) => (t.id === task.id ? task : t));
          if (this.state.selectedTaskId === task.id) this.state.selectedTask = task;
        } catch {
          // task may be gone entirely; queue refresh below handles it
        }
        this.state.error = `another operator decided ${taskId} first`;
      } else {
        this.fail(error);
        return false;
      }
    }
    await this.refreshQueue();
    return this.state.error === null;
  }

  private onFeedEntry(entry: AuditEntry): void {
    this.state.feed = appendEntries(this.state.feed, [entry]);
    const recordId = this.state.detail?.record.id;
    if (recordId && entry.event.target === recordId) {
      // keep the open detail view live without manual refresh
      void this.api
        .getRecord(recordId)
        .then((detail) => {
          this.state.detail = detail;
          this.notify();
        })
        .catch(() => undefined);
    }
    if (entry.new_state === 'Escalated' || entry.event.kind === 'HumanDecision') {
      void this.refreshQueue();
    }
    this.notify();
  }
}
