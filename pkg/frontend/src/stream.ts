// Live audit feed: one long-lived NDJSON connection with a monotone cursor.
// On connection loss the reader reconnects from the last delivered event id,
// so every entry is seen exactly once in log order.

import type { AuditEntry } from './types.js';
import type { Session } from './api.js';

export interface FeedHandle {
  stop(): void;
  done: Promise<void>;
}

export function parseNdjsonChunks(): {
  push(chunk: string): AuditEntry[];
} {
  let buffer = '';
  return {
    push(chunk: string): AuditEntry[] {
      buffer += chunk;
      const entries: AuditEntry[] = [];
      let newline = buffer.indexOf('\n');
      while (newline >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) entries.push(JSON.parse(line) as AuditEntry);
        newline = buffer.indexOf('\n');
      }
      return entries;
    },
  };
}

export function openFeed(
  session: Session,
  since: number,
  onEntry: (entry: AuditEntry) => void,
  onError?: (error: unknown) => void,
): FeedHandle {
  const controller = new AbortController();
  let cursor = since;
  let stopped = false;

  const done = (async () => {
    while (!stopped) {
      try {
        const headers: Record<string, string> = {};
        if (session.token) headers['authorization'] = `Bearer ${session.token}`;
        const response = await fetch(
          `${session.baseUrl}/events?since=${cursor}&follow=1`,
          { headers, signal: controller.signal },
        );
        if (!response.ok || !response.body) {
          throw new Error(`event stream failed: HTTP ${response.status}`);
        }
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const parser = parseNdjsonChunks();
        for (;;) {
          const { value, done: eof } = await reader.read();
          if (eof) break;
          for (const entry of parser.push(decoder.decode(value, { stream: true }))) {
            cursor = entry.event.id;
            onEntry(entry);
          }
        }
      } catch (error) {
        if (stopped) return;
        onError?.(error);
        await new Promise((resolve) => setTimeout(resolve, 500));
      }
    }
  })();

  return {
    stop() {
      stopped = true;
      controller.abort();
    },
    done,
  };
}
