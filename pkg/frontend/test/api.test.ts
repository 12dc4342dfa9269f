import { afterEach, describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError, connect } from '../src/api.js';
import { parseNdjsonChunks } from '../src/stream.js';

function mockFetch(status: number, body: unknown) {
  const impl = vi.fn(async () => new Response(JSON.stringify(body), { status }));
  vi.stubGlobal('fetch', impl);
  return impl;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('ApiClient', () => {
  it('parses successful bodies', async () => {
    mockFetch(200, [{ id: 'u-1:e1' }]);
    const client = new ApiClient(connect('http://x:1/'));
    expect(await client.listEscalations()).toEqual([{ id: 'u-1:e1' }]);
  });

  it('strips trailing slash and encodes path segments', async () => {
    const impl = mockFetch(200, { record: {}, history: [] });
    const client = new ApiClient(connect('http://x:1/'));
    await client.getRecord('u 1');
    expect(impl).toHaveBeenCalledWith('http://x:1/records/u%201', expect.anything());
  });

  it('sends the bearer token when configured', async () => {
    const impl = mockFetch(200, []);
    const client = new ApiClient(connect('http://x:1', 's3cr3t'));
    await client.listEscalations();
    const options = impl.mock.calls[0][1] as RequestInit;
    expect((options.headers as Record<string, string>)['authorization']).toBe('Bearer s3cr3t');
  });

  it('surfaces server error kinds instead of swallowing them', async () => {
    mockFetch(409, { error: 'WrongStateError', detail: 'task decided' });
    const client = new ApiClient(connect('http://x:1'));
    const error = await client
      .decide('t', {
        human_id: 'h',
        role: 'Judgment',
        action: 'AcceptRisk',
        justification: 'j',
      })
      .catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).kind).toBe('WrongStateError');
    expect((error as ApiError).status).toBe(409);
  });

  it('copes with non-JSON error bodies', async () => {
    vi.stubGlobal('fetch', vi.fn(async () => new Response('boom', { status: 500 })));
    const client = new ApiClient(connect('http://x:1'));
    const error = await client.listEscalations().catch((e: unknown) => e);
    expect((error as ApiError).detail).toBe('boom');
  });
});

describe('NDJSON parsing', () => {
  it('reassembles entries across chunk boundaries', () => {
    const parser = parseNdjsonChunks();
    const entry = { event: { id: 1 } };
    const text = JSON.stringify(entry) + '\n' + JSON.stringify({ event: { id: 2 } }) + '\n';
    const first = parser.push(text.slice(0, 10));
    expect(first).toEqual([]);
    const rest = parser.push(text.slice(10));
    expect(rest.map((e) => e.event.id)).toEqual([1, 2]);
  });

  it('ignores blank keep-alive lines', () => {
    const parser = parseNdjsonChunks();
    expect(parser.push('\n\n')).toEqual([]);
  });
});
