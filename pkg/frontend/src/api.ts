/** Thin typed client for the audit service HTTP API. All state lives on
 * the server; this module only moves documents back and forth. */

import type {
  CreateSessionRequest,
  JudgmentDoc,
  ProgramDoc,
  SessionDoc,
  StepsDoc,
  WitnessesDoc,
} from './types.js';

/** The service answered with a non-2xx status. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

/** The service could not be reached at all (connection refused, DNS, …). */
export class OfflineError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
    this.name = 'OfflineError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface JudgeOutcome {
  /** true when the server had already recorded this judgment (409). */
  duplicate: boolean;
  status: SessionDoc['status'] | null;
  pending: number | null;
  recorded: JudgmentDoc | null;
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string = '',
    fetchImpl?: FetchLike,
  ) {
    // bind so `this` inside the browser's fetch stays the global scope
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  async listSessions(): Promise<SessionDoc[]> {
    const doc = await this.request('GET', '/api/sessions');
    return doc.sessions as SessionDoc[];
  }

  async createSession(req: CreateSessionRequest): Promise<SessionDoc> {
    return (await this.request('POST', '/api/sessions', req)) as SessionDoc;
  }

  async session(id: string): Promise<SessionDoc> {
    return (await this.request('GET', `/api/sessions/${id}`)) as SessionDoc;
  }

  async witnesses(id: string): Promise<WitnessesDoc> {
    return (await this.request('GET', `/api/sessions/${id}/witnesses`)) as WitnessesDoc;
  }

  async program(id: string): Promise<ProgramDoc> {
    return (await this.request('GET', `/api/sessions/${id}/program`)) as ProgramDoc;
  }

  async steps(id: string): Promise<StepsDoc> {
    return (await this.request('GET', `/api/sessions/${id}/steps`)) as StepsDoc;
  }

  /** Submit one judgment. A 409 (already judged) resolves silently with
   * duplicate=true so a double-click never surfaces as an error. */
  async judge(
    id: string,
    witnessId: string,
    appropriate: boolean,
    note = '',
  ): Promise<JudgeOutcome> {
    try {
      const doc = await this.request('POST', `/api/sessions/${id}/judgments`, {
        witness_id: witnessId,
        appropriate,
        note,
      });
      return {
        duplicate: false,
        status: doc.status ?? null,
        pending: doc.pending ?? null,
        recorded: doc.recorded ?? null,
      };
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        return { duplicate: true, status: null, pending: null, recorded: null };
      }
      throw err;
    }
  }

  private async request(
    method: 'GET' | 'POST',
    path: string,
    body?: unknown,
  ): Promise<Record<string, any>> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { 'content-type': 'application/json' },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new OfflineError(cause);
    }
    const text = await res.text();
    let doc: Record<string, any> = {};
    if (text) {
      try {
        doc = JSON.parse(text);
      } catch {
        doc = { error: text };
      }
    }
    if (!res.ok) {
      throw new ApiError(res.status, String(doc.error ?? res.statusText));
    }
    return doc;
  }
}
