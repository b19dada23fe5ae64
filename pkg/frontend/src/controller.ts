/** Serializes judgment submissions: one in-flight mutation per session.
 *
 * A second click while a POST is outstanding joins the same request
 * instead of issuing another one, and a server-side duplicate (409)
 * resolves silently — so button mashing can never double-judge or
 * surface a spurious error.
 */

import type { ApiClient, JudgeOutcome } from './api.js';

export class JudgmentController {
  private inflight: Promise<JudgeOutcome> | null = null;

  constructor(
    private readonly client: Pick<ApiClient, 'judge'>,
    private readonly sessionId: string,
  ) {}

  get busy(): boolean {
    return this.inflight !== null;
  }

  judge(witnessId: string, appropriate: boolean, note = ''): Promise<JudgeOutcome> {
    if (this.inflight) return this.inflight;
    const request = this.client
      .judge(this.sessionId, witnessId, appropriate, note)
      .finally(() => {
        this.inflight = null;
      });
    this.inflight = request;
    return request;
  }
}
