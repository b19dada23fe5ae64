/** Drives the real audit service end to end, exactly as the browser
 * client would: create a session on the bundled output-masked redlining
 * fixture, reject the zip-guard witness through the judgment
 * controller, watch one repair step land, and check the repaired-phase
 * scatter sits outside the shaded region. Finally, replays the recorded
 * judgments headlessly into a fresh session and verifies the final
 * program digest is identical.
 */

import { type ChildProcess, execFileSync, spawn } from 'node:child_process';
import { existsSync, mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { JudgmentController } from '../src/controller.js';
import { witnessCardHtml } from '../src/render.js';
import { inRegion, renderScatter } from '../src/scatter.js';
import type { ProgramNode, SessionDoc } from '../src/types.js';

const FRONTEND_ROOT = dirname(dirname(fileURLToPath(import.meta.url)));
const DIST = join(FRONTEND_ROOT, 'dist');

const FIXTURE_SCRIPT = `
import json, sys
from proxyaudit.fixtures import write_fixtures
paths = write_fixtures(sys.argv[1])
print(json.dumps({k: str(v) for k, v in paths.items()}))
`;

const SERVE_SCRIPT = `
import sys
from proxyaudit.service import serve_forever
serve_forever(host="127.0.0.1", port=0, state_dir=sys.argv[1], ui_dir=sys.argv[2])
`;

let tmp = '';
let service: ChildProcess | null = null;
let baseUrl = '';
let model: ProgramNode;
let dataCsv = '';

function startService(stateDir: string): Promise<string> {
  return new Promise((resolve, reject) => {
    const child = spawn('python3', ['-u', '-c', SERVE_SCRIPT, stateDir, DIST], {
      stdio: ['ignore', 'pipe', 'pipe'],
    });
    service = child;
    let out = '';
    let err = '';
    const timer = setTimeout(
      () => reject(new Error(`service did not come up; stdout=${out} stderr=${err}`)),
      60_000,
    );
    child.stdout!.on('data', (chunk: Buffer) => {
      out += chunk.toString();
      const m = out.match(/listening on (http:\/\/127\.0\.0\.1:\d+)\//);
      if (m) {
        clearTimeout(timer);
        resolve(m[1]);
      }
    });
    child.stderr!.on('data', (chunk: Buffer) => {
      err += chunk.toString();
    });
    child.on('exit', (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early (${code}); stderr=${err}`));
    });
  });
}

beforeAll(async () => {
  if (!existsSync(join(DIST, 'app.js'))) {
    execFileSync('npm', ['run', 'build'], { cwd: FRONTEND_ROOT });
  }
  tmp = mkdtempSync(join(tmpdir(), 'proxyaudit-ui-'));
  const paths = JSON.parse(
    execFileSync('python3', ['-c', FIXTURE_SCRIPT, tmp], { encoding: 'utf8' }),
  ) as Record<string, string>;
  model = JSON.parse(readFileSync(paths.masked_model, 'utf8')) as ProgramNode;
  dataCsv = readFileSync(paths.masked_data, 'utf8');
  baseUrl = await startService(join(tmp, 'state'));
});

afterAll(() => {
  service?.kill('SIGINT');
  service = null;
  if (tmp) rmSync(tmp, { recursive: true, force: true });
});

const CONFIG = {
  protected: 'race',
  epsilon: 0.9,
  delta: 0.2,
  influence: 'exact',
  seed: 0,
};

async function createMaskedSession(client: ApiClient): Promise<SessionDoc> {
  return client.createSession({
    model,
    config: CONFIG,
    data_csv: dataCsv,
    label: 'decision',
  });
}

describe('review round trip against the live service', () => {
  let posts = 0;
  const client = new ApiClient('', (url, init) => {
    if (init?.method === 'POST') posts += 1;
    return fetch(baseUrl + url, init);
  });
  let sessionId = '';
  let finalDigest = '';

  it('serves the built client shell', async () => {
    const page = await fetch(`${baseUrl}/`);
    expect(page.status).toBe(200);
    expect(await page.text()).toContain('proxyaudit review');
    expect((await fetch(`${baseUrl}/app.js`)).status).toBe(200);
    expect((await fetch(`${baseUrl}/style.css`)).status).toBe(200);
  });

  it('creates a session on the masked fixture with one pending witness', async () => {
    const session = await createMaskedSession(client);
    sessionId = session.id;
    expect(session.status).toBe('awaiting-judgment');
    expect(session.pending).toBe(1);
    expect(session.steps).toBe(0);
    const listed = await client.listSessions();
    expect(listed.map((s) => s.id)).toContain(sessionId);
  });

  it('shows the zip guard as a judgeable card inside the shaded region', async () => {
    const doc = await client.witnesses(sessionId);
    expect(doc.witnesses).toHaveLength(1);
    const witness = doc.witnesses[0];
    expect(witness.subprogram).toContain('zip');
    expect(witness.holes).toEqual(['0']);
    expect(witness.epsilon_hat).toBe(1.0);
    expect(witness.delta_hat).toBeGreaterThanOrEqual(0.4);

    const card = witnessCardHtml(witness, { epsilon: doc.epsilon, delta: doc.delta }, false);
    expect(card).toContain(`data-witness="${witness.id}"`);
    expect(card).toContain('data-judge="inappropriate"');

    const program = await client.program(sessionId);
    const guardRow = program.scatter.find(
      (r) => r.node_path === '0' && r.phase === 'initial',
    );
    expect(guardRow).toBeDefined();
    expect(inRegion(guardRow!, { epsilon: 0.9, delta: 0.2 })).toBe(true);
    expect(program.scatter.every((r) => r.phase === 'initial')).toBe(true);
  });

  it('rejects the witness once despite a double click and records one repair step', async () => {
    const doc = await client.witnesses(sessionId);
    const witnessId = doc.witnesses[0].id;
    const controller = new JudgmentController(client, sessionId);

    posts = 0;
    const first = controller.judge(witnessId, false, 'zip gates race-correlated branches');
    const second = controller.judge(witnessId, false, 'double click');
    expect(second).toBe(first);
    const outcome = await first;
    expect(posts).toBe(1);
    expect(outcome.duplicate).toBe(false);
    expect(outcome.recorded?.source).toBe('remote');

    // a stale retry after settling is absorbed as a silent duplicate
    const again = await controller.judge(witnessId, false);
    expect(again.duplicate).toBe(true);

    const steps = await client.steps(sessionId);
    expect(steps.status).toBe('done');
    expect(steps.steps).toHaveLength(1);
    expect(steps.steps[0].witness_id).toBe(witnessId);
    expect(steps.judgments).toHaveLength(1);
    expect(steps.judgments[0].appropriate).toBe(false);
  });

  it('renders the repaired phase entirely outside the shaded region', async () => {
    const program = await client.program(sessionId);
    const phases = new Set(program.scatter.map((r) => r.phase));
    expect(phases).toEqual(new Set(['initial', 'repaired']));

    const thresholds = { epsilon: program.epsilon, delta: program.delta };
    const repaired = program.scatter.filter((r) => r.phase === 'repaired');
    expect(repaired.length).toBeGreaterThan(0);
    expect(repaired.every((r) => !inRegion(r, thresholds))).toBe(true);
    expect(program.scatter.some((r) => r.phase === 'initial' && inRegion(r, thresholds))).toBe(
      true,
    );

    const svg = renderScatter(program.scatter, thresholds);
    expect(svg).toContain('class="region"');
    expect(svg).not.toMatch(/marker repaired in-region/);

    const session = await client.session(sessionId);
    expect(session.status).toBe('done');
    expect(program.program_digest).toBe(session.program_digest);
    finalDigest = program.program_digest;
  });

  it('replaying the recorded judgments headlessly reproduces the digest', async () => {
    const transcript = await client.steps(sessionId);
    const byWitness = new Map(transcript.judgments.map((j) => [j.witness_id, j]));

    const replayClient = new ApiClient('', (url, init) => fetch(baseUrl + url, init));
    let session = await createMaskedSession(replayClient);
    expect(session.id).not.toBe(sessionId);

    for (let round = 0; session.status === 'awaiting-judgment'; round += 1) {
      expect(round).toBeLessThan(16); // the fixture needs exactly one round
      const pending = await replayClient.witnesses(session.id);
      for (const w of pending.witnesses) {
        const recorded = byWitness.get(w.id);
        expect(recorded).toBeDefined(); // same model+data ⇒ same witness ids
        await replayClient.judge(session.id, w.id, recorded!.appropriate, recorded!.note);
      }
      session = await replayClient.session(session.id);
    }

    expect(session.status).toBe('done');
    expect(session.program_digest).toBe(finalDigest);
    const replayedSteps = await replayClient.steps(session.id);
    expect(replayedSteps.steps).toEqual((await client.steps(sessionId)).steps);
  });
});
