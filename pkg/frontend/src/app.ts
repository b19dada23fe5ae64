/** Bootstraps the single-page review client.
 *
 * All session state lives on the service; the page holds nothing but
 * the selected session id (in the URL hash), so a reload reconstructs
 * the identical view from the API. One judgment may be in flight at a
 * time; every successful judgment triggers a full refresh so repair
 * steps and repaired-phase scatter markers appear immediately.
 */

import { ApiClient, ApiError, OfflineError } from './api.js';
import { JudgmentController } from './controller.js';
import { emptyQueueHtml, statusLineHtml, stepsHtml, treeHtml, witnessCardHtml } from './render.js';
import { renderScatter } from './scatter.js';
import { flattenProgram, highlightPaths } from './tree.js';

const client = new ApiClient('');
let controller: JudgmentController | null = null;
let currentSession = '';

const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
};

function setOffline(offline: boolean): void {
  el('offline-banner').hidden = !offline;
}

function showError(message: string): void {
  const line = el('status-line');
  line.textContent = message;
  line.classList.add('error');
}

async function refresh(): Promise<void> {
  if (!currentSession) return;
  try {
    const [session, witnesses, program, steps] = await Promise.all([
      client.session(currentSession),
      client.witnesses(currentSession),
      client.program(currentSession),
      client.steps(currentSession),
    ]);
    setOffline(false);
    const line = el('status-line');
    line.classList.remove('error');
    line.textContent = statusLineHtml(session);

    const thresholds = { epsilon: witnesses.epsilon, delta: witnesses.delta };
    el('witness-cards').innerHTML =
      witnesses.witnesses.length === 0
        ? emptyQueueHtml(session.status, thresholds.epsilon, thresholds.delta)
        : witnesses.witnesses
            .map((w) => witnessCardHtml(w, thresholds, controller?.busy ?? false))
            .join('');
    el('scatter').innerHTML = renderScatter(program.scatter, thresholds);
    el('tree').innerHTML = treeHtml(
      flattenProgram(program.program, highlightPaths(witnesses.witnesses)),
    );
    el('steps').innerHTML = stepsHtml(steps.steps);
  } catch (err) {
    if (err instanceof OfflineError) {
      setOffline(true); // keep the last rendered state; mutate nothing
      return;
    }
    showError(err instanceof ApiError ? `service error: ${err.message}` : String(err));
  }
}

async function loadSessionList(): Promise<void> {
  const picker = el('session-picker') as HTMLSelectElement;
  try {
    const sessions = await client.listSessions();
    setOffline(false);
    picker.innerHTML = sessions
      .map(
        (s) =>
          `<option value="${s.id}"${s.id === currentSession ? ' selected' : ''}>` +
          `${s.id} (${s.status})</option>`,
      )
      .join('');
    if (!currentSession && sessions.length > 0) {
      selectSession(sessions[0].id);
    }
  } catch (err) {
    if (err instanceof OfflineError) setOffline(true);
    else showError(String(err));
  }
}

function selectSession(id: string): void {
  currentSession = id;
  controller = new JudgmentController(client, id);
  window.location.hash = id;
  void refresh();
}

function onQueueClick(event: Event): void {
  const button = (event.target as HTMLElement).closest<HTMLButtonElement>('button[data-judge]');
  if (!button || !controller) return;
  const card = button.closest<HTMLElement>('[data-witness]');
  if (!card) return;
  const witnessId = card.dataset.witness ?? '';
  const note = card.querySelector<HTMLInputElement>('input.note')?.value ?? '';
  const appropriate = button.dataset.judge === 'appropriate';
  controller
    .judge(witnessId, appropriate, note)
    .then(() => refresh())
    .catch((err) => {
      if (err instanceof OfflineError) setOffline(true);
      else showError(String(err));
    });
}

function boot(): void {
  el('witness-cards').addEventListener('click', onQueueClick);
  el('refresh').addEventListener('click', () => void refresh());
  (el('session-picker') as HTMLSelectElement).addEventListener('change', (e) =>
    selectSession((e.target as HTMLSelectElement).value),
  );
  window.addEventListener('hashchange', () => {
    const id = window.location.hash.slice(1);
    if (id && id !== currentSession) selectSession(id);
  });

  const fromHash = window.location.hash.slice(1);
  if (fromHash) {
    currentSession = fromHash;
    controller = new JudgmentController(client, fromHash);
  }
  void loadSessionList();
  void refresh();
}

boot();
