/** Pure HTML builders for the session view. Everything here turns
 * served documents into markup strings; DOM wiring lives in app.ts. */

import type { StepDoc, SessionDoc, WitnessDoc } from './types.js';
import type { TreeRow } from './tree.js';

export const escapeHtml = (s: string): string =>
  s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');

const num = (v: number): string => v.toFixed(3);

/** One pending witness: measures, threshold comparison, judge buttons. */
export function witnessCardHtml(
  w: WitnessDoc,
  thresholds: { epsilon: number; delta: number },
  busy: boolean,
): string {
  const disabled = busy ? ' disabled' : '';
  const influenceDetail =
    w.influence.mode === 'sampled'
      ? `sampled, n=${w.influence.n_pairs}, β=${w.influence.beta}`
      : `exact over ${w.influence.n_pairs} pairs`;
  return `
<article class="card" data-witness="${escapeHtml(w.id)}">
  <code class="subprogram">${escapeHtml(w.subprogram)}</code>
  <dl>
    <dt>association ε̂</dt><dd>${num(w.epsilon_hat)} ≥ ε ${thresholds.epsilon}</dd>
    <dt>influence δ̂</dt><dd>${num(w.delta_hat)} ≥ δ ${thresholds.delta} <small>(${influenceDetail})</small></dd>
    <dt>cut</dt><dd>${w.kind} at ${w.holes.map((h) => `<code>${escapeHtml(h === '' ? '(root)' : h)}</code>`).join(', ')} · ${w.size} node(s)</dd>
  </dl>
  <label>note <input type="text" class="note" placeholder="why?"></label>
  <div class="verdict">
    <button data-judge="appropriate"${disabled}>appropriate</button>
    <button data-judge="inappropriate"${disabled}>inappropriate</button>
  </div>
</article>`;
}

/** Empty-queue state: explicitly says no violations at these thresholds. */
export function emptyQueueHtml(
  status: SessionDoc['status'],
  epsilon: number,
  delta: number,
): string {
  const tail = status === 'done' ? 'session complete.' : `status: ${status}.`;
  return `<p class="empty">no violations at (ε, δ) = (${epsilon}, ${delta}) — ${tail}</p>`;
}

export function statusLineHtml(doc: SessionDoc): string {
  return (
    `${doc.id} · ${doc.status} · ${doc.pending} pending / ${doc.judged} judged / ` +
    `${doc.steps} step(s) · program ${doc.program_digest.slice(0, 12)}…`
  );
}

export function stepsHtml(steps: StepDoc[]): string {
  if (steps.length === 0) return '<li class="empty">no repair steps yet</li>';
  return steps
    .map(
      (s) => `
<li>
  replaced <code>${s.local_holes.map(escapeHtml).join(', ')}</code> with <code>${escapeHtml(String(s.constant))}</code>
  for witness <code>${escapeHtml(s.witness_id)}</code> —
  utility ${num(s.pre_utility)} → ${num(s.post_utility)},
  re-measured (ε̂ ${num(s.post_epsilon)}, δ̂ ${num(s.post_delta)})
</li>`,
    )
    .join('');
}

/** Indented tree rows; witness holes get .hit, their insides .covered. */
export function treeHtml(rows: TreeRow[]): string {
  return rows
    .map((r) => {
      const cls = r.highlighted ? ' class="hit"' : r.covered ? ' class="covered"' : '';
      return `<div${cls} data-path="${escapeHtml(r.path)}">${'  '.repeat(r.depth)}${escapeHtml(r.label)}</div>`;
    })
    .join('');
}
