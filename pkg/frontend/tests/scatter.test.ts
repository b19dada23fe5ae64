import { describe, expect, it } from 'vitest';

import {
  PLOT,
  assocToX,
  inRegion,
  inflToY,
  markerRadius,
  regionRect,
  renderScatter,
} from '../src/scatter.js';
import type { ScatterRowDoc } from '../src/types.js';

const T = { epsilon: 0.9, delta: 0.2 };

const row = (over: Partial<ScatterRowDoc>): ScatterRowDoc => ({
  node_path: '0',
  size: 3,
  epsilon: 0.5,
  delta: 0.5,
  parent_path: '',
  phase: 'initial',
  ...over,
});

describe('axes', () => {
  it('puts the strongest association at the left edge', () => {
    expect(assocToX(1)).toBe(PLOT.margin.left);
    expect(assocToX(0)).toBe(PLOT.width - PLOT.margin.right);
    expect(assocToX(0.75)).toBeLessThan(assocToX(0.25));
  });

  it('puts the strongest influence at the top edge', () => {
    expect(inflToY(1)).toBe(PLOT.margin.top);
    expect(inflToY(0)).toBe(PLOT.height - PLOT.margin.bottom);
    expect(inflToY(0.75)).toBeLessThan(inflToY(0.25));
  });
});

describe('prohibited region', () => {
  it('uses inclusive thresholds on both measures', () => {
    expect(inRegion(row({ epsilon: 0.9, delta: 0.2 }), T)).toBe(true);
    expect(inRegion(row({ epsilon: 0.89999, delta: 0.9 }), T)).toBe(false);
    expect(inRegion(row({ epsilon: 1.0, delta: 0.19999 }), T)).toBe(false);
    expect(inRegion(row({ epsilon: 1.0, delta: 1.0 }), T)).toBe(true);
  });

  it('is the upper-left block of the plot', () => {
    const r = regionRect(T);
    expect(r.x).toBe(assocToX(1)); // flush with the left edge
    expect(r.y).toBe(inflToY(1)); // flush with the top edge
    expect(r.width).toBeCloseTo(assocToX(T.epsilon) - assocToX(1), 10);
    expect(r.height).toBeCloseTo(inflToY(T.delta) - inflToY(1), 10);
    expect(r.width).toBeGreaterThan(0);
    expect(r.height).toBeGreaterThan(0);
  });

  it('contains exactly the pixels of in-region rows', () => {
    const r = regionRect(T);
    const inside = row({ epsilon: 0.95, delta: 0.4 });
    const outside = row({ epsilon: 0.5, delta: 0.4 });
    expect(assocToX(inside.epsilon)).toBeGreaterThanOrEqual(r.x);
    expect(assocToX(inside.epsilon)).toBeLessThanOrEqual(r.x + r.width);
    expect(inflToY(inside.delta)).toBeGreaterThanOrEqual(r.y);
    expect(inflToY(inside.delta)).toBeLessThanOrEqual(r.y + r.height);
    expect(assocToX(outside.epsilon)).toBeGreaterThan(r.x + r.width);
  });
});

describe('markers', () => {
  it('scales marker area with sub-expression size', () => {
    expect(markerRadius(20, 20)).toBeGreaterThan(markerRadius(5, 20));
    expect(markerRadius(5, 20)).toBeGreaterThan(markerRadius(1, 20));
    expect(markerRadius(20, 20)).toBe(12);
    expect(markerRadius(1, 1)).toBe(12);
  });

  it('renders dots for the initial phase and crosses for the repaired phase', () => {
    const svg = renderScatter(
      [row({ phase: 'initial' }), row({ phase: 'repaired', node_path: '1' })],
      T,
    );
    expect(svg).toContain('data-phase="initial"');
    expect(svg).toContain('<circle');
    expect(svg).toContain('data-phase="repaired"');
    expect(svg).toMatch(/<g class="marker repaired[^>]*><path /);
  });

  it('tags only rows inside the shaded block with in-region', () => {
    const svg = renderScatter(
      [
        row({ node_path: 'hot', epsilon: 0.95, delta: 0.5 }),
        row({ node_path: 'cold', epsilon: 0.3, delta: 0.5 }),
      ],
      T,
    );
    expect(svg).toMatch(/in-region[^>]*data-path="hot"/);
    expect(svg).not.toMatch(/in-region[^>]*data-path="cold"/);
  });

  it('escapes markup smuggled into node paths', () => {
    const svg = renderScatter([row({ node_path: '<img>' })], T);
    expect(svg).not.toContain('<img>');
    expect(svg).toContain('&lt;img&gt;');
  });
});

describe('sub-expression lines', () => {
  it('joins each row to its same-phase parent and skips the root', () => {
    const rows: ScatterRowDoc[] = [
      row({ node_path: '', parent_path: '-' }),
      row({ node_path: '0', parent_path: '', epsilon: 0.8 }),
      row({ node_path: '0/1', parent_path: '0', epsilon: 0.6 }),
      // repaired rows link among themselves, never across phases
      row({ node_path: '', parent_path: '-', phase: 'repaired' }),
      row({ node_path: '0', parent_path: '', phase: 'repaired', epsilon: 0.1 }),
    ];
    const svg = renderScatter(rows, T);
    const links = svg.match(/<line class="link/g) ?? [];
    expect(links).toHaveLength(3);
    expect(svg).toContain('class="link repaired"');
  });

  it('draws the shaded region beneath every marker', () => {
    const svg = renderScatter([row({})], T);
    expect(svg.indexOf('class="region"')).toBeGreaterThan(-1);
    expect(svg.indexOf('class="region"')).toBeLessThan(svg.indexOf('class="marker'));
  });
});
