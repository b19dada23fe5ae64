/** Flatten a served program into indented rows for the tree view.
 *
 * Row paths use the same slash-joined child indices as witness hole
 * paths and scatter node paths (root = ''), so highlighting a witness
 * is a set lookup, never a re-derivation.
 */

import type { ProgramNode, WitnessDoc } from './types.js';

export interface TreeRow {
  path: string;
  depth: number;
  label: string;
  /** this exact node is a hole of some pending witness */
  highlighted: boolean;
  /** this node sits inside a highlighted sub-expression */
  covered: boolean;
}

function children(node: ProgramNode): ProgramNode[] {
  switch (node.kind) {
    case 'var':
    case 'const':
      return [];
    case 'rel':
      return [node.left, node.right];
    case 'bool':
    case 'arith':
      return node.operands;
    case 'ite':
      return [node.guard, node.then, node.else];
  }
}

export function nodeLabel(node: ProgramNode): string {
  switch (node.kind) {
    case 'var':
      return node.name;
    case 'const':
      return String(node.value);
    case 'rel':
    case 'bool':
    case 'arith':
      return node.op;
    case 'ite':
      return 'if-then-else';
  }
}

/** Union of hole paths across the given witnesses. */
export function highlightPaths(witnesses: Pick<WitnessDoc, 'holes'>[]): Set<string> {
  const paths = new Set<string>();
  for (const w of witnesses) for (const h of w.holes) paths.add(h);
  return paths;
}

export function flattenProgram(
  program: ProgramNode,
  highlights: Set<string> = new Set(),
): TreeRow[] {
  const rows: TreeRow[] = [];
  const walk = (node: ProgramNode, path: number[], inside: boolean): void => {
    const key = path.join('/');
    const hit = highlights.has(key);
    rows.push({
      path: key,
      depth: path.length,
      label: nodeLabel(node),
      highlighted: hit,
      covered: inside && !hit,
    });
    children(node).forEach((child, i) => walk(child, [...path, i], inside || hit));
  };
  walk(program, [], false);
  return rows;
}
