/** Document shapes served by the audit service. The UI renders these
 * verbatim and never computes association or influence locally. */

/** Expression program node, as serialized by the service. */
export type ProgramNode =
  | { kind: 'var'; name: string }
  | { kind: 'const'; value: number | boolean }
  | { kind: 'rel'; op: string; left: ProgramNode; right: ProgramNode }
  | { kind: 'bool'; op: string; operands: ProgramNode[] }
  | { kind: 'arith'; op: string; operands: ProgramNode[] }
  | { kind: 'ite'; guard: ProgramNode; then: ProgramNode; else: ProgramNode };

export interface AuditConfigDoc {
  protected: string;
  epsilon: number;
  delta: number;
  seed: number;
  influence: string;
  alpha: number;
  beta: number;
  max_bins: number;
  workers: number;
  allow_explicit_use: boolean;
  permutations: number;
  caps: { max_occurrences: number; max_chain: number };
}

export interface SessionDoc {
  id: string;
  status: 'awaiting-judgment' | 'repairing' | 'done';
  config: AuditConfigDoc;
  label: string;
  pending: number;
  judged: number;
  steps: number;
  program_digest: string;
}

export interface AssociationDoc {
  d: number;
  h_x_given_z: number;
  h_z_given_x: number;
  h_joint: number;
  x_levels: number;
  z_levels: number;
  p_value: number | null;
}

export interface InfluenceDoc {
  iota: number;
  mode: 'exact' | 'sampled';
  n_pairs: number;
  reach_rate: number;
  alpha: number | null;
  beta: number | null;
  seed: number | null;
}

export interface WitnessDoc {
  id: string;
  subprogram: string;
  size: number;
  holes: string[];
  kind: string;
  epsilon_hat: number;
  delta_hat: number;
  association: AssociationDoc;
  influence: InfluenceDoc;
}

export interface WitnessesDoc {
  id: string;
  status: SessionDoc['status'];
  epsilon: number;
  delta: number;
  witnesses: WitnessDoc[];
}

export interface ScatterRowDoc {
  node_path: string;
  size: number;
  /** measured association of this decomposition (plotted against the ε threshold) */
  epsilon: number;
  /** measured influence of this decomposition (plotted against the δ threshold) */
  delta: number;
  parent_path: string;
  phase: 'initial' | 'repaired';
}

export interface ProgramDoc {
  id: string;
  status: SessionDoc['status'];
  program: ProgramNode;
  program_text: string;
  program_digest: string;
  epsilon: number;
  delta: number;
  scatter: ScatterRowDoc[];
}

export interface StepDoc {
  witness_id: string;
  local_holes: string[];
  constant: number | boolean;
  pre_utility: number;
  post_utility: number;
  post_epsilon: number;
  post_delta: number;
  program_digest: string;
}

export interface JudgmentDoc {
  witness_id: string;
  appropriate: boolean;
  source: string;
  note: string;
  timestamp: string;
}

export interface StepsDoc {
  id: string;
  status: SessionDoc['status'];
  steps: StepDoc[];
  judgments: JudgmentDoc[];
}

export interface CreateSessionRequest {
  model: ProgramNode;
  config: {
    protected: string;
    epsilon: number;
    delta: number;
    [key: string]: unknown;
  };
  data_csv?: string;
  data_path?: string;
  label?: string;
}
