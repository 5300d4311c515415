// Client-side mirrors of the service's 422 rules, so bad submissions are
// blocked before they hit the network with the same messages the API returns.

export const N_MIN = 5;
export const MAX_NODES = 5;

export interface InterventionDraft {
  target: number;
  value: number;
}

/** Mirrors the observe() validation; returns null when the outcome is valid. */
export function validateOutcome(
  values: Array<number | null>,
  intervention: InterventionDraft | null,
  d: number,
): string | null {
  if (values.length !== d) return `values must be a list of ${d} numbers`;
  if (values.some((v) => v === null || v === undefined || Number.isNaN(v)))
    return "every variable needs a numeric measurement";
  const nums = values as number[];
  if (nums.some((v) => !Number.isFinite(v))) return "values must be finite";
  if (intervention !== null) {
    const { target, value } = intervention;
    if (!(Number.isInteger(target) && target >= 0 && target < d))
      return `intervention target ${target} out of range for d=${d}`;
    if (nums[target] !== value)
      return `values[${target}] = ${nums[target]} does not equal the intervention value ${value}`;
  }
  return null;
}

export interface CsvParse {
  rows: number[][];
  errors: Array<{ line: number; message: string }>;
}

/** Parse pasted CSV (or whitespace-separated) observation rows. */
export function parseObservations(text: string, d: number): CsvParse {
  const rows: number[][] = [];
  const errors: Array<{ line: number; message: string }> = [];
  const lines = text.split(/\r?\n/);
  lines.forEach((raw, idx) => {
    const line = raw.trim();
    if (!line) return;
    const parts = line.split(/[,;\s]+/).filter((p) => p.length > 0);
    const nums = parts.map(Number);
    if (nums.some((v) => Number.isNaN(v) || !Number.isFinite(v))) {
      errors.push({ line: idx + 1, message: `row ${idx + 1}: not numeric` });
      return;
    }
    if (nums.length !== d) {
      errors.push({
        line: idx + 1,
        message: `row ${idx + 1}: expected ${d} columns, got ${nums.length}`,
      });
      return;
    }
    rows.push(nums);
  });
  return { rows, errors };
}

export interface WizardDraft {
  d: number;
  names: string[];
  priorKind: "uniform" | "sparsity" | "reference";
  referenceEdges: Array<[number, number]>;
  observationsText: string;
  mcSamples: number;
  beta: number;
  boBudget: number;
}

export interface WizardValidation {
  errors: Record<string, string>;
  rows: number[][];
  rowErrors: Array<{ line: number; message: string }>;
}

export function validateWizard(draft: WizardDraft): WizardValidation {
  const errors: Record<string, string> = {};
  if (!(Number.isInteger(draft.d) && draft.d >= 1 && draft.d <= MAX_NODES))
    errors.d = `variable count must be an integer in [1, ${MAX_NODES}]`;
  const { rows, errors: rowErrors } = parseObservations(draft.observationsText, draft.d);
  if (rowErrors.length === 0 && rows.length < N_MIN)
    errors.observations = `need at least n_min=${N_MIN} observational samples, got ${rows.length}`;
  if (rowErrors.length > 0) errors.observations = "fix the highlighted rows first";
  if (draft.priorKind === "reference" && draft.referenceEdges.length === 0)
    errors.prior = "reference prior needs a reference graph: pick at least one edge";
  if (draft.priorKind === "reference" && hasCycle(draft.d, draft.referenceEdges))
    errors.prior = "reference graph must be acyclic";
  if (!(draft.mcSamples >= 1)) errors.mcSamples = "MC samples must be >= 1";
  if (!(draft.beta >= 0)) errors.beta = "beta must be >= 0";
  if (!(draft.boBudget >= 2)) errors.boBudget = "BO budget must be >= 2";
  return { errors, rows, rowErrors };
}

export function hasCycle(d: number, edges: Array<[number, number]>): boolean {
  const children: number[][] = Array.from({ length: d }, () => []);
  for (const [p, i] of edges) children[p].push(i);
  const state = new Array<number>(d).fill(0);
  const visit = (node: number): boolean => {
    state[node] = 1;
    for (const c of children[node]) {
      if (state[c] === 1) return true;
      if (state[c] === 0 && visit(c)) return true;
    }
    state[node] = 2;
    return false;
  };
  for (let n = 0; n < d; n += 1) if (state[n] === 0 && visit(n)) return true;
  return false;
}

/** Default variable names X0..X{d-1} when the user leaves them blank. */
export function defaultNames(d: number): string[] {
  return Array.from({ length: d }, (_, i) => `X${i}`);
}
