/** Continuation form state and task-dependent defaults. */

export const MODES = ["none", "penalty", "seeding", "combined"] as const;
export type Mode = (typeof MODES)[number];

/** Penalty weights that work well per task in this domain. */
export function defaultPenaltyWeight(taskKind: string): number {
  return taskKind === "controller" ? 200 : 10;
}

export interface ContinuationForm {
  mode: Mode;
  penaltyWeight: number;
  generations: number;
}

export function defaultForm(taskKind: string): ContinuationForm {
  return {
    mode: "combined",
    penaltyWeight: defaultPenaltyWeight(taskKind),
    generations: 512,
  };
}

export function validateForm(form: ContinuationForm): string | null {
  if (!MODES.includes(form.mode)) return `unknown mode ${form.mode}`;
  if (!(form.penaltyWeight >= 0)) return "penalty weight must be non-negative";
  if (!Number.isInteger(form.generations) || form.generations < 0) {
    return "generations must be a non-negative integer";
  }
  return null;
}

let tokenCounter = 0;

/** Request tokens make retried mutations idempotent server-side. */
export function freshToken(prefix: string): string {
  tokenCounter += 1;
  return `${prefix}-${Date.now()}-${tokenCounter}`;
}
