// Client-side edit state: the baseline model plus the working coefficient
// vector. The server never holds edit state; refreshing the page reproduces
// the baseline exactly.

import type { ModelDoc, OmegaVector } from "./api";

export interface FeatureView {
  name: string;
  edges: number[];
  runLengths: number[];
  binStart: number; // offset of this feature's bins in the flat vector
  binCount: number;
}

export class EditSession {
  readonly baselineOmega0: number;
  readonly baselineOmega: number[];
  omega0: number;
  omega: number[];
  readonly features: FeatureView[];

  constructor(model: ModelDoc) {
    this.baselineOmega0 = model.omega0;
    this.baselineOmega = model.features.flatMap((f) => f.coefficients);
    this.omega0 = model.omega0;
    this.omega = [...this.baselineOmega];
    this.features = [];
    let off = 0;
    for (const f of model.features) {
      this.features.push({
        name: f.name,
        edges: f.edges,
        runLengths: f.run_lengths,
        binStart: off,
        binCount: f.coefficients.length,
      });
      off += f.coefficients.length;
    }
  }

  get dim(): number {
    return this.omega.length;
  }

  vector(): OmegaVector {
    return { omega0: this.omega0, omega: [...this.omega] };
  }

  featureCoeffs(j: number): number[] {
    const f = this.features[j];
    return this.omega.slice(f.binStart, f.binStart + f.binCount);
  }

  baselineFeatureCoeffs(j: number): number[] {
    const f = this.features[j];
    return this.baselineOmega.slice(f.binStart, f.binStart + f.binCount);
  }

  // Dragging a step moves the whole run of tied bins together, so edited
  // vectors stay consistent with the model's support set.
  dragStep(j: number, run: number, value: number): void {
    const f = this.features[j];
    let bin = f.binStart;
    for (let r = 0; r < run; r++) bin += f.runLengths[r];
    for (let k = 0; k < f.runLengths[run]; k++) {
      this.omega[bin + k] = value;
    }
  }

  setVector(v: OmegaVector): void {
    if (v.omega.length !== this.omega.length) {
      throw new Error(
        `vector has ${v.omega.length} coefficients, session needs ${this.omega.length}`,
      );
    }
    this.omega0 = v.omega0;
    this.omega = [...v.omega];
  }

  reset(): void {
    this.omega0 = this.baselineOmega0;
    this.omega = [...this.baselineOmega];
  }

  isDirty(): boolean {
    if (this.omega0 !== this.baselineOmega0) return true;
    return this.omega.some((w, i) => w !== this.baselineOmega[i]);
  }
}

// Latest-wins guard: responses arriving out of order are dropped.
export class SequenceGate {
  private issued = 0;
  private applied = 0;

  next(): number {
    return ++this.issued;
  }

  admit(token: number): boolean {
    if (token <= this.applied) return false;
    this.applied = token;
    return true;
  }
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => fn(...args), ms);
  };
}
