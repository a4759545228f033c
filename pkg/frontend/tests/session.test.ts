import { describe, expect, it } from "vitest";
import type { ModelDoc } from "../src/api";
import { EditSession, SequenceGate } from "../src/session";

const model: ModelDoc = {
  feature_names: ["f", "g"],
  omega0: 0.1,
  lambda2: 0.001,
  lambda_s: 0.001,
  features: [
    {
      name: "f",
      edges: [0, 1, 2, 3],
      coefficients: [0.4, 0.4, -0.2],
      run_lengths: [2, 1],
      pi: [0.3, 0.3, 0.4],
    },
    {
      name: "g",
      edges: [0, 1, 2],
      coefficients: [0.0, 0.5],
      run_lengths: [1, 1],
      pi: [0.5, 0.5],
    },
  ],
};

describe("EditSession", () => {
  it("starts at the baseline and is not dirty", () => {
    const s = new EditSession(model);
    expect(s.vector()).toEqual({ omega0: 0.1, omega: [0.4, 0.4, -0.2, 0.0, 0.5] });
    expect(s.isDirty()).toBe(false);
  });

  it("dragging a step moves the whole run of tied bins", () => {
    const s = new EditSession(model);
    s.dragStep(0, 0, 0.9);
    expect(s.featureCoeffs(0)).toEqual([0.9, 0.9, -0.2]);
    expect(s.featureCoeffs(1)).toEqual([0.0, 0.5]);
    expect(s.isDirty()).toBe(true);
  });

  it("reset reproduces the baseline exactly", () => {
    const s = new EditSession(model);
    s.dragStep(1, 1, -3.0);
    s.omega0 = 9.9;
    s.reset();
    expect(s.vector()).toEqual({ omega0: 0.1, omega: [0.4, 0.4, -0.2, 0.0, 0.5] });
    expect(s.isDirty()).toBe(false);
  });

  it("setVector validates the dimension", () => {
    const s = new EditSession(model);
    expect(() => s.setVector({ omega0: 0, omega: [1, 2] })).toThrow();
    s.setVector({ omega0: 0.2, omega: [1, 1, 1, 1, 1] });
    expect(s.omega0).toBe(0.2);
  });

  it("baseline is immune to working-vector mutation", () => {
    const s = new EditSession(model);
    s.dragStep(0, 1, 5.0);
    expect(s.baselineFeatureCoeffs(0)).toEqual([0.4, 0.4, -0.2]);
  });
});

describe("SequenceGate", () => {
  it("drops responses that arrive out of order", () => {
    const gate = new SequenceGate();
    const t1 = gate.next();
    const t2 = gate.next();
    expect(gate.admit(t2)).toBe(true); // newest lands first
    expect(gate.admit(t1)).toBe(false); // stale response discarded
    const t3 = gate.next();
    expect(gate.admit(t3)).toBe(true);
  });
});
