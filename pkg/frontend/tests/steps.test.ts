import { describe, expect, it } from "vitest";
import { featureDomain, linearScale, runHandles, stepPath } from "../src/steps";

describe("step-curve geometry", () => {
  const x = linearScale([0, 4], [10, 350]);
  const y = linearScale([-1, 1], [130, 10]);

  it("renders a staircase path (golden snapshot)", () => {
    const d = stepPath([0, 1, 2, 3, 4], [0.5, -0.25, 0.0, 1.0], x, y);
    expect(d).toMatchInlineSnapshot(
      `"M 10.00 40.00 L 95.00 40.00 L 95.00 85.00 L 180.00 85.00 L 180.00 70.00 L 265.00 70.00 L 265.00 10.00 L 350.00 10.00"`,
    );
  });

  it("renders a flat single-bin path (golden snapshot)", () => {
    const d = stepPath([0, 4], [0.0], x, y);
    expect(d).toMatchInlineSnapshot(`"M 10.00 70.00 L 350.00 70.00"`);
  });

  it("path endpoints are pixel-consistent with the scales", () => {
    const coeffs = [0.5, -0.25, 0.0, 1.0];
    const d = stepPath([0, 1, 2, 3, 4], coeffs, x, y);
    const first = d.split(" ").slice(1, 3).map(Number);
    expect(first[0]).toBeCloseTo(x(0), 2);
    expect(first[1]).toBeCloseTo(y(coeffs[0]), 2);
    const parts = d.split(" ");
    const lastX = Number(parts[parts.length - 2]);
    const lastY = Number(parts[parts.length - 1]);
    expect(lastX).toBeCloseTo(x(4), 2);
    expect(lastY).toBeCloseTo(y(coeffs[3]), 2);
  });

  it("rejects mismatched edges and coefficients", () => {
    expect(() => stepPath([0, 1], [1, 2], x, y)).toThrow();
  });

  it("builds one handle per run spanning its bins", () => {
    const handles = runHandles([0, 1, 2, 3], [0.2, 0.2, -0.1], [2, 1], x, y);
    expect(handles).toHaveLength(2);
    expect(handles[0].binStart).toBe(0);
    expect(handles[0].binStop).toBe(2);
    expect(handles[0].x0).toBeCloseTo(x(0));
    expect(handles[0].x1).toBeCloseTo(x(2));
    expect(handles[1].binStart).toBe(2);
    expect(handles[1].y).toBeCloseTo(y(-0.1));
  });

  it("feature domain pads the coefficient range", () => {
    const [lo, hi] = featureDomain([[0.0, 1.0]], 0.25);
    expect(lo).toBeCloseTo(-0.25);
    expect(hi).toBeCloseTo(1.25);
  });
});
