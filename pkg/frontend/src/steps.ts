// Pure geometry for step-function charts: scales and SVG path strings.
// Everything here is deterministic so renderings can be snapshot-tested.

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

function fmt(v: number): string {
  // fixed precision keeps path strings stable across platforms
  return (Math.round(v * 100) / 100).toFixed(2);
}

// Staircase path over half-open bins: a horizontal segment per bin,
// connected by vertical risers at the interior edges.
export function stepPath(edges: number[], coeffs: number[], x: Scale, y: Scale): string {
  if (edges.length !== coeffs.length + 1) {
    throw new Error("edges must outnumber coefficients by one");
  }
  const parts: string[] = [];
  for (let k = 0; k < coeffs.length; k++) {
    const x0 = fmt(x(edges[k]));
    const x1 = fmt(x(edges[k + 1]));
    const yk = fmt(y(coeffs[k]));
    if (k === 0) {
      parts.push(`M ${x0} ${yk}`);
    } else {
      parts.push(`L ${x0} ${yk}`);
    }
    parts.push(`L ${x1} ${yk}`);
  }
  return parts.join(" ");
}

// One drag handle per run of tied bins; the handle spans the run.
export interface Handle {
  run: number;
  binStart: number;
  binStop: number; // exclusive
  x0: number;
  x1: number;
  y: number;
}

export function runHandles(
  edges: number[],
  coeffs: number[],
  runLengths: number[],
  x: Scale,
  y: Scale,
): Handle[] {
  const out: Handle[] = [];
  let bin = 0;
  runLengths.forEach((len, run) => {
    out.push({
      run,
      binStart: bin,
      binStop: bin + len,
      x0: x(edges[bin]),
      x1: x(edges[bin + len]),
      y: y(coeffs[bin]),
    });
    bin += len;
  });
  return out;
}

export function featureDomain(coeffsSets: number[][], pad = 0.25): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const cs of coeffsSets) {
    for (const c of cs) {
      lo = Math.min(lo, c);
      hi = Math.max(hi, c);
    }
  }
  if (!isFinite(lo)) {
    lo = -1;
    hi = 1;
  }
  const span = Math.max(hi - lo, 0.5);
  return [lo - pad * span, hi + pad * span];
}
