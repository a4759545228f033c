// Typed client for the model-editor service. All edits travel as full
// coefficient vectors; the server owns every Rashomon-set computation.

export interface FeatureShape {
  name: string;
  edges: number[];
  coefficients: number[];
  run_lengths: number[];
  pi: number[];
}

export interface ModelDoc {
  feature_names: string[];
  omega0: number;
  lambda2: number;
  lambda_s: number;
  features: FeatureShape[];
}

export interface EllipsoidMeta {
  dim: number;
  theta: number | null;
  lambda2: number | null;
  lambda_s: number | null;
  log_volume: number;
  loss_at_center: number | null;
}

export interface OmegaVector {
  omega0: number;
  omega: number[];
}

export interface ContainsResponse {
  q: number;
  inside: boolean;
}

export interface ProjectResponse extends OmegaVector {
  distance: number;
  inside_already: boolean;
}

export interface MonotoneResponse extends OmegaVector {
  q: number;
  feasible: boolean;
}

export interface ViRow {
  feature: string;
  vi_minus: number;
  vi_plus: number;
  vi_center: number;
  mode: string;
}

export interface JumpsResponse {
  feature: string;
  boundary: number;
  n_samples: number;
  fraction_down: number;
  fraction_up: number;
  fraction_flat: number;
  tau: number;
}

export class ApiError extends Error {
  constructor(public code: string, public detail: string, public status: number) {
    super(`${code}: ${detail}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!res.ok) {
    let code = `http_${res.status}`;
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { code?: string; detail?: string };
      code = body.code ?? code;
      detail = body.detail ?? detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(code, detail, res.status);
  }
  return (await res.json()) as T;
}

export class Client {
  constructor(public base: string) {}

  getModel(): Promise<ModelDoc> {
    return request(this.base, "/api/model");
  }

  getMeta(): Promise<EllipsoidMeta> {
    return request(this.base, "/api/ellipsoid/meta");
  }

  contains(v: OmegaVector): Promise<ContainsResponse> {
    return request(this.base, "/api/contains", { method: "POST", body: JSON.stringify(v) });
  }

  project(v: OmegaVector): Promise<ProjectResponse> {
    return request(this.base, "/api/project", { method: "POST", body: JSON.stringify(v) });
  }

  monotone(feature: string, direction: "increasing" | "decreasing"): Promise<MonotoneResponse> {
    return request(this.base, "/api/monotone", {
      method: "POST",
      body: JSON.stringify({ constraints: [{ feature, direction }] }),
    });
  }

  vi(fixOthers: boolean): Promise<{ rows: ViRow[] }> {
    return request(this.base, `/api/vi?fix_others=${fixOthers}`);
  }

  sample(n: number, seed: number): Promise<{ omega0s: number[]; omegas: number[][] }> {
    return request(this.base, "/api/sample", {
      method: "POST",
      body: JSON.stringify({ n, seed }),
    });
  }

  jumps(feature: string, k: number, n: number, tau: number, seed: number): Promise<JumpsResponse> {
    return request(this.base, "/api/jumps", {
      method: "POST",
      body: JSON.stringify({ feature, k, n, tau, seed }),
    });
  }
}
