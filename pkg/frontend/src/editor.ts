// DOM wiring for the shape-function editor: draggable step charts, the
// in-set badge, projection and monotone repair, VI ranges, sample bands.

import { ApiError, Client, ModelDoc } from "./api";
import { EditSession, SequenceGate, debounce } from "./session";
import { featureDomain, linearScale, runHandles, stepPath, Scale } from "./steps";

const SVG_NS = "http://www.w3.org/2000/svg";
export const CHART_W = 360;
export const CHART_H = 140;
export const MARGIN = 12;
export const CONTAINS_DEBOUNCE_MS = 150;

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

export class Editor {
  session: EditSession;
  private containsGate = new SequenceGate();
  private requestOverlay: (number[] | null)[] = [];
  private bands: number[][][] = [];
  private badge: HTMLElement;
  private banners: HTMLElement;
  private charts: SVGSVGElement[] = [];
  private scales: { x: Scale; y: Scale }[] = [];
  private checkSoon: () => void;

  constructor(
    private root: HTMLElement,
    private client: Client,
    private model: ModelDoc,
  ) {
    this.session = new EditSession(model);
    this.requestOverlay = model.features.map(() => null);
    this.bands = model.features.map(() => []);
    this.root.innerHTML = "";

    const header = document.createElement("div");
    header.className = "editor-header";
    const title = document.createElement("h1");
    title.textContent = "Shape-function editor";
    this.badge = document.createElement("span");
    this.badge.id = "badge";
    this.badge.dataset.state = "in";
    this.badge.textContent = "in set";
    const projectBtn = document.createElement("button");
    projectBtn.id = "project-btn";
    projectBtn.textContent = "Project into set";
    projectBtn.addEventListener("click", () => void this.projectIntoSet());
    const resetBtn = document.createElement("button");
    resetBtn.id = "reset-btn";
    resetBtn.textContent = "Reset";
    resetBtn.addEventListener("click", () => {
      this.session.reset();
      this.requestOverlay = this.model.features.map(() => null);
      this.renderAll();
      this.scheduleContains();
    });
    const bandBtn = document.createElement("button");
    bandBtn.id = "band-btn";
    bandBtn.textContent = "Sample band";
    bandBtn.addEventListener("click", () => void this.loadBand());
    header.append(title, this.badge, projectBtn, resetBtn, bandBtn);
    this.root.append(header);

    this.banners = document.createElement("div");
    this.banners.id = "banners";
    this.root.append(this.banners);

    const viPanel = document.createElement("div");
    viPanel.id = "vi-panel";
    const viBtn = document.createElement("button");
    viBtn.id = "vi-btn";
    viBtn.textContent = "Load VI ranges";
    const viFix = document.createElement("input");
    viFix.type = "checkbox";
    viFix.id = "vi-fix-others";
    const viRows = document.createElement("div");
    viRows.id = "vi-rows";
    viBtn.addEventListener("click", () => void this.loadVi(viFix.checked, viRows));
    const viLabel = document.createElement("label");
    viLabel.append(viFix, document.createTextNode(" fix other features"));
    viPanel.append(viBtn, viLabel, viRows);
    this.root.append(viPanel);

    model.features.forEach((_, j) => this.buildFeaturePanel(j));
    this.renderAll();
    this.checkSoon = debounce(() => void this.checkContains(), CONTAINS_DEBOUNCE_MS);
  }

  private buildFeaturePanel(j: number): void {
    const f = this.model.features[j];
    const panel = document.createElement("div");
    panel.className = "feature-panel";
    panel.dataset.feature = f.name;
    const head = document.createElement("div");
    const name = document.createElement("strong");
    name.textContent = f.name;
    const up = document.createElement("button");
    up.className = "monotone-up";
    up.textContent = "Make monotone ↑";
    up.addEventListener("click", () => void this.makeMonotone(f.name, "increasing"));
    const down = document.createElement("button");
    down.className = "monotone-down";
    down.textContent = "Make monotone ↓";
    down.addEventListener("click", () => void this.makeMonotone(f.name, "decreasing"));
    head.append(name, up, down);

    const svg = svgEl("svg");
    svg.setAttribute("width", String(CHART_W));
    svg.setAttribute("height", String(CHART_H));
    svg.setAttribute("data-chart", f.name);
    panel.append(head, svg);
    this.root.append(panel);
    this.charts[j] = svg;

    const x = linearScale([f.edges[0], f.edges[f.edges.length - 1]], [MARGIN, CHART_W - MARGIN]);
    const dom = featureDomain([f.coefficients]);
    const y = linearScale(dom, [CHART_H - MARGIN, MARGIN]);
    this.scales[j] = { x, y };
  }

  renderAll(): void {
    this.model.features.forEach((_, j) => this.renderFeature(j));
  }

  renderFeature(j: number): void {
    const f = this.model.features[j];
    const svg = this.charts[j];
    const { x, y } = this.scales[j];
    svg.innerHTML = "";

    for (const band of this.bands[j]) {
      const p = svgEl("path");
      p.setAttribute("class", "band");
      p.setAttribute("fill", "none");
      p.setAttribute("stroke", "#d33");
      p.setAttribute("stroke-opacity", "0.18");
      p.setAttribute("d", stepPath(f.edges, band, x, y));
      svg.append(p);
    }

    const base = svgEl("path");
    base.setAttribute("class", "baseline");
    base.setAttribute("fill", "none");
    base.setAttribute("stroke", "#999");
    base.setAttribute("d", stepPath(f.edges, this.session.baselineFeatureCoeffs(j), x, y));
    svg.append(base);

    const req = this.requestOverlay[j];
    if (req) {
      const p = svgEl("path");
      p.setAttribute("class", "requested");
      p.setAttribute("fill", "none");
      p.setAttribute("stroke", "#c22");
      p.setAttribute("stroke-dasharray", "4 3");
      p.setAttribute("d", stepPath(f.edges, req, x, y));
      svg.append(p);
    }

    const work = svgEl("path");
    work.setAttribute("class", "working");
    work.setAttribute("fill", "none");
    work.setAttribute("stroke", "#2a7");
    work.setAttribute("stroke-width", "2");
    work.setAttribute("d", stepPath(f.edges, this.session.featureCoeffs(j), x, y));
    svg.append(work);

    const handles = runHandles(
      f.edges,
      this.session.featureCoeffs(j),
      f.run_lengths,
      x,
      y,
    );
    for (const h of handles) {
      const grip = svgEl("rect");
      grip.setAttribute("class", "handle");
      grip.setAttribute("data-run", String(h.run));
      grip.setAttribute("x", String(Math.min(h.x0, h.x1)));
      grip.setAttribute("y", String(h.y - 5));
      grip.setAttribute("width", String(Math.abs(h.x1 - h.x0)));
      grip.setAttribute("height", "10");
      grip.setAttribute("fill", "transparent");
      grip.setAttribute("stroke", "none");
      grip.setAttribute("cursor", "ns-resize");
      this.wireDrag(grip, j, h.run);
      svg.append(grip);
    }
  }

  private wireDrag(grip: SVGRectElement, j: number, run: number): void {
    grip.addEventListener("pointerdown", (ev) => {
      ev.preventDefault();
      const { y } = this.scales[j];
      const svg = this.charts[j];
      const move = (mv: Event) => {
        const py = (mv as PointerEvent).clientY - svg.getBoundingClientRect().top;
        this.applyDrag(j, run, this.invertY(y, py));
      };
      const up = () => {
        window.removeEventListener("pointermove", move);
        window.removeEventListener("pointerup", up);
      };
      window.addEventListener("pointermove", move);
      window.addEventListener("pointerup", up);
    });
  }

  private invertY(y: Scale, px: number): number {
    const [r0, r1] = y.range;
    const [d0, d1] = y.domain;
    const t = (px - r0) / (r1 - r0 || 1);
    return d0 + t * (d1 - d0);
  }

  // One drag tick: move the run, repaint, and schedule the membership check.
  applyDrag(j: number, run: number, value: number): void {
    this.session.dragStep(j, run, value);
    this.badge.dataset.state = "checking";
    this.badge.textContent = "checking…";
    this.renderFeature(j);
    this.scheduleContains();
  }

  scheduleContains(): void {
    this.checkSoon();
  }

  async checkContains(): Promise<void> {
    const token = this.containsGate.next();
    try {
      const res = await this.client.contains(this.session.vector());
      if (!this.containsGate.admit(token)) return;
      this.setBadge(res.inside);
    } catch (err) {
      this.showError(err);
    }
  }

  private setBadge(inside: boolean): void {
    this.badge.dataset.state = inside ? "in" : "out";
    this.badge.textContent = inside ? "in set" : "outside set";
  }

  async projectIntoSet(): Promise<void> {
    const requested = this.session.vector();
    try {
      const res = await this.client.project(requested);
      // red request vs green returned curve, per panel
      this.model.features.forEach((f, j) => {
        const start = this.session.features[j].binStart;
        this.requestOverlay[j] = requested.omega.slice(start, start + f.coefficients.length);
      });
      this.session.setVector({ omega0: res.omega0, omega: res.omega });
      this.renderAll();
      const check = await this.client.contains(this.session.vector());
      this.setBadge(check.inside);
    } catch (err) {
      this.showError(err);
    }
  }

  async makeMonotone(feature: string, direction: "increasing" | "decreasing"): Promise<void> {
    try {
      const res = await this.client.monotone(feature, direction);
      this.session.setVector({ omega0: res.omega0, omega: res.omega });
      this.requestOverlay = this.model.features.map(() => null);
      this.renderAll();
      const check = await this.client.contains(this.session.vector());
      this.setBadge(check.inside);
    } catch (err) {
      this.showError(err);
    }
  }

  async loadBand(n = 40, seed = 42): Promise<void> {
    try {
      const res = await this.client.sample(n, seed);
      this.model.features.forEach((f, j) => {
        const start = this.session.features[j].binStart;
        this.bands[j] = res.omegas.map((w) => w.slice(start, start + f.coefficients.length));
      });
      this.renderAll();
    } catch (err) {
      this.showError(err);
    }
  }

  async loadVi(fixOthers: boolean, target: HTMLElement): Promise<void> {
    try {
      const res = await this.client.vi(fixOthers);
      target.innerHTML = "";
      const hi = Math.max(...res.rows.map((r) => r.vi_plus), 1e-9);
      for (const row of res.rows) {
        const div = document.createElement("div");
        div.className = "vi-row";
        div.dataset.feature = row.feature;
        const label = document.createElement("span");
        label.textContent = row.feature;
        const svg = svgEl("svg");
        svg.setAttribute("width", "260");
        svg.setAttribute("height", "14");
        const x = linearScale([0, hi], [4, 256]);
        const seg = svgEl("line");
        seg.setAttribute("class", "vi-range");
        seg.setAttribute("x1", String(x(row.vi_minus)));
        seg.setAttribute("x2", String(x(row.vi_plus)));
        seg.setAttribute("y1", "7");
        seg.setAttribute("y2", "7");
        seg.setAttribute("stroke", "#36c");
        seg.setAttribute("stroke-width", "4");
        const dot = svgEl("circle");
        dot.setAttribute("cx", String(x(row.vi_center)));
        dot.setAttribute("cy", "7");
        dot.setAttribute("r", "3");
        dot.setAttribute("fill", "#222");
        svg.append(seg, dot);
        div.append(label, svg);
        target.append(div);
      }
    } catch (err) {
      this.showError(err);
    }
  }

  showError(err: unknown): void {
    const banner = document.createElement("div");
    banner.className = "banner";
    const code = err instanceof ApiError ? err.code : "client_error";
    banner.dataset.code = code;
    banner.textContent = `${code}: ${err instanceof Error ? err.message : String(err)}`;
    const close = document.createElement("button");
    close.textContent = "×";
    close.addEventListener("click", () => banner.remove());
    banner.append(close);
    this.banners.append(banner);
  }
}

export async function mountEditor(root: HTMLElement, baseUrl: string): Promise<Editor> {
  const client = new Client(baseUrl);
  const model: ModelDoc = await client.getModel();
  return new Editor(root, client, model);
}
