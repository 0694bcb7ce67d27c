/**
 * The editing loop: load a project, stage a graph delta, preview the plan
 * as overlays, confirm, poll the job, and refresh from the server. State
 * only transitions on server acknowledgment — the client never applies a
 * delta locally, so the rendered graph is always the server's graph.
 */

import {
  ApiClient,
  ApiError,
  pollJob,
  type DeltaActionWire,
  type DeltaWire,
  type EdgeWire,
  type EditPreview,
  type GraphWire,
  type JobWire,
  type ProjectWire,
  type ReportWire,
} from "./api.js";
import { touchedNodeIds, validateDelta } from "./delta.js";
import { renderGraph, type GraphView } from "./graphView.js";
import { planOverlays, renderOverlays } from "./overlays.js";

export interface GalleryEntry {
  editId: string;
  /** archive-relative path of the result image, from project history */
  resultImage: string;
  editRegion: string;
  report: ReportWire | null;
}

export interface ViewState {
  project: ProjectWire | null;
  selectedNode: string | null;
  selectedEdge: EdgeWire | null;
  pending: DeltaWire | null;
  pendingErrors: string[];
  preview: EditPreview | null;
  job: JobWire | null;
  status: string;
  report: ReportWire | null;
  gallery: GalleryEntry[];
}

export interface AppOptions {
  layoutSeed?: number;
  pollIntervalMs?: number;
  imageDisplaySize?: number;
}

export class App {
  state: ViewState = {
    project: null,
    selectedNode: null,
    selectedEdge: null,
    pending: null,
    pendingErrors: [],
    preview: null,
    job: null,
    status: "no project",
    report: null,
    gallery: [],
  };
  graphView: GraphView | null = null;

  private graphPanel: HTMLElement;
  private imagePanel: HTMLElement;
  private statusChip: HTMLElement;
  private galleryPanel: HTMLElement;
  /** overlay target over the image; tests inspect its contents */
  imageSvg: SVGSVGElement | null = null;
  private sourceImageB64 = "";

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private opts: AppOptions = {},
  ) {
    root.textContent = "";
    root.classList.add("sgedit-app");
    this.statusChip = this.panel("status-chip");
    this.imagePanel = this.panel("image-panel");
    this.graphPanel = this.panel("graph-panel");
    this.galleryPanel = this.panel("gallery-panel");
    this.setStatus("no project");
  }

  private panel(className: string): HTMLElement {
    const el = document.createElement("div");
    el.className = className;
    this.root.appendChild(el);
    return el;
  }

  private setStatus(text: string, kind = "info") {
    this.state.status = text;
    this.statusChip.textContent = text;
    this.statusChip.setAttribute("data-kind", kind);
  }

  private fail(err: unknown): never {
    if (err instanceof ApiError) {
      this.setStatus(`${err.status} ${err.stage}: ${err.message}`, "error");
    } else {
      this.setStatus(String(err), "error");
    }
    throw err;
  }

  get graph(): GraphWire | null {
    return this.state.project?.graph ?? null;
  }

  async createProject(imageId: string, pngBase64: string): Promise<ProjectWire> {
    this.sourceImageB64 = pngBase64;
    const project = await this.client.createProject(imageId, pngBase64).catch((e) => this.fail(e));
    this.state.project = project;
    this.setStatus(`project ${project.id}`);
    this.renderAll();
    return project;
  }

  async refreshProject(): Promise<ProjectWire> {
    const id = this.requireProject().id;
    const project = await this.client.getProject(id).catch((e) => this.fail(e));
    this.state.project = project;
    this.renderAll();
    return project;
  }

  private requireProject(): ProjectWire {
    if (!this.state.project) throw new Error("no project loaded");
    return this.state.project;
  }

  selectNode(id: string) {
    this.state.selectedNode = id;
    this.state.selectedEdge = null;
  }

  selectEdge(edge: EdgeWire) {
    this.state.selectedEdge = edge;
    this.state.selectedNode = null;
  }

  /**
   * Validate and stage a delta. Returns violations; the delta is staged
   * only when there are none, keeping the pending delta always valid
   * against the displayed graph.
   */
  stageDelta(actions: DeltaActionWire[]): string[] {
    const graph = this.requireProject().graph;
    const delta: DeltaWire = { actions };
    const errors = validateDelta(graph, delta);
    this.state.pendingErrors = errors;
    this.state.pending = errors.length === 0 ? delta : null;
    if (errors.length === 0) {
      this.setStatus("delta staged");
      this.renderGraphPanel();
    } else {
      this.setStatus(`invalid delta: ${errors[0]}`, "error");
    }
    return errors;
  }

  clearStaged() {
    this.state.pending = null;
    this.state.pendingErrors = [];
    this.state.preview = null;
    this.renderAll();
  }

  /** POST the staged delta; renders the plan's masks and boxes. */
  async preview(): Promise<EditPreview> {
    const project = this.requireProject();
    if (!this.state.pending) throw new Error("no staged delta");
    const preview = await this.client
      .submitEdit(project.id, this.state.pending)
      .catch((e) => this.fail(e));
    this.state.preview = preview;
    this.setStatus(`plan ${preview.edit_id}: ${preview.plan.removals.length} removal(s), ` +
      `${preview.plan.insertions.length} insertion(s)`);
    this.renderImagePanel();
    return preview;
  }

  /** Confirm the previewed edit, poll to completion, re-sync from server. */
  async confirm(seed: number): Promise<JobWire> {
    const project = this.requireProject();
    const preview = this.state.preview;
    if (!preview) throw new Error("no previewed edit");
    const ack = await this.client
      .confirmEdit(project.id, preview.edit_id, seed)
      .catch((e) => this.fail(e));
    this.setStatus(`job ${ack.job_id} running`);
    const job = await pollJob(
      this.client,
      ack.job_id,
      this.opts.pollIntervalMs ?? 100,
      (tick) => this.setStatus(`job ${tick.id} ${tick.status} ${Math.round(tick.progress * 100)}%`),
    ).catch((e) => this.fail(e));
    this.state.job = job;
    if (job.status === "failed") {
      this.setStatus(`job ${job.id} failed: ${job.error}`, "error");
    } else {
      this.setStatus(`job ${job.id} done`);
      this.state.pending = null;
      this.state.preview = null;
      await this.refreshProject();
    }
    return job;
  }

  async evaluate(editId: string): Promise<ReportWire> {
    const project = this.requireProject();
    const report = await this.client.evaluate(project.id, editId).catch((e) => this.fail(e));
    this.state.report = report;
    this.setStatus(
      `report ${editId}: ec=${report.ec.toFixed(2)} ra=${report.ra.toFixed(2)} iq=${report.iq.toFixed(2)}`,
    );
    this.renderGalleryPanel();
    return report;
  }

  exportUrl(): string {
    return this.client.exportUrl(this.requireProject().id);
  }

  // --- rendering ---------------------------------------------------------

  renderAll() {
    this.renderImagePanel();
    this.renderGraphPanel();
    this.renderGalleryPanel();
  }

  private renderImagePanel() {
    const project = this.state.project;
    this.imagePanel.textContent = "";
    this.imageSvg = null;
    if (!project) return;
    const size = this.opts.imageDisplaySize ?? 256;

    const frame = document.createElement("div");
    frame.className = "image-frame";
    if (this.sourceImageB64) {
      const img = document.createElement("img");
      img.className = "source-image";
      img.src = `data:image/png;base64,${this.sourceImageB64}`;
      img.width = size;
      img.height = size;
      frame.appendChild(img);
    }
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("class", "overlay-svg");
    svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
    svg.setAttribute("width", String(size));
    svg.setAttribute("height", String(size));
    frame.appendChild(svg);
    this.imagePanel.appendChild(frame);
    this.imageSvg = svg;

    if (this.state.preview) {
      const overlays = planOverlays(this.state.preview.plan, project.graph.image_size);
      renderOverlays(svg, overlays, size, size);
      const prompts = document.createElement("div");
      prompts.className = "plan-prompts";
      const combined = this.state.preview.plan.combined_prompt;
      prompts.textContent = combined
        ? `prompt: ${combined}`
        : `prompt: ${this.state.preview.plan.non_object_prompt}`;
      this.imagePanel.appendChild(prompts);
    }
  }

  private renderGraphPanel() {
    const project = this.state.project;
    this.graphPanel.textContent = "";
    this.graphView = null;
    if (!project) return;
    const highlighted = this.state.pending
      ? touchedNodeIds(project.graph, this.state.pending)
      : new Set<string>();
    this.graphView = renderGraph(this.graphPanel, project.graph, {
      seed: this.opts.layoutSeed ?? 1,
      highlighted,
      onSelectNode: (id) => this.selectNode(id),
      onSelectEdge: (edge) => this.selectEdge(edge),
    });
  }

  private renderGalleryPanel() {
    const project = this.state.project;
    this.galleryPanel.textContent = "";
    if (!project) return;
    this.state.gallery = project.history.map((entry) => ({
      editId: entry.edit_id,
      resultImage: entry.result_image,
      editRegion: entry.edit_region,
      report: entry.report,
    }));
    for (const entry of this.state.gallery) {
      const card = document.createElement("div");
      card.className = "gallery-entry";
      card.setAttribute("data-edit-id", entry.editId);
      const title = document.createElement("div");
      title.className = "gallery-title";
      title.textContent = entry.editId;
      card.appendChild(title);
      if (entry.report) {
        const scores = document.createElement("div");
        scores.className = "gallery-report";
        scores.textContent =
          `ec ${entry.report.ec.toFixed(2)} · ra ${entry.report.ra.toFixed(2)}` +
          ` · iq ${entry.report.iq.toFixed(2)}`;
        card.appendChild(scores);
      }
      this.galleryPanel.appendChild(card);
    }
    const exportLink = document.createElement("a");
    exportLink.className = "export-link";
    exportLink.href = this.exportUrl();
    exportLink.textContent = "download project archive";
    this.galleryPanel.appendChild(exportLink);
  }
}
