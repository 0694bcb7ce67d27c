/**
 * Typed client for the sgedit HTTP service. One method per endpoint; no
 * client-side plan logic — everything rendered comes straight off the wire.
 */

export interface NodeWire {
  id: string;
  label: string;
  caption?: string;
  bbox?: [number, number, number, number] | null;
  mask?: string | null; // "rle:..." at image resolution
  token?: string | null;
  background?: boolean;
  ungrounded?: boolean;
}

export interface EdgeWire {
  s: string;
  p: string;
  o: string;
}

export interface GraphWire {
  image_size: [number, number]; // [width, height]
  nodes: NodeWire[];
  edges: EdgeWire[];
}

export interface DeltaActionWire {
  type: "remove_node" | "add_node" | "replace_node" | "modify_edge";
  id?: string;
  label?: string;
  caption?: string;
  relations?: { p: string; o: string }[];
  edge?: { s: string; p: string; o: string };
  predicate?: string;
}

export interface DeltaWire {
  actions: DeltaActionWire[];
}

export interface PlanWire {
  removals: { node: string; mask: string }[];
  insertions: {
    node: string;
    label: string;
    token: string | null;
    bbox: [number, number, number, number];
    prompt: string;
  }[];
  combined_prompt: string;
  non_object_prompt: string;
}

export interface EditPreview {
  edit_id: string;
  status: string;
  plan: PlanWire;
  target_graph: GraphWire;
}

export interface JobWire {
  id: string;
  project_id: string;
  edit_id: string;
  status: "running" | "done" | "failed";
  progress: number;
  error: string | null;
}

export interface ChecklistItemWire {
  description: string;
  scale: number;
  score: number;
}

export interface ReportWire {
  edit_id: string;
  ec: number;
  ra: number;
  iq: number;
  checklists: { metric: string; items: ChecklistItemWire[] }[];
  notes?: string[];
  background?: {
    mse: number;
    psnr_db: number;
    ssim: number;
    pixels: number;
    ssim_pixels: number;
  } | null;
}

export interface HistoryEntryWire {
  edit_id: string;
  delta: DeltaWire;
  plan: PlanWire;
  seed: number;
  result_image: string;
  edit_region: string;
  report: ReportWire | null;
}

export interface ProjectWire {
  id: string;
  image_id: string;
  scene_caption: string;
  graph: GraphWire;
  parsed_graph: GraphWire;
  receipt: {
    job_id: string;
    token_handles: Record<string, string>;
    model_handle: string;
  } | null;
  notes: { kind: string; detail: string }[];
  history: HistoryEntryWire[];
}

/** Error body the service attaches to non-2xx responses. */
export interface ServiceError {
  stage: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public stage: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      const detail: ServiceError = body?.detail ?? {
        stage: "unknown",
        message: `HTTP ${resp.status}`,
      };
      throw new ApiError(resp.status, detail.stage, detail.message);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createProject(imageId: string, pngBase64: string): Promise<ProjectWire> {
    return this.post("/projects", { image_id: imageId, image_png_b64: pngBase64 });
  }

  getProject(projectId: string): Promise<ProjectWire> {
    return this.request(`/projects/${projectId}`);
  }

  submitEdit(projectId: string, delta: DeltaWire): Promise<EditPreview> {
    return this.post(`/projects/${projectId}/edits`, delta);
  }

  confirmEdit(
    projectId: string,
    editId: string,
    seed: number,
  ): Promise<{ job_id: string; edit_id: string; status: string }> {
    return this.post(`/projects/${projectId}/edits/${editId}/confirm`, { seed });
  }

  getJob(jobId: string): Promise<JobWire> {
    return this.request(`/jobs/${jobId}`);
  }

  evaluate(projectId: string, editId: string): Promise<ReportWire> {
    return this.post(`/projects/${projectId}/evaluate`, { edit_id: editId });
  }

  /** URL of the project archive; downloads are plain links, not XHRs. */
  exportUrl(projectId: string): string {
    return `${this.baseUrl}/projects/${projectId}/export`;
  }
}

/**
 * Poll a job until it reaches a terminal state. Resolves with the final job
 * record; a "failed" job resolves too (the caller renders the error chip),
 * only transport errors reject.
 */
export function pollJob(
  client: ApiClient,
  jobId: string,
  intervalMs = 150,
  onTick?: (job: JobWire) => void,
): Promise<JobWire> {
  return new Promise((resolve, reject) => {
    const poll = setInterval(async () => {
      try {
        const job = await client.getJob(jobId);
        onTick?.(job);
        if (job.status === "done" || job.status === "failed") {
          clearInterval(poll);
          resolve(job);
        }
      } catch (err) {
        clearInterval(poll);
        reject(err);
      }
    }, intervalMs);
  });
}
