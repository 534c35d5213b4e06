/** Typed client for the annotation backend HTTP API. */

import { BrushCache, Stroke } from "./strokes.js";

export interface TemplatePayload {
  vertices: number[][];
  triangles: number[][];
  part_labels: number[];
  num_parts: number;
  radii: number[];
  vocabulary: string[];
}

export interface TaskView {
  task_id: string;
  image_id: string;
  label_sequence: string[];
  state: string;
  prompt_index: number;
  current_prompt: string | null;
  notes: string[];
}

export interface SubmissionResult {
  accepted: boolean;
  task_state: string;
  next_prompt: string | null;
  ask_feedback: boolean;
}

export interface ReplayDiff {
  message: string;
  server_only: number[];
  client_only: number[];
}

export class ApiError extends Error {
  constructor(public status: number, public detail: unknown) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

export class AnnotationApi {
  constructor(private base: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, init);
    const body = await resp.json().catch(() => null);
    if (!resp.ok) throw new ApiError(resp.status, body?.detail ?? body);
    return body as T;
  }

  getTemplate(): Promise<TemplatePayload> {
    return this.request("/template");
  }

  async getBrushCache(radii: number[]): Promise<BrushCache> {
    const cache = new BrushCache(radii);
    for (const radius of radii) {
      const payload = await this.request<{ radius: number; neighborhoods: number[][] }>(
        `/brush-cache?radius=${radius}`,
      );
      cache.setTable(radius, payload.neighborhoods);
    }
    return cache;
  }

  async nextTask(annotator: string): Promise<TaskView | null> {
    const body = await this.request<{ task: TaskView | null }>(
      `/task/next?annotator=${encodeURIComponent(annotator)}`,
    );
    return body.task;
  }

  submitAnnotation(
    taskId: string,
    annotator: string,
    label: string,
    strokes: readonly Stroke[],
    finalVertices: number[],
    feedback?: string,
  ): Promise<SubmissionResult> {
    return this.request(`/task/${taskId}/annotation`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        annotator,
        label,
        strokes,
        final_vertices: finalVertices,
        feedback: feedback ?? null,
      }),
    });
  }

  qualify(annotator: string, submissions: Record<string, number[]>) {
    return this.request<{ passed: boolean; mean_iou: number }>("/qualification", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ annotator, submissions }),
    });
  }

  review(taskId: string, verdict: "ok" | "flag", notes?: string) {
    return this.request<{ task_state: string }>("/qa/review", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ task_id: taskId, verdict, notes: notes ?? null }),
    });
  }

  exportDataset() {
    return this.request<{ records: unknown[] }>("/export");
  }
}
