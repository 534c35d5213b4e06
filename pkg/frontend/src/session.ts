/**
 * Annotation session state machine: one task at a time, cycling through its
 * contact prompts (each object label, then scene-supported contact). The
 * painted selection is always the fold of the stroke log, so a submission
 * carries exactly what the server will reproduce by replay.
 */

import { AnnotationApi, SubmissionResult, TaskView } from "./api.js";
import { BrushCache, BrushMode, Stroke, replayLog, sortedVertices } from "./strokes.js";

export class AnnotationSession {
  mode: BrushMode = "draw";
  radiusIndex = 0;
  strokes: Stroke[] = [];
  selection = new Set<number>();
  task: TaskView | null = null;

  constructor(
    private api: AnnotationApi,
    public readonly annotator: string,
    public readonly cache: BrushCache,
    public readonly radii: number[],
  ) {}

  get currentRadius(): number {
    return this.radii[this.radiusIndex];
  }

  get currentPrompt(): string | null {
    return this.task?.current_prompt ?? null;
  }

  setRadiusIndex(index: number): void {
    if (index < 0 || index >= this.radii.length) throw new Error(`radius index ${index}`);
    this.radiusIndex = index;
  }

  setMode(mode: BrushMode): void {
    this.mode = mode;
  }

  async takeNextTask(): Promise<TaskView | null> {
    this.task = await this.api.nextTask(this.annotator);
    this.clearSelection();
    return this.task;
  }

  /** Paint at the hovered vertex with the active brush and mode. */
  paintHover(vertex: number): void {
    const stroke: Stroke = { center: vertex, radius: this.currentRadius, mode: this.mode };
    this.strokes.push(stroke);
    this.selection = replayLog(this.strokes, this.cache);
  }

  /** The eraser-everything button: selection and log reset together. */
  clearSelection(): void {
    this.strokes = [];
    this.selection = new Set();
  }

  /**
   * Submit the current prompt: stroke log plus the locally computed vertex
   * set. On acceptance the next prompt starts with a clean selection; on
   * rejection local state is untouched so the user can keep editing.
   */
  async submitPrompt(feedback?: string): Promise<SubmissionResult> {
    if (!this.task || this.task.current_prompt === null) {
      throw new Error("no active prompt to submit");
    }
    const result = await this.api.submitAnnotation(
      this.task.task_id,
      this.annotator,
      this.task.current_prompt,
      this.strokes,
      sortedVertices(this.selection),
      feedback,
    );
    this.task.prompt_index += 1;
    this.task.current_prompt = result.next_prompt;
    this.task.state = result.task_state;
    this.clearSelection();
    return result;
  }
}
