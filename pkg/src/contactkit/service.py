"""HTTP backend for the vertex-painting annotation workflow.

Clients download the template mesh and the precomputed brush-neighborhood
cache, paint locally, and submit the stroke log together with the vertex set
they computed. The server replays the strokes against its own cache (draw =
union of the brush neighborhood, erase = set difference, in submission
order) and accepts only when the replay matches the client's set exactly —
trust, but verify.

Task lifecycle: open -> submitted -> (flagged -> reannotate -> open)* ->
finalized. All task-state transitions are serialized through one lock and
appended to a JSONL event log, which is enough to rebuild the queue.
"""

import itertools
import json
import threading
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel

from . import contact_data, metrics

SCENE_PROMPT = "scene-supported"


class Stroke(BaseModel):
    center: int
    radius: float
    mode: str  # draw | erase


class StrokeSubmission(BaseModel):
    annotator: str
    label: str
    strokes: list[Stroke]
    final_vertices: list[int]
    feedback: str | None = None


class ReviewRequest(BaseModel):
    task_id: str
    verdict: str  # ok | flag
    notes: str | None = None


class QualificationRequest(BaseModel):
    annotator: str
    submissions: dict[str, list[int]]  # qualification image id -> vertex ids


@dataclass
class AnnotationTask:
    task_id: str
    image_id: str
    label_sequence: list  # object prompts, then the scene-supported prompt
    state: str = "open"
    assigned_to: str = None
    prompt_index: int = 0
    results: dict = field(default_factory=dict)  # label -> sorted vertex list
    feedback: str = None
    notes: list = field(default_factory=list)
    cycle: int = 0  # bumped every time a flag sends the task back out
    last_reviewed_cycle: int = None
    last_verdict: str = None


def replay_strokes(strokes, cache):
    """Fold a stroke list into a vertex set using the brush cache."""
    selected = set()
    for s in strokes:
        ids = cache.neighborhood(s.radius, s.center)
        if s.mode == "draw":
            selected.update(int(v) for v in ids)
        elif s.mode == "erase":
            selected.difference_update(int(v) for v in ids)
        else:
            raise ValueError(f"unknown stroke mode {s.mode!r}")
    return sorted(selected)


class AnnotationStore:
    """In-memory task queue + append-only event log (single writer)."""

    def __init__(self, log_path=None):
        self.lock = threading.Lock()
        self.tasks = {}
        self.qualified = set()
        self.order = []
        self._counter = itertools.count()
        self.log_path = Path(log_path) if log_path else None

    def _log(self, event):
        if self.log_path:
            with open(self.log_path, "a") as f:
                f.write(json.dumps(event, sort_keys=True) + "\n")

    def add_task(self, image_id, object_labels):
        with self.lock:
            task_id = f"task_{next(self._counter):05d}"
            task = AnnotationTask(
                task_id=task_id,
                image_id=image_id,
                label_sequence=list(object_labels) + [SCENE_PROMPT],
            )
            self.tasks[task_id] = task
            self.order.append(task_id)
            self._log({"event": "created", "task": task_id, "image": image_id})
            return task

    def qualify(self, annotator):
        with self.lock:
            self.qualified.add(annotator)
            self._log({"event": "qualified", "annotator": annotator})

    def next_task(self, annotator):
        with self.lock:
            if annotator not in self.qualified:
                raise PermissionError(f"annotator {annotator!r} is not qualified")
            for task_id in self.order:
                task = self.tasks[task_id]
                if task.state == "open" and task.assigned_to is None:
                    task.assigned_to = annotator
                    self._log({"event": "assigned", "task": task_id, "annotator": annotator})
                    return task
            return None


def build_app(mesh, cache, store, vocabulary=contact_data.DEFAULT_VOCABULARY,
              qualification_gt=None, qualification_threshold=0.5,
              frontend_dir=None):
    """Assemble the FastAPI app around a template, brush cache, and store.

    ``qualification_gt`` maps qualification image ids to ground-truth vertex
    id lists; candidates pass when their mean IoU clears the threshold.
    """
    app = FastAPI(title="contact annotation service")
    immutable = {"Cache-Control": "public, max-age=31536000, immutable"}

    template_payload = json.dumps(
        {
            "vertices": mesh.vertices.tolist(),
            "triangles": mesh.triangles.tolist(),
            "part_labels": mesh.part_labels.tolist(),
            "num_parts": mesh.num_parts,
            "radii": list(cache.radii),
            "vocabulary": list(vocabulary),
        }
    )
    cache_payloads = {
        repr(r): json.dumps({"radius": r, "neighborhoods": [ids.tolist() for ids in cache.table(r)]})
        for r in cache.radii
    }

    @app.get("/template")
    def get_template():
        return Response(template_payload, media_type="application/json", headers=immutable)

    @app.get("/brush-cache")
    def get_brush_cache(radius: float = Query(...)):
        key = repr(float(radius))
        if key not in cache_payloads:
            raise HTTPException(status_code=404, detail=f"no brush cache for radius {radius}")
        return Response(cache_payloads[key], media_type="application/json", headers=immutable)

    @app.get("/task/next")
    def task_next(annotator: str = Query(...)):
        try:
            task = store.next_task(annotator)
        except PermissionError as e:
            raise HTTPException(status_code=403, detail=str(e))
        if task is None:
            return {"task": None}
        return {"task": _task_view(task)}

    @app.post("/task/{task_id}/annotation")
    def submit_annotation(task_id: str, submission: StrokeSubmission):
        with store.lock:
            task = store.tasks.get(task_id)
            if task is None:
                raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
            if task.state != "open":
                raise HTTPException(status_code=409, detail=f"task is {task.state}, not open")
            if task.assigned_to != submission.annotator:
                raise HTTPException(status_code=403, detail="task assigned to someone else")
            expected_label = task.label_sequence[task.prompt_index]
            if submission.label != expected_label:
                raise HTTPException(
                    status_code=409,
                    detail=f"expected prompt {expected_label!r}, got {submission.label!r}",
                )
            for s in submission.strokes:
                if float(s.radius) not in cache.radii:
                    raise HTTPException(status_code=422, detail=f"unknown brush radius {s.radius}")
                if not 0 <= s.center < mesh.num_vertices:
                    raise HTTPException(status_code=422, detail=f"vertex {s.center} out of range")
            replayed = replay_strokes(submission.strokes, cache)
            client_set = sorted(set(submission.final_vertices))
            if replayed != client_set:
                raise HTTPException(
                    status_code=422,
                    detail={
                        "message": "stroke replay does not match final_vertices",
                        "server_only": sorted(set(replayed) - set(client_set)),
                        "client_only": sorted(set(client_set) - set(replayed)),
                    },
                )
            task.results[submission.label] = replayed
            task.prompt_index += 1
            store._log(
                {"event": "annotation", "task": task_id, "label": submission.label,
                 "vertices": replayed, "annotator": submission.annotator}
            )
            done = task.prompt_index >= len(task.label_sequence)
            if done:
                task.state = "submitted"
                task.feedback = submission.feedback
                store._log({"event": "submitted", "task": task_id})
            return {
                "accepted": True,
                "task_state": task.state,
                "next_prompt": None if done else task.label_sequence[task.prompt_index],
                "ask_feedback": done,
            }

    @app.post("/qa/review")
    def review(req: ReviewRequest):
        if req.verdict not in ("ok", "flag"):
            raise HTTPException(status_code=422, detail=f"unknown verdict {req.verdict!r}")
        with store.lock:
            task = store.tasks.get(req.task_id)
            if task is None:
                raise HTTPException(status_code=404, detail=f"unknown task {req.task_id!r}")
            if task.state == "open":
                if task.last_reviewed_cycle == task.cycle - 1 and task.cycle > 0:
                    # this open state came from a flag; same verdict is a no-op
                    if req.verdict == "flag":
                        return {"task_state": task.state, "idempotent": True}
                    raise HTTPException(
                        status_code=409, detail="submission was already flagged for re-annotation"
                    )
                raise HTTPException(status_code=409, detail="cannot review an open task")
            if task.last_reviewed_cycle == task.cycle:
                if task.last_verdict == req.verdict:
                    return {"task_state": task.state, "idempotent": True}
                raise HTTPException(
                    status_code=409,
                    detail=f"task already reviewed with verdict {task.last_verdict!r}",
                )
            task.last_reviewed_cycle = task.cycle
            task.last_verdict = req.verdict
            if req.notes:
                task.notes.append(req.notes)
            store._log({"event": "review", "task": req.task_id, "verdict": req.verdict})
            if req.verdict == "ok":
                task.state = "finalized"
            else:
                # flagged work goes back to the queue with feedback attached
                store._log({"event": "flagged", "task": req.task_id})
                store._log({"event": "reannotate", "task": req.task_id})
                task.state = "open"
                task.assigned_to = None
                task.prompt_index = 0
                task.results = {}
                task.cycle += 1
            return {"task_state": task.state, "idempotent": False}

    @app.get("/qa/agreement")
    def agreement(image_set: str = Query(...)):
        image_ids = [s for s in image_set.split(",") if s]
        out = {}
        with store.lock:
            for image_id in image_ids:
                subs = [
                    (t.assigned_to, t.results)
                    for t in store.tasks.values()
                    if t.image_id == image_id and t.state in ("submitted", "finalized")
                ]
                annotators = {a for a, _ in subs}
                if len(annotators) < 2:
                    raise HTTPException(
                        status_code=422,
                        detail=f"need submissions from >= 2 annotators for {image_id!r}",
                    )
                unions = {
                    a: sorted(set().union(*[set(v) for v in res.values()]) if res else set())
                    for a, res in subs
                }
                names = sorted(unions)
                ratings = np.zeros((mesh.num_vertices, 2), dtype=np.int64)
                for a in names:
                    contact = np.zeros(mesh.num_vertices, dtype=bool)
                    contact[np.asarray(unions[a], dtype=np.int64)] = True
                    ratings[:, 1] += contact
                    ratings[:, 0] += ~contact
                iou_matrix = [
                    [metrics.iou(unions[a], unions[b]) for b in names] for a in names
                ]
                out[image_id] = {
                    "annotators": names,
                    "fleiss_kappa": metrics.fleiss_kappa(ratings),
                    "iou_matrix": iou_matrix,
                }
        return out

    @app.post("/qualification")
    def qualification(req: QualificationRequest):
        if not qualification_gt:
            raise HTTPException(status_code=404, detail="no qualification set configured")
        ious = []
        for image_id, gt_ids in qualification_gt.items():
            sub = req.submissions.get(image_id)
            if sub is None:
                raise HTTPException(status_code=422, detail=f"missing submission for {image_id!r}")
            ious.append(metrics.iou(sub, gt_ids))
        passed = metrics.qualification_gate(ious, qualification_threshold)
        if passed:
            store.qualify(req.annotator)
        return {"passed": passed, "mean_iou": float(np.mean(ious))}

    @app.get("/export")
    def export():
        with store.lock:
            records = []
            for task_id in store.order:
                task = store.tasks[task_id]
                if task.state != "finalized":
                    continue
                object_contacts = [
                    (label, ids)
                    for label, ids in task.results.items()
                    if label != SCENE_PROMPT and ids
                ]
                records.append(
                    contact_data._record_to_json(
                        contact_data.ContactRecord(
                            image_id=task.image_id,
                            image_path=f"images/{task.image_id}.png",
                            object_contacts=tuple(object_contacts),
                            scene_supported=task.results.get(SCENE_PROMPT, []),
                            annotator_id=task.assigned_to,
                            feedback=task.feedback,
                        )
                    )
                )
        return {"schema_version": contact_data.SCHEMA_VERSION, "records": records}

    @app.get("/tasks")
    def tasks():
        with store.lock:
            return {"tasks": [_task_view(t) for t in store.tasks.values()]}

    if frontend_dir is not None and Path(frontend_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app


def _task_view(task):
    view = asdict(task)
    view["current_prompt"] = (
        task.label_sequence[task.prompt_index]
        if task.prompt_index < len(task.label_sequence)
        else None
    )
    return view
