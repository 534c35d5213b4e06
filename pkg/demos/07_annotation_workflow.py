"""The annotation backend, driven end to end in process.

Walks the full crowd-annotation loop: qualification, task assignment,
painting with the geodesic brush (draw + erase strokes validated by server
replay), meta-review with a flag and re-annotation, agreement statistics,
and the final dataset export.

To run the same server over HTTP (for the browser UI):
    contactkit annotate-serve --template-ref icosphere:2:24 --qualify alice
"""

from fastapi.testclient import TestClient

from contactkit.mesh import build_edge_graph, make_template, precompute_brush_cache
from contactkit.service import AnnotationStore, build_app

template = make_template("icosphere", num_parts=24, subdivisions=2)
cache = precompute_brush_cache(build_edge_graph(template), [0.0, 0.2, 0.4])
store = AnnotationStore()
app = build_app(
    template, cache, store,
    vocabulary=("ground", "box"),
    qualification_gt={"qual_1": [0, 1, 2]},
)
client = TestClient(app)

# Qualification: candidates annotate a fixed image set and are gated on IoU.
result = client.post("/qualification", json={
    "annotator": "alice", "submissions": {"qual_1": [0, 1, 2]},
}).json()
print(f"alice qualification: passed={result['passed']} mean IoU={result['mean_iou']:.2f}")

# Two prompts per task: each object label, then scene-supported contact.
store.add_task("photo_001", ["box"])
task = client.get("/task/next", params={"annotator": "alice"}).json()["task"]
print(f"assigned {task['task_id']} with prompts {task['label_sequence']}")

# Paint with the geodesic brush: two draws, then erase the second center.
brush_02 = client.get("/brush-cache", params={"radius": 0.2}).json()["neighborhoods"]
brush_04 = client.get("/brush-cache", params={"radius": 0.4}).json()["neighborhoods"]
strokes = [
    {"center": 10, "radius": 0.2, "mode": "draw"},
    {"center": 40, "radius": 0.2, "mode": "draw"},
    {"center": 40, "radius": 0.0, "mode": "erase"},
]
selection = (set(brush_02[10]) | set(brush_02[40])) - {40}
resp = client.post(f"/task/{task['task_id']}/annotation", json={
    "annotator": "alice", "label": "box", "strokes": strokes,
    "final_vertices": sorted(selection),
}).json()
print(f"box prompt accepted; next prompt: {resp['next_prompt']}")

resp = client.post(f"/task/{task['task_id']}/annotation", json={
    "annotator": "alice", "label": "scene-supported",
    "strokes": [{"center": 0, "radius": 0.4, "mode": "draw"}],
    "final_vertices": sorted(brush_04[0]),
    "feedback": "contact partially guessed (occluded)",
}).json()
print(f"task state after last prompt: {resp['task_state']}")

# Meta-review: flag sends the task back to the queue with feedback.
review = client.post("/qa/review", json={
    "task_id": task["task_id"], "verdict": "flag", "notes": "brush too coarse on the box",
}).json()
print(f"after flag: task is {review['task_state']} again")

task2 = client.get("/task/next", params={"annotator": "alice"}).json()["task"]
print(f"re-annotation notes shown to the annotator: {task2['notes']}")
for label in ["box", "scene-supported"]:
    client.post(f"/task/{task2['task_id']}/annotation", json={
        "annotator": "alice", "label": label,
        "strokes": [{"center": 10, "radius": 0.0, "mode": "draw"}],
        "final_vertices": [10],
    })
client.post("/qa/review", json={"task_id": task2["task_id"], "verdict": "ok"})

export = client.get("/export").json()
print(f"export contains {len(export['records'])} finalized record(s): "
      f"{export['records'][0]['image_id']} -> scene contact {export['records'][0]['scene_supported']}")
