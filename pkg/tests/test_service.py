import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from contactkit.mesh import build_edge_graph, precompute_brush_cache
from contactkit.service import AnnotationStore, Stroke, build_app, replay_strokes

from oracles import floyd_warshall, graph_to_dense, replay_strokes_reference

RADII = (0.0, 0.5, 1.0)


@pytest.fixture
def service(tetra_mesh):
    graph = build_edge_graph(tetra_mesh)
    cache = precompute_brush_cache(graph, RADII)
    store = AnnotationStore()
    store.qualify("alice")
    store.qualify("bob")
    app = build_app(
        tetra_mesh, cache, store, vocabulary=("ground", "box"),
        qualification_gt={"q1": [0, 1], "q2": [2]},
    )
    return TestClient(app), store, graph


def take_task(client, annotator="alice"):
    resp = client.get("/task/next", params={"annotator": annotator})
    assert resp.status_code == 200
    return resp.json()["task"]


def draw(center, radius, mode="draw"):
    return {"center": center, "radius": radius, "mode": mode}


def submit(client, task_id, annotator, label, strokes, final, feedback=None):
    return client.post(
        f"/task/{task_id}/annotation",
        json={
            "annotator": annotator,
            "label": label,
            "strokes": strokes,
            "final_vertices": final,
            "feedback": feedback,
        },
    )


class TestStaticPayloads:
    def test_template_payload(self, service):
        client, _, _ = service
        resp = client.get("/template")
        assert resp.status_code == 200
        assert "immutable" in resp.headers["cache-control"]
        body = resp.json()
        assert len(body["vertices"]) == 4
        assert body["radii"] == list(RADII)

    def test_brush_cache_known_radius(self, service):
        client, _, _ = service
        resp = client.get("/brush-cache", params={"radius": 1.0})
        assert resp.status_code == 200
        table = resp.json()["neighborhoods"]
        assert all(ids == [0, 1, 2, 3] for ids in table)

    def test_brush_cache_unknown_radius_404(self, service):
        client, _, _ = service
        resp = client.get("/brush-cache", params={"radius": 0.77})
        assert resp.status_code == 404
        assert "neighborhoods" not in resp.text


class TestTaskQueue:
    def test_assignment_and_completion(self, service):
        client, store, _ = service
        store.add_task("img_a", ["box"])
        task = take_task(client)
        assert task["image_id"] == "img_a"
        assert task["label_sequence"] == ["box", "scene-supported"]
        assert task["current_prompt"] == "box"

        r = submit(client, task["task_id"], "alice", "box", [draw(0, 1.0)], [0, 1, 2, 3])
        assert r.status_code == 200
        assert r.json()["next_prompt"] == "scene-supported"
        r = submit(client, task["task_id"], "alice", "scene-supported",
                   [draw(2, 0.0)], [2], feedback="ambiguous contact")
        assert r.json()["task_state"] == "submitted"
        assert r.json()["ask_feedback"] is True

    def test_unqualified_rejected(self, service):
        client, _, _ = service
        resp = client.get("/task/next", params={"annotator": "mallory"})
        assert resp.status_code == 403

    def test_empty_queue_none(self, service):
        client, _, _ = service
        assert take_task(client) is None

    def test_concurrent_requests_single_assignment(self, service):
        client, store, _ = service
        store.add_task("img_race", ["box"])
        results = []
        barrier = threading.Barrier(8)

        def grab(name):
            barrier.wait()
            results.append(take_task(client, name))

        threads = [threading.Thread(target=grab, args=(f"alice",)) for _ in range(4)]
        threads += [threading.Thread(target=grab, args=(f"bob",)) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        got = [r for r in results if r is not None]
        assert len(got) == 1

    def test_wrong_annotator_submission_rejected(self, service):
        client, store, _ = service
        store.add_task("img_b", [])
        task = take_task(client, "alice")
        r = submit(client, task["task_id"], "bob", "scene-supported", [], [])
        assert r.status_code == 403

    def test_wrong_prompt_rejected(self, service):
        client, store, _ = service
        store.add_task("img_c", ["box"])
        task = take_task(client)
        r = submit(client, task["task_id"], "alice", "scene-supported", [], [])
        assert r.status_code == 409


class TestStrokeReplay:
    def test_single_draw(self, service):
        client, store, _ = service
        store.add_task("img_d", [])
        task = take_task(client)
        r = submit(client, task["task_id"], "alice", "scene-supported",
                   [draw(1, 1.0)], [0, 1, 2, 3])
        assert r.status_code == 200

    def test_draw_then_erase_empty(self, service):
        client, store, _ = service
        store.add_task("img_e", [])
        task = take_task(client)
        r = submit(client, task["task_id"], "alice", "scene-supported",
                   [draw(1, 1.0), draw(1, 1.0, "erase")], [])
        assert r.status_code == 200

    def test_replay_mismatch_rejected_with_diff(self, service):
        client, store, _ = service
        store.add_task("img_f", [])
        task = take_task(client)
        r = submit(client, task["task_id"], "alice", "scene-supported", [draw(0, 0.0)], [0, 3])
        assert r.status_code == 422
        detail = r.json()["detail"]
        assert detail["client_only"] == [3]
        assert detail["server_only"] == []

    def test_unknown_radius_rejected(self, service):
        client, store, _ = service
        store.add_task("img_g", [])
        task = take_task(client)
        r = submit(client, task["task_id"], "alice", "scene-supported", [draw(0, 0.25)], [0])
        assert r.status_code == 422

    def test_random_scripts_match_set_algebra_oracle(self, icosphere_template, icosphere_graph):
        cache = precompute_brush_cache(icosphere_graph, [0.0, 0.2, 0.4])
        dist = floyd_warshall(graph_to_dense(icosphere_graph))
        rng = np.random.default_rng(17)
        n = icosphere_template.num_vertices
        for _ in range(25):
            script = [
                (int(rng.integers(n)), float(rng.choice([0.0, 0.2, 0.4])),
                 "draw" if rng.random() < 0.6 else "erase")
                for _ in range(10)
            ]
            strokes = [Stroke(center=c, radius=r, mode=m) for c, r, m in script]
            assert replay_strokes(strokes, cache) == replay_strokes_reference(script, dist)


class TestReviewWorkflow:
    def finish_task(self, client, store, image_id, annotator="alice"):
        store.add_task(image_id, [])
        task = take_task(client, annotator)
        r = submit(client, task["task_id"], annotator, "scene-supported", [draw(0, 1.0)], [0, 1, 2, 3])
        assert r.status_code == 200
        return task["task_id"]

    def test_flag_reopens_task(self, service):
        client, store, _ = service
        task_id = self.finish_task(client, store, "img_h")
        r = client.post("/qa/review", json={"task_id": task_id, "verdict": "flag", "notes": "sloppy"})
        assert r.json()["task_state"] == "open"
        reopened = take_task(client, "bob")
        assert reopened["task_id"] == task_id
        assert reopened["notes"] == ["sloppy"]

    def test_ok_finalizes_and_exports(self, service):
        client, store, _ = service
        task_id = self.finish_task(client, store, "img_i")
        assert client.get("/export").json()["records"] == []
        r = client.post("/qa/review", json={"task_id": task_id, "verdict": "ok"})
        assert r.json()["task_state"] == "finalized"
        records = client.get("/export").json()["records"]
        assert len(records) == 1
        assert records[0]["image_id"] == "img_i"
        assert records[0]["scene_supported"] == [0, 1, 2, 3]

    def test_double_review_idempotent_and_conflicts(self, service):
        client, store, _ = service
        task_id = self.finish_task(client, store, "img_j")
        assert client.post("/qa/review", json={"task_id": task_id, "verdict": "ok"}).status_code == 200
        again = client.post("/qa/review", json={"task_id": task_id, "verdict": "ok"})
        assert again.status_code == 200 and again.json()["idempotent"] is True
        conflict = client.post("/qa/review", json={"task_id": task_id, "verdict": "flag"})
        assert conflict.status_code == 409

    def test_double_flag_idempotent(self, service):
        client, store, _ = service
        task_id = self.finish_task(client, store, "img_k")
        client.post("/qa/review", json={"task_id": task_id, "verdict": "flag"})
        again = client.post("/qa/review", json={"task_id": task_id, "verdict": "flag"})
        assert again.status_code == 200 and again.json()["idempotent"] is True
        conflict = client.post("/qa/review", json={"task_id": task_id, "verdict": "ok"})
        assert conflict.status_code == 409

    def test_review_open_task_rejected(self, service):
        client, store, _ = service
        task = store.add_task("img_l", [])
        r = client.post("/qa/review", json={"task_id": task.task_id, "verdict": "ok"})
        assert r.status_code == 409


class TestAgreement:
    def annotate(self, client, store, image_id, annotator, vertices):
        store.add_task(image_id, [])
        task = take_task(client, annotator)
        strokes = [draw(v, 0.0) for v in vertices]
        r = submit(client, task["task_id"], annotator, "scene-supported", strokes, sorted(vertices))
        assert r.status_code == 200

    def test_identical_submissions_unit_kappa_and_iou(self, service):
        client, store, _ = service
        self.annotate(client, store, "img_m", "alice", [0, 1])
        self.annotate(client, store, "img_m", "bob", [0, 1])
        out = client.get("/qa/agreement", params={"image_set": "img_m"}).json()
        entry = out["img_m"]
        assert entry["fleiss_kappa"] == 1.0
        assert entry["iou_matrix"] == [[1.0, 1.0], [1.0, 1.0]]

    def test_single_annotator_rejected(self, service):
        client, store, _ = service
        self.annotate(client, store, "img_n", "alice", [0])
        r = client.get("/qa/agreement", params={"image_set": "img_n"})
        assert r.status_code == 422

    def test_disagreement_kappa_below_one(self, service):
        client, store, _ = service
        self.annotate(client, store, "img_o", "alice", [0, 1])
        self.annotate(client, store, "img_o", "bob", [2, 3])
        entry = client.get("/qa/agreement", params={"image_set": "img_o"}).json()["img_o"]
        assert entry["fleiss_kappa"] < 0.0  # complementary halves: systematic disagreement
        assert entry["iou_matrix"][0][1] == 0.0


class TestQualification:
    def test_pass_and_gate(self, service):
        client, store, _ = service
        r = client.post(
            "/qualification",
            json={"annotator": "carol", "submissions": {"q1": [0, 1], "q2": [2]}},
        )
        assert r.json()["passed"] is True
        assert take_task(client, "carol") is None  # qualified: allowed through (empty queue)

    def test_fail_keeps_unqualified(self, service):
        client, store, _ = service
        r = client.post(
            "/qualification",
            json={"annotator": "dave", "submissions": {"q1": [3], "q2": [0]}},
        )
        assert r.json()["passed"] is False
        resp = client.get("/task/next", params={"annotator": "dave"})
        assert resp.status_code == 403


class TestEventLog:
    def test_log_written(self, tetra_mesh, tmp_path):
        graph = build_edge_graph(tetra_mesh)
        cache = precompute_brush_cache(graph, [0.0])
        store = AnnotationStore(log_path=tmp_path / "events.jsonl")
        store.qualify("alice")
        app = build_app(tetra_mesh, cache, store)
        client = TestClient(app)
        store.add_task("img_p", [])
        task = take_task(client)
        submit(client, task["task_id"], "alice", "scene-supported", [draw(0, 0.0)], [0])
        events = [json.loads(line) for line in (tmp_path / "events.jsonl").read_text().splitlines()]
        kinds = [e["event"] for e in events]
        assert kinds == ["qualified", "created", "assigned", "annotation", "submitted"]
