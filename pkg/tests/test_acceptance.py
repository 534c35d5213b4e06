"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; the slow training criteria dominate the runtime (several minutes on
a laptop-class CPU).
"""

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
import torch

from contactkit import losses, metrics, synth, train
from contactkit.mesh import TemplateMesh, build_edge_graph, geodesic_distances, precompute_brush_cache
from contactkit.model import ContactNet, CrossAttentionFusion, ModelConfig, count_parameters, load_checkpoint
from contactkit.service import Stroke, replay_strokes

from conftest import path_graph
from oracles import (
    brute_force_contact,
    cross_attention_reference,
    floyd_warshall,
    graph_to_dense,
    random_closed_mesh,
    replay_strokes_reference,
)


@contextmanager
def criterion(name):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL ({time.perf_counter() - start:.1f}s)")
        raise
    print(f"ACCEPTANCE {name}: PASS ({time.perf_counter() - start:.1f}s)")


# ---------------------------------------------------------------------------
# cross-attention correctness


def test_cross_attention_correctness():
    with criterion("cross-attention vs scripted formulas"):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        for _ in range(100):
            t = int(rng.integers(1, 9))
            c = int(rng.integers(1, 9))
            fusion = CrossAttentionFusion(channels=c).double()
            f_s = rng.normal(size=(t, c)) * rng.uniform(0.5, 3.0)
            f_p = rng.normal(size=(t, c)) * rng.uniform(0.5, 3.0)
            fused, attn_ps, attn_sp = fusion.fuse_tokens(
                torch.tensor(f_s)[None], torch.tensor(f_p)[None]
            )
            ref_fused, ref_ps, ref_sp = cross_attention_reference(f_s, f_p, c_t=c)
            assert np.abs(fused[0].detach().numpy() - ref_fused).max() < 1e-6
            assert np.abs(attn_ps[0, 0].detach().numpy() - ref_ps).max() < 1e-6
            assert np.abs(attn_sp[0, 0].detach().numpy() - ref_sp).max() < 1e-6
            for attn in (attn_ps, attn_sp):
                row_sums = attn.sum(dim=-1).detach().numpy()
                assert np.abs(row_sums - 1.0).max() < 1e-6
                assert attn.min() >= 0
        assert time.perf_counter() - start < 10.0


# ---------------------------------------------------------------------------
# gradient fidelity


def _gradient_fixture():
    config = ModelConfig(
        image_size=(32, 32), encoder_channels=(2,), num_vertices=50, num_parts=2,
        num_scene_channels=2, head_hidden=4, seed=3,
    )
    model = ContactNet(config).double()
    assert count_parameters(model) <= 1000
    rng = np.random.default_rng(0)
    image = torch.tensor(rng.uniform(0, 1, size=(1, 3, 32, 32)))
    body = rng.uniform(-0.8, 0.8, size=(50, 3))
    camera = synth.Camera(scale=0.9, t=(0.0, 0.0), image_size=(32, 32))
    gt_contact = torch.tensor((rng.random(50) < 0.2).astype(np.float64))[None]
    scene_mask = torch.tensor(rng.integers(0, 2, size=(1, 32, 32)))
    part_mask = torch.tensor(rng.integers(0, 3, size=(1, 32, 32)))
    mask2d = np.zeros((32, 32))
    mask2d[8:20, 10:22] = 1.0
    weights = losses.LossWeights()

    def objective():
        out = model(image)
        components = {
            "contact": losses.contact_bce(out.contact, gt_contact),
            "pixel_anchor": losses.pal_loss(out.contact[0], body, camera, mask2d),
            "scene_seg": losses.segmentation_ce(out.scene_logits, scene_mask),
            "part_seg": losses.segmentation_ce(out.part_logits, part_mask),
        }
        return losses.total_loss(components, weights)

    return model, objective


def test_gradient_fidelity_end_to_end():
    with criterion("end-to-end gradient vs finite differences"):
        start = time.perf_counter()
        model, objective = _gradient_fixture()
        model.zero_grad()
        objective().backward()
        grads = {n: p.grad.clone() for n, p in model.named_parameters()}

        rng = np.random.default_rng(1)
        eps = 1e-6
        checked = 0
        names = sorted(grads)
        while checked < 20:
            name = names[int(rng.integers(len(names)))]
            p = dict(model.named_parameters())[name]
            flat_idx = int(rng.integers(p.numel()))
            g = float(grads[name].reshape(-1)[flat_idx])
            if abs(g) < 1e-6:  # relative error is meaningless at a zero of the gradient
                continue
            with torch.no_grad():
                p.reshape(-1)[flat_idx] += eps
            hi = float(objective())
            with torch.no_grad():
                p.reshape(-1)[flat_idx] -= 2 * eps
            lo = float(objective())
            with torch.no_grad():
                p.reshape(-1)[flat_idx] += eps
            fd = (hi - lo) / (2 * eps)
            rel = abs(fd - g) / max(abs(fd), abs(g))
            assert rel < 1e-4, f"{name}[{flat_idx}]: fd={fd} autograd={g} rel={rel}"
            checked += 1
        assert time.perf_counter() - start < 300.0


def test_gradient_fidelity_pal_only():
    with criterion("PAL gradient w.r.t. contact probabilities"):
        rng = np.random.default_rng(2)
        body = rng.uniform(-0.8, 0.8, size=(50, 3))
        camera = synth.Camera(scale=0.9, t=(0.0, 0.0), image_size=(32, 32))
        mask2d = np.zeros((32, 32))
        mask2d[6:18, 6:18] = 1.0
        pred = torch.tensor(rng.uniform(0.1, 0.9, size=50), requires_grad=True)
        losses.pal_loss(pred, body, camera, mask2d).backward()
        eps = 1e-6
        for i in range(0, 50, 5):
            hi_v = pred.detach().clone()
            hi_v[i] += eps
            lo_v = pred.detach().clone()
            lo_v[i] -= eps
            hi = float(losses.pal_loss(hi_v, body, camera, mask2d))
            lo = float(losses.pal_loss(lo_v, body, camera, mask2d))
            fd = (hi - lo) / (2 * eps)
            g = float(pred.grad[i])
            rel = abs(fd - g) / max(abs(fd), abs(g), 1e-12)
            assert rel < 1e-3, f"vertex {i}: fd={fd} autograd={g} rel={rel}"


# ---------------------------------------------------------------------------
# geodesic oracle


def test_geodesic_oracle():
    with criterion("geodesics vs Floyd-Warshall + 200 cm fixture"):
        start = time.perf_counter()
        rng = np.random.default_rng(7)
        for trial in range(20):
            v, t = random_closed_mesh(rng, int(rng.integers(10, 200)))
            assert len(v) <= 200
            mesh = TemplateMesh(vertices=v, triangles=t, part_labels=np.zeros(len(v)), num_parts=1)
            graph = build_edge_graph(mesh)
            oracle = floyd_warshall(graph_to_dense(graph))
            src = int(rng.integers(len(v)))
            d = geodesic_distances(graph, [src])
            assert np.max(np.abs(d - oracle[src])) <= 1e-9
        chain = path_graph(3, length=1.0)
        err = metrics.geodesic_error_cm(
            np.array([1.0, 0, 0]), np.array([0, 0, 1.0]), chain
        )
        assert np.isclose(err, 200.0)
        assert time.perf_counter() - start < 60.0


# ---------------------------------------------------------------------------
# metric fixtures


def test_metric_fixtures():
    with criterion("metric fixtures (F1, IoU, kappa, loss arithmetic)"):
        start = time.perf_counter()
        pred = np.zeros(5)
        pred[[1, 2]] = 1
        gt = np.zeros(5)
        gt[[2, 3]] = 1
        assert metrics.precision_recall_f1(pred, gt) == (0.5, 0.5, 0.5)
        assert np.isclose(metrics.iou([1, 2], [2, 3]), 1 / 3)
        assert metrics.fleiss_kappa([[2, 0], [0, 2]]) == 1.0
        assert metrics.fleiss_kappa([[1, 1], [1, 1]]) == -1.0
        total = losses.total_loss(
            {"contact": 1.0, "pixel_anchor": 1.0, "scene_seg": 1.0, "part_seg": 1.0},
            losses.LossWeights(),
        )
        assert abs(float(total) - 12.05) < 1e-9
        assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------------------
# geometric baseline


def test_geometric_baseline():
    with criterion("geometric contact vs brute-force oracle"):
        rng = np.random.default_rng(13)
        for trial in range(20):
            n_boxes = int(rng.integers(1, 3))
            meshes, labels = [], []
            for _ in range(n_boxes):
                center = rng.uniform(-0.5, 0.5, size=3)
                size = rng.uniform(0.2, 0.6, size=3)
                meshes.append(synth.box_mesh(center, size))
                labels.append("box")
            scene = synth.SceneGeometry(meshes=tuple(meshes), labels=tuple(labels))
            body = synth.PosedBody(vertices=rng.uniform(-1, 1, size=(40, 3)))
            threshold = float(rng.uniform(0.02, 0.2))
            ours = synth.geometric_contact(body, scene, threshold)
            oracle = brute_force_contact(body.vertices, scene.meshes, threshold)
            assert np.array_equal(ours, oracle), f"trial {trial} disagrees with oracle"
            tighter = synth.geometric_contact(body, scene, threshold / 2)
            looser = synth.geometric_contact(body, scene, threshold * 2)
            assert np.all(tighter <= ours) and np.all(ours <= looser)


# ---------------------------------------------------------------------------
# training proxies (the slow criteria; several minutes of CPU)


OVERFIT_SYNTH = synth.SynthConfig(template_subdivisions=2)  # 162-vertex template
OVERFIT_MODEL = {
    "num_vertices": 162,
    "num_scene_channels": len(OVERFIT_SYNTH.vocabulary) + 1,
    "num_parts": 24,
}


@pytest.fixture(scope="module")
def overfit_runs(tmp_path_factory):
    """20-sample overfit dataset (5 records carry only 2D masks) trained
    twice: PAL weight 0.05 vs 0."""
    root = tmp_path_factory.mktemp("overfit")
    synth.write_synthetic_dataset(OVERFIT_SYNTH, 20, root / "ds", seed=0, without_3d_every=4)
    runs = {}
    for name, overrides in (("pal_on", {}), ("pal_off", {"weights": {"pixel_anchor": 0.0}})):
        config = train.desk_profile(model=OVERFIT_MODEL, epochs=300, **overrides)
        start = time.perf_counter()
        final = train.train(config, root / "ds", root / name)
        runs[name] = {"checkpoint": final, "seconds": time.perf_counter() - start}
    runs["dataset"] = root / "ds"
    return runs


def _mean_pal_bce(checkpoint, dataset_dir):
    model, _ = load_checkpoint(checkpoint)
    _, samples = train.load_training_samples(dataset_dir, split="train")
    values = []
    with torch.no_grad():
        for s in samples:
            out = model(s.image[None])
            values.append(
                float(losses.pal_loss(out.contact[0], s.body_vertices, s.camera, s.contact_mask_2d))
            )
    return float(np.mean(values))


def test_overfit_proxy(overfit_runs):
    with criterion("overfit: train F1 >= 0.95 within 500 epochs / 30 min"):
        assert overfit_runs["pal_on"]["seconds"] < 1800.0
        report = train.evaluate_checkpoint(
            overfit_runs["pal_on"]["checkpoint"], overfit_runs["dataset"], split="train",
            with_geodesic=False, with_parts=False,
        )
        assert report.f1 >= 0.95, f"train F1 {report.f1:.3f} below 0.95"


def test_overfit_pal_ablation(overfit_runs):
    with criterion("PAL ablation: rendered-map BCE margin > 10%"):
        bce_on = _mean_pal_bce(overfit_runs["pal_on"]["checkpoint"], overfit_runs["dataset"])
        bce_off = _mean_pal_bce(overfit_runs["pal_off"]["checkpoint"], overfit_runs["dataset"])
        margin = abs(bce_off - bce_on) / bce_on
        assert margin > 0.10, f"rendered-map BCE margin {margin:.3f} (on={bce_on}, off={bce_off})"


GENERALIZATION_SYNTH = synth.SynthConfig(
    template_subdivisions=2,
    contact_threshold=0.045,
    ground_contact_prob=0.8,
    body_squash_range=(1.0, 1.0),
    platform_prob=0.0,
    decor_prob=0.0,
    num_tilt_bins=6,
    camera_jitter=0.02,
    camera_scale_range=(0.8, 0.9),
)


def test_generalization_proxy(tmp_path):
    with criterion("generalization: beats frequency baseline by >= 0.10 F1"):
        n_train, n_test = 150, 50
        ids = [f"synth_{k:06d}" for k in range(n_train + n_test)]
        splits = {"train": ids[:n_train], "test": ids[n_train:]}
        synth.write_synthetic_dataset(
            GENERALIZATION_SYNTH, n_train + n_test, tmp_path / "ds", seed=0, splits=splits
        )
        config = train.desk_profile(model=OVERFIT_MODEL, epochs=150)
        final = train.train(config, tmp_path / "ds", tmp_path / "run")
        report = train.evaluate_checkpoint(
            final, tmp_path / "ds", split="test", with_geodesic=False, with_parts=False
        )
        _, train_samples = train.load_training_samples(tmp_path / "ds", split="train")
        _, test_samples = train.load_training_samples(tmp_path / "ds", split="test")
        baseline_vec = metrics.frequency_baseline([s.contact.numpy() for s in train_samples])
        baseline_f1 = float(np.mean(
            [metrics.precision_recall_f1(baseline_vec, s.contact.numpy())[2] for s in test_samples]
        ))
        margin = report.f1 - baseline_f1
        assert margin >= 0.10, (
            f"test F1 {report.f1:.3f} vs baseline {baseline_f1:.3f} (margin {margin:.3f})"
        )


# ---------------------------------------------------------------------------
# stroke replay


def test_stroke_replay():
    with criterion("1000 stroke scripts: server replay vs reference"):
        from contactkit.mesh import make_template

        template = make_template("icosphere", num_parts=24, subdivisions=1)  # 42 vertices
        graph = build_edge_graph(template)
        radii = [0.0, 0.3, 0.6]
        cache = precompute_brush_cache(graph, radii)
        dist = floyd_warshall(graph_to_dense(graph))
        rng = np.random.default_rng(99)
        n = template.num_vertices
        for _ in range(1000):
            script = [
                (int(rng.integers(n)), radii[int(rng.integers(len(radii)))],
                 "draw" if rng.random() < 0.6 else "erase")
                for _ in range(int(rng.integers(1, 12)))
            ]
            strokes = [Stroke(center=c, radius=r, mode=m) for c, r, m in script]
            server_set = replay_strokes(strokes, cache)
            reference_set = replay_strokes_reference(script, dist)
            assert server_set == reference_set
            # draw + erase of the same brush leaves nothing of that stroke
            c, r = script[0][0], script[0][1]
            inverse = [
                Stroke(center=c, radius=r, mode="draw"),
                Stroke(center=c, radius=r, mode="erase"),
            ]
            assert replay_strokes(inverse, cache) == []
            after = replay_strokes(strokes + inverse, cache)
            brush = set(cache.neighborhood(r, c).tolist())
            assert after == sorted(set(server_set) - brush)
