"""Training loop, experiment configuration, checkpointing, and evaluation.

Batches are assembled deterministically: the shuffle order of epoch e is a
pure function of (seed, e), so resuming from an epoch-boundary checkpoint
reproduces the exact losses of an uninterrupted run. Checkpoints carry the
flat parameter map, the Adam state, and the epoch counter.

Records without 3D contact labels contribute no contact-BCE term; their
gradient reaches the contact head only through the pixel-anchoring loss.
"""

import json
import pickle
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import contact_data, losses, metrics, synth
from .mesh import build_edge_graph, make_template
from .model import ContactNet, ModelConfig, save_checkpoint, load_checkpoint


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    weights: losses.LossWeights = field(default_factory=losses.LossWeights)
    optimizer: str = "adam"
    # tiny models escape the all-background basin only with an aggressive
    # step size; clip 1.0 or lr 1e-3 demonstrably stalls the desk model
    learning_rate: float = 1e-2
    batch_size: int = 4
    epochs: int = 300
    seed: int = 0
    checkpoint_every: int = 0  # epochs; 0 = final checkpoint only
    grad_clip_norm: float = 5.0
    splat_sigma: float = losses.DEFAULT_SPLAT_SIGMA
    train_split: str = "train"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def desk_profile(**overrides):
    """Tiny-model defaults that train in seconds on a CPU."""
    return _profile(TrainConfig(), overrides)


def paper_profile(**overrides):
    """Full-scale defaults: 256x256 input, Adam 5e-5, batch 4, 12 epochs."""
    base = TrainConfig(
        model=ModelConfig(image_size=(256, 256), encoder_channels=(32, 64, 128)),
        learning_rate=5e-5,
        batch_size=4,
        epochs=12,
    )
    return _profile(base, overrides)


def _profile(base, overrides):
    model_overrides = overrides.pop("model", None)
    weight_overrides = overrides.pop("weights", None)
    cfg = asdict(base)
    cfg.update(overrides)
    cfg["model"] = _model_config(
        {**asdict(base.model), **(model_overrides or {})}
    )
    cfg["weights"] = losses.LossWeights(**{**asdict(base.weights), **(weight_overrides or {})})
    return TrainConfig(**cfg)


def _model_config(d):
    d = dict(d)
    d["image_size"] = tuple(d["image_size"])
    d["encoder_channels"] = tuple(d["encoder_channels"])
    return ModelConfig(**d)


def config_to_json(config):
    return json.dumps(asdict(config), indent=2, sort_keys=True)


def config_from_json(text):
    d = json.loads(text)
    d["model"] = _model_config(d["model"])
    d["weights"] = losses.LossWeights(**d["weights"])
    return TrainConfig(**d)


def template_from_ref(ref):
    """Rebuild the template named by a dataset's template_ref
    ('kind:subdivisions:parts')."""
    kind, subdivisions, parts = ref.split(":")
    return make_template(kind=kind, num_parts=int(parts), subdivisions=int(subdivisions))


# ---------------------------------------------------------------------------
# data loading


@dataclass
class LoadedSample:
    image_id: str
    image: torch.Tensor  # (3, H, W)
    contact: torch.Tensor  # (N_V,) or None when the record has no 3D labels
    body_vertices: torch.Tensor
    camera: synth.Camera
    scene_mask: torch.Tensor
    part_mask: torch.Tensor
    contact_mask_2d: torch.Tensor


def load_training_samples(dataset_dir, split=None, dtype=torch.float32):
    """Load records + aux arrays of a synthetic dataset as torch tensors."""
    from PIL import Image

    root = Path(dataset_dir)
    dataset = contact_data.load_dataset(root)
    records = dataset.split_records(split) if split else list(dataset.records)
    samples = []
    for record in records:
        aux = synth.load_aux(root, record.image_id)
        img = np.asarray(Image.open(root / record.image_path), dtype=np.float64) / 255.0
        has_3d = bool(aux.get("has_contact_3d", True))
        contact = None
        if has_3d:
            contact = torch.tensor(
                contact_data.binarize(record, dataset.num_vertices), dtype=dtype
            )
        samples.append(
            LoadedSample(
                image_id=record.image_id,
                image=torch.tensor(img.transpose(2, 0, 1), dtype=dtype),
                contact=contact,
                body_vertices=torch.tensor(aux["body_vertices"], dtype=dtype),
                camera=synth.Camera(
                    scale=float(aux["camera_scale"]),
                    t=tuple(aux["camera_t"]),
                    image_size=tuple(aux["gt_scene_mask"].shape),
                ),
                scene_mask=torch.tensor(aux["gt_scene_mask"], dtype=torch.long),
                part_mask=torch.tensor(aux["gt_part_mask"], dtype=torch.long),
                contact_mask_2d=torch.tensor(aux["gt_contact_mask_2d"], dtype=dtype),
            )
        )
    return dataset, samples


def _epoch_order(seed, epoch, n):
    return np.random.default_rng((int(seed), int(epoch))).permutation(n)


def batch_loss(model, batch, config):
    """Loss components for one batch of LoadedSamples."""
    images = torch.stack([s.image for s in batch])
    out = model(images)
    labeled = [(i, s.contact) for i, s in enumerate(batch) if s.contact is not None]
    contact_term = None
    if labeled:
        idx = [i for i, _ in labeled]
        gt = torch.stack([c for _, c in labeled])
        contact_term = losses.contact_bce(out.contact[idx], gt)
    pal_terms = [
        losses.pal_loss(
            out.contact[i], s.body_vertices, s.camera, s.contact_mask_2d,
            sigma=config.splat_sigma,
        )
        for i, s in enumerate(batch)
    ]
    components = {
        "contact": contact_term,
        "pixel_anchor": torch.stack(pal_terms).mean(),
        "scene_seg": losses.segmentation_ce(
            out.scene_logits, torch.stack([s.scene_mask for s in batch])
        ),
        "part_seg": losses.segmentation_ce(
            out.part_logits, torch.stack([s.part_mask for s in batch])
        ),
    }
    return losses.total_loss(components, config.weights), components


def train(config, dataset_dir, out_dir, resume_from=None, log_fn=None):
    """Train a ContactNet on a synthetic dataset directory.

    Writes ``train_log.jsonl`` (one record per step), periodic checkpoints
    per ``checkpoint_every``, and ``checkpoint_final.pkl``. Returns the path
    of the final checkpoint.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, samples = load_training_samples(dataset_dir, split=config.train_split)
    if not samples:
        raise ValueError(f"no records in split {config.train_split!r}")

    model = ContactNet(config.model)
    if config.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    else:
        opt = torch.optim.SGD(model.parameters(), lr=config.learning_rate)
    start_epoch = 0
    if resume_from is not None:
        model, extra = load_checkpoint(resume_from)
        opt = _rebuild_optimizer(model, config, extra["optimizer_state"])
        start_epoch = int(extra["epoch"])

    (out / "train_config.json").write_text(config_to_json(config) + "\n")
    log_path = out / "train_log.jsonl"
    log = open(log_path, "a" if resume_from else "w")
    step = start_epoch * _steps_per_epoch(len(samples), config.batch_size)
    try:
        for epoch in range(start_epoch, config.epochs):
            order = _epoch_order(config.seed, epoch, len(samples))
            for lo in range(0, len(samples), config.batch_size):
                batch = [samples[i] for i in order[lo : lo + config.batch_size]]
                opt.zero_grad()
                total, components = batch_loss(model, batch, config)
                if not torch.isfinite(total):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch} step {step}: "
                        + json.dumps({k: _to_float(v) for k, v in components.items()})
                    )
                total.backward()
                if config.grad_clip_norm:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip_norm)
                opt.step()
                entry = {
                    "epoch": epoch,
                    "step": step,
                    "total": _to_float(total),
                    **{k: _to_float(v) for k, v in components.items()},
                }
                log.write(json.dumps(entry) + "\n")
                if log_fn:
                    log_fn(entry)
                step += 1
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                _save(model, opt, epoch + 1, out / f"checkpoint_epoch{epoch + 1:04d}.pkl")
    finally:
        log.close()
    final = out / "checkpoint_final.pkl"
    _save(model, opt, config.epochs, final)
    return final


def _steps_per_epoch(n, batch_size):
    return (n + batch_size - 1) // batch_size


def _to_float(v):
    return float(v.detach()) if torch.is_tensor(v) else (None if v is None else float(v))


def _save(model, opt, epoch, path):
    state = opt.state_dict()
    extra = {
        "epoch": epoch,
        "optimizer_state": pickle.dumps(_optimizer_state_arrays(state), protocol=4),
    }
    save_checkpoint(path, model, extra=extra)


def _optimizer_state_arrays(state):
    def convert(x):
        if torch.is_tensor(x):
            return x.detach().cpu().numpy()
        if isinstance(x, dict):
            return {k: convert(v) for k, v in x.items()}
        if isinstance(x, list):
            return [convert(v) for v in x]
        return x

    return convert(state)


def _rebuild_optimizer(model, config, state_blob):
    if config.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    else:
        opt = torch.optim.SGD(model.parameters(), lr=config.learning_rate)
    state = pickle.loads(state_blob)

    def convert(x):
        if isinstance(x, np.ndarray):
            return torch.tensor(x)
        if isinstance(x, dict):
            return {k: convert(v) for k, v in x.items()}
        if isinstance(x, list):
            return [convert(v) for v in x]
        return x

    opt.load_state_dict(convert(state))
    return opt


# ---------------------------------------------------------------------------
# evaluation and inference


def predict_dataset(model, dataset_dir, split=None):
    """Per-record (pred, gt) probability/label vectors for a dataset split."""
    _, samples = load_training_samples(dataset_dir, split=split)
    preds, gts, ids = [], [], []
    model.eval()
    with torch.no_grad():
        for s in samples:
            out = model(s.image[None])
            preds.append(out.contact[0].numpy())
            gts.append(None if s.contact is None else s.contact.numpy())
            ids.append(s.image_id)
    return ids, preds, gts


def evaluate_checkpoint(checkpoint_path, dataset_dir, split=None, threshold=0.5,
                        with_geodesic=True, with_parts=True):
    """MetricsReport for a checkpoint over a dataset split."""
    model, _ = load_checkpoint(checkpoint_path)
    dataset = contact_data.load_dataset(dataset_dir)
    if dataset.num_vertices != model.config.num_vertices:
        raise ValueError(
            f"checkpoint predicts {model.config.num_vertices} vertices but the "
            f"dataset template has {dataset.num_vertices}"
        )
    template = template_from_ref(dataset.template_ref)
    _, preds, gts = predict_dataset(model, dataset_dir, split=split)
    pairs = [(p, g) for p, g in zip(preds, gts) if g is not None]
    if not pairs:
        raise ValueError("no records with 3D labels to evaluate")
    graph = build_edge_graph(template) if with_geodesic else None
    report = metrics.evaluate_records(
        [p for p, _ in pairs],
        [g for _, g in pairs],
        graph=graph,
        part_labels=template.part_labels if with_parts else None,
        num_parts=template.num_parts if with_parts else 0,
        threshold=threshold,
    )
    report.metadata["checkpoint"] = str(checkpoint_path)
    report.metadata["split"] = split
    return report


def infer_image(model, image_path, dtype=torch.float32):
    """Contact probabilities for a single image file."""
    from PIL import Image

    img = np.asarray(Image.open(image_path).convert("RGB"), dtype=np.float64) / 255.0
    x = torch.tensor(img.transpose(2, 0, 1), dtype=dtype)
    model.eval()
    with torch.no_grad():
        out = model(x[None])
    return out.contact[0].numpy()
