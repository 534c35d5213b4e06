"""Command-line entry points.

Verbs: generate (synthetic dataset), train, eval, infer, stats, and
annotate-serve (run the annotation backend). Configs are JSON files; logs
are line-delimited JSON; colored meshes are exported as PLY.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _cmd_generate(args):
    from . import synth

    config = synth.SynthConfig()
    if args.config:
        config = synth.config_from_json(json.loads(Path(args.config).read_text()))
    splits = None
    if args.splits:
        splits, offset = {}, 0
        for chunk in args.splits.split(","):
            name, count = chunk.split("=")
            ids = [f"synth_{args.seed + offset + k:06d}" for k in range(int(count))]
            splits[name] = ids
            offset += int(count)
        total = sum(len(v) for v in splits.values())
        if total != args.count:
            raise SystemExit(f"--splits assigns {total} records but --count is {args.count}")
    dataset = synth.write_synthetic_dataset(
        config, args.count, args.out, seed=args.seed, splits=splits
    )
    print(f"wrote {len(dataset.records)} records to {args.out}")


def _cmd_train(args):
    from . import train as train_mod

    if args.profile == "paper":
        config = train_mod.paper_profile()
    else:
        config = train_mod.desk_profile()
    if args.config:
        config = train_mod.config_from_json(Path(args.config).read_text())
    overrides = {}
    for name in ("epochs", "batch_size", "seed", "checkpoint_every"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.learning_rate is not None:
        overrides["learning_rate"] = args.learning_rate
    if overrides:
        config = train_mod._profile(config, overrides)
    final = train_mod.train(
        config, args.dataset, args.out, resume_from=args.resume,
        log_fn=(lambda e: print(json.dumps(e))) if args.verbose else None,
    )
    print(f"final checkpoint: {final}")


def _cmd_eval(args):
    from . import train as train_mod

    report = train_mod.evaluate_checkpoint(
        args.checkpoint, args.dataset, split=args.split, threshold=args.threshold
    )
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"report written to {args.out}")
    print(
        f"precision={report.precision:.4f} recall={report.recall:.4f} "
        f"f1={report.f1:.4f} geodesic_error_cm={report.geodesic_error_cm}"
    )


def _cmd_infer(args):
    from . import train as train_mod
    from .mesh import save_ply
    from .model import load_checkpoint

    model, _ = load_checkpoint(args.checkpoint)
    probs = train_mod.infer_image(model, args.image)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "contact_probabilities.json").write_text(
        json.dumps({"image": str(args.image), "contact": probs.tolist()}) + "\n"
    )
    template = train_mod.template_from_ref(args.template_ref) if args.template_ref else None
    if template is not None:
        save_ply(template, out / "contact_mesh.ply", vertex_colors=probs)
    print(f"wrote contact vector ({probs.shape[0]} vertices) to {out}")


def _cmd_stats(args):
    from . import contact_data, train as train_mod
    from .mesh import save_ply

    dataset = contact_data.load_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hist = contact_data.object_label_histogram(dataset)
    (out / "object_histogram.json").write_text(json.dumps(hist, indent=2, sort_keys=True) + "\n")
    template = train_mod.template_from_ref(dataset.template_ref)
    parts = contact_data.part_contact_histogram(dataset, template, min_vertices=args.min_vertices)
    (out / "part_histogram.json").write_text(
        json.dumps({f"part_{k:02d}": int(v) for k, v in enumerate(parts)}, indent=2) + "\n"
    )
    if dataset.records:
        probs = contact_data.aggregate_contact_probability(dataset)
    else:
        probs = np.zeros(dataset.num_vertices)
    save_ply(template, out / "contact_probability_mesh.ply", vertex_colors=probs)
    print(f"stats written to {out}")


def _cmd_annotate_serve(args):
    import uvicorn

    from . import contact_data, train as train_mod
    from .mesh import build_edge_graph, precompute_brush_cache
    from .service import AnnotationStore, build_app

    template = train_mod.template_from_ref(args.template_ref)
    radii = [float(r) for r in args.radii.split(",")]
    cache = precompute_brush_cache(build_edge_graph(template), radii)
    store = AnnotationStore(log_path=args.log)
    for annotator in (args.qualify or "").split(","):
        if annotator:
            store.qualify(annotator)
    vocabulary = contact_data.DEFAULT_VOCABULARY
    if args.tasks:
        dataset = contact_data.load_dataset(args.tasks)
        vocabulary = dataset.vocabulary
        for record in dataset.records:
            store.add_task(record.image_id, sorted(set(record.labels())))
    app = build_app(template, cache, store, vocabulary=vocabulary, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="contactkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic contact dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="SynthConfig JSON file")
    p.add_argument("--splits", help="e.g. train=15,val=5 (consumes records in order)")
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("train", help="train a contact model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="TrainConfig JSON file")
    p.add_argument("--profile", choices=["desk", "paper"], default="desk")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="write the MetricsReport JSON here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("infer", help="contact probabilities for one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--template-ref", dest="template_ref",
                   help="template to export a contact-colored PLY (kind:subdiv:parts)")
    p.set_defaults(fn=_cmd_infer)

    p = sub.add_parser("stats", help="dataset histograms and contact-probability mesh")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-vertices", dest="min_vertices", type=int, default=10)
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("annotate-serve", help="run the annotation backend")
    p.add_argument("--template-ref", dest="template_ref", default="icosphere:3:24")
    p.add_argument("--radii", default="0.0,0.05,0.1,0.2")
    p.add_argument("--tasks", help="dataset directory to enqueue as tasks")
    p.add_argument("--qualify", help="comma-separated annotator ids to pre-qualify")
    p.add_argument("--log", help="append-only event log path")
    p.add_argument("--frontend", help="static directory with the browser UI build")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8009)
    p.set_defaults(fn=_cmd_annotate_serve)

    args = parser.parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
