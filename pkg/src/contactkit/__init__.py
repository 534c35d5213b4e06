"""Dense vertex-level human-scene contact estimation toolkit.

Subpackages:
  mesh          template meshes, edge-graph geodesics, brush neighborhoods
  contact_data  annotation records, dataset serialization, statistics
  synth         synthetic scenes with exact geometric contact ground truth
  model         dual-branch cross-attention contact network (torch)
  losses        contact/segmentation losses and the pixel-anchoring renderer
  metrics       evaluation metrics and annotation quality control
  train         training loop, checkpoints, evaluation drivers
  service       HTTP backend for the vertex-painting annotation workflow
  cli           command-line entry points (generate/train/eval/infer/stats/annotate-serve)
"""

from .mesh import (
    TemplateMesh,
    EdgeGraph,
    BrushCache,
    build_edge_graph,
    geodesic_distances,
    geodesic_neighborhood,
    precompute_brush_cache,
    load_template,
    make_template,
)
from .contact_data import ContactRecord, ContactDataset, binarize, load_dataset, save_dataset
from .synth import Camera, PosedBody, SceneGeometry, SynthConfig, generate_sample, geometric_contact
from .metrics import (
    MetricsReport,
    precision_recall_f1,
    geodesic_error_cm,
    iou,
    fleiss_kappa,
    qualification_gate,
)

__version__ = "0.1.0"

__all__ = [
    "TemplateMesh", "EdgeGraph", "BrushCache", "build_edge_graph",
    "geodesic_distances", "geodesic_neighborhood", "precompute_brush_cache",
    "load_template", "make_template",
    "ContactRecord", "ContactDataset", "binarize", "load_dataset", "save_dataset",
    "Camera", "PosedBody", "SceneGeometry", "SynthConfig", "generate_sample",
    "geometric_contact",
    "MetricsReport", "precision_recall_f1", "geodesic_error_cm", "iou",
    "fleiss_kappa", "qualification_gate",
    "__version__",
]
