"""Contact evaluation metrics and annotation quality-control statistics.

Conventions (also recorded in every report's metadata):
  * probabilities are binarized with an inclusive threshold (>= is positive);
  * precision/recall are vacuously 1.0 when their denominator is empty, so
    pred == gt == empty scores P = R = F1 = 1;
  * geodesic error is one-sided: mean shortest-path distance from false
    positives to the nearest ground-truth contact vertex, reported in cm;
    0 when there are no false positives, undefined (None) when gt is empty.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .mesh import geodesic_distances

DEFAULT_THRESHOLD = 0.5


def binarize_pred(pred, threshold=DEFAULT_THRESHOLD):
    return np.asarray(pred, dtype=np.float64) >= threshold


def precision_recall_f1(pred, gt, threshold=DEFAULT_THRESHOLD):
    """(P, R, F1) after thresholding ``pred``; see module conventions."""
    p = binarize_pred(pred, threshold)
    g = np.asarray(gt, dtype=np.float64) >= 0.5
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    tp = np.sum(p & g)
    fp = np.sum(p & ~g)
    fn = np.sum(~p & g)
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return float(precision), float(recall), float(f1)


def geodesic_error_cm(pred, gt, graph, threshold=DEFAULT_THRESHOLD):
    """Mean geodesic distance (cm) from false-positive vertices to the
    nearest ground-truth contact vertex; 0 with no false positives, None
    when gt is empty."""
    p = binarize_pred(pred, threshold)
    g = np.asarray(gt, dtype=np.float64) >= 0.5
    gt_ids = np.flatnonzero(g)
    if gt_ids.size == 0:
        return None
    fp_ids = np.flatnonzero(p & ~g)
    if fp_ids.size == 0:
        return 0.0
    d = geodesic_distances(graph, gt_ids)
    return float(np.mean(d[fp_ids]) * 100.0)


def iou(a, b):
    """Intersection over union of two vertex-id sets; 1.0 when both empty."""
    sa = set(np.asarray(a, dtype=np.int64).tolist())
    sb = set(np.asarray(b, dtype=np.int64).tolist())
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def fleiss_kappa(ratings):
    """Chance-corrected multi-rater agreement from an items x categories
    count matrix with a constant number of raters per item.

    Returns (mean_agreement - chance) / (1 - chance); 1.0 by convention in
    the degenerate case where every rating lands in a single category.
    """
    m = np.asarray(ratings, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError("ratings must be a non-empty items x categories matrix")
    n_raters = m[0].sum()
    if n_raters < 2:
        raise ValueError("need at least 2 raters per item")
    if not np.allclose(m.sum(axis=1), n_raters):
        raise ValueError("every item must have the same number of ratings")
    p_item = ((m * m).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = p_item.mean()
    p_cat = m.sum(axis=0) / m.sum()
    p_e = float((p_cat * p_cat).sum())
    if p_e >= 1.0:
        return 1.0
    return float((p_bar - p_e) / (1.0 - p_e))


def qualification_gate(annotator_ious, threshold=0.5):
    """Pass/fail for an annotation candidate: mean IoU >= threshold (inclusive)."""
    ious = list(annotator_ious)
    if not ious:
        raise ValueError("need at least one IoU score")
    return bool(np.mean(ious) >= threshold)


@dataclass
class MetricsReport:
    """Aggregated evaluation result over a record set.

    Per-sample metrics are macro-averaged; geodesic error averages the
    records where it is defined (None if none are).
    """

    precision: float
    recall: float
    f1: float
    geodesic_error_cm: float
    sample_count: int
    per_part: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _mean_defined(values):
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def evaluate_records(preds, gts, graph=None, part_labels=None, num_parts=0,
                     threshold=DEFAULT_THRESHOLD):
    """MetricsReport over aligned lists of predicted and ground-truth vectors.

    ``graph`` enables the geodesic error; ``part_labels``/``num_parts`` add a
    per-part breakdown (metrics restricted to each part's vertex set).
    """
    if len(preds) != len(gts) or not preds:
        raise ValueError("need equally many predictions and ground truths (>= 1)")
    rows = [precision_recall_f1(p, g, threshold) for p, g in zip(preds, gts)]
    geo = None
    if graph is not None:
        geo = _mean_defined([geodesic_error_cm(p, g, graph, threshold) for p, g in zip(preds, gts)])
    per_part = {}
    if part_labels is not None and num_parts:
        part_labels = np.asarray(part_labels)
        for part in range(num_parts):
            ids = np.flatnonzero(part_labels == part)
            sub_rows = [
                precision_recall_f1(np.asarray(p)[ids], np.asarray(g)[ids], threshold)
                for p, g in zip(preds, gts)
            ]
            entry = {
                "precision": float(np.mean([r[0] for r in sub_rows])),
                "recall": float(np.mean([r[1] for r in sub_rows])),
                "f1": float(np.mean([r[2] for r in sub_rows])),
            }
            if graph is not None:
                entry["geodesic_error_cm"] = _mean_defined(
                    [_part_geodesic(p, g, ids, graph, threshold) for p, g in zip(preds, gts)]
                )
            per_part[f"part_{part:02d}"] = entry
    return MetricsReport(
        precision=float(np.mean([r[0] for r in rows])),
        recall=float(np.mean([r[1] for r in rows])),
        f1=float(np.mean([r[2] for r in rows])),
        geodesic_error_cm=geo,
        sample_count=len(preds),
        per_part=per_part,
        metadata={
            "threshold": threshold,
            "threshold_rule": ">= is positive",
            "empty_sets": "P=R=F1=1 when pred and gt are both empty",
            "geodesic_direction": "one-sided: false positives to nearest gt vertex",
            "averaging": "macro over records",
        },
    )


def _part_geodesic(pred, gt, part_ids, graph, threshold):
    """Geodesic error for one part: FPs inside the part vs gt inside the part."""
    p = binarize_pred(np.asarray(pred), threshold)
    g = np.asarray(gt, dtype=np.float64) >= 0.5
    part_mask = np.zeros(len(p), dtype=bool)
    part_mask[part_ids] = True
    gt_ids = np.flatnonzero(g & part_mask)
    if gt_ids.size == 0:
        return None
    fp_ids = np.flatnonzero(p & ~g & part_mask)
    if fp_ids.size == 0:
        return 0.0
    d = geodesic_distances(graph, gt_ids)
    return float(np.mean(d[fp_ids]) * 100.0)


def frequency_baseline(train_vectors, threshold=DEFAULT_THRESHOLD):
    """Constant predictor: per-vertex training contact frequency, thresholded.

    Returns the binary vector predicted for every test sample.
    """
    stack = np.stack([np.asarray(v, dtype=np.float64) for v in train_vectors])
    return (stack.mean(axis=0) >= threshold).astype(np.float64)
