"""Training losses: 3D contact BCE, segmentation CE, and the pixel-anchoring
loss that renders per-vertex contact into the image through a differentiable
Gaussian splat under a weak-perspective camera.

The renderer aggregates splats with a soft-or (1 - prod(1 - k_i * v_i)), so
the map stays in [0, 1] and has closed-form gradients to the vertex values.
Probabilities are clamped at 1e-7 before any log.
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

PROB_EPS = 1e-7
DEFAULT_SPLAT_SIGMA = 1.5  # pixels


@dataclass(frozen=True)
class LossWeights:
    """Steering weights of the four-term objective."""

    contact: float = 10.0
    pixel_anchor: float = 0.05
    scene_seg: float = 1.0
    part_seg: float = 1.0

    def __post_init__(self):
        for name, w in self.as_dict().items():
            if not (w >= 0 and w == w and w != float("inf")):
                raise ValueError(f"weight {name} must be finite and >= 0")

    def as_dict(self):
        return {
            "contact": self.contact,
            "pixel_anchor": self.pixel_anchor,
            "scene_seg": self.scene_seg,
            "part_seg": self.part_seg,
        }


def contact_bce(pred, gt):
    """Mean binary cross-entropy between per-vertex predictions and labels."""
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    p = pred.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -(gt * torch.log(p) + (1.0 - gt) * torch.log1p(-p)).mean()


def segmentation_ce(logits, label_map):
    """Mean per-pixel multi-class cross-entropy (softmax over channel dim).

    logits: (K, H, W) or (B, K, H, W); label_map: matching (H, W) or (B, H, W)
    integer labels in [0, K).
    """
    if logits.dim() == 3:
        logits = logits[None]
        label_map = label_map[None]
    k = logits.shape[1]
    if int(label_map.max()) >= k or int(label_map.min()) < 0:
        raise ValueError(f"label map contains labels outside [0, {k})")
    return F.cross_entropy(logits, label_map.long())


def project_weak_perspective(vertices, camera):
    """Differentiable weak-perspective projection to pixel coordinates.

    u = s*x + t_x, v = s*y + t_y in normalized [-1, 1] coordinates, then an
    affine map to pixels with y down; depth z passes through for visibility.
    """
    v = vertices if torch.is_tensor(vertices) else torch.tensor(
        np.asarray(vertices), dtype=torch.float64
    )
    h, w = camera.image_size
    u = camera.scale * v[:, 0] + camera.t[0]
    vv = camera.scale * v[:, 1] + camera.t[1]
    px = (u + 1.0) * 0.5 * (w - 1)
    py = (1.0 - vv) * 0.5 * (h - 1)
    return torch.stack([px, py], dim=1), v[:, 2]


SPLAT_SUPPORT_SIGMAS = 8.0  # kernel truncation radius; exp(-32) ~ 1e-14


def splat_render(points2d, values, image_size, sigma=DEFAULT_SPLAT_SIGMA, chunk=4096):
    """Render per-vertex scalars into an (H, W) map of Gaussian splats.

    Soft-or aggregation: map = 1 - prod_i (1 - exp(-d_i^2 / (2 sigma^2)) * v_i).
    Differentiable w.r.t. both ``values`` and ``points2d``; points outside the
    image contribute only through their kernel tails. Each splat is evaluated
    on a window of +-8 sigma around its pixel; the window position is a
    constant of the graph, so gradients are unaffected by the truncation.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    h, w = image_size
    dtype = values.dtype if torch.is_tensor(values) else torch.float64
    pts = points2d if torch.is_tensor(points2d) else torch.tensor(np.asarray(points2d), dtype=dtype)
    vals = values if torch.is_tensor(values) else torch.tensor(np.asarray(values), dtype=dtype)
    radius = int(np.ceil(SPLAT_SUPPORT_SIGMAS * sigma))
    if 2 * radius + 1 >= max(h, w):
        return _splat_full(pts, vals, h, w, sigma)
    off = torch.arange(-radius, radius + 1)
    oy, ox = torch.meshgrid(off, off, indexing="ij")
    log_miss = torch.zeros(h * w, dtype=pts.dtype)
    for start in range(0, len(pts), chunk):
        p = pts[start : start + chunk]
        v = vals[start : start + chunk].clamp(0.0, 1.0)
        cx = p[:, 0].detach().round().long()
        cy = p[:, 1].detach().round().long()
        gx = cx[:, None, None] + ox[None]
        gy = cy[:, None, None] + oy[None]
        valid = (gx >= 0) & (gx < w) & (gy >= 0) & (gy < h)
        d2 = (gx.to(p.dtype) - p[:, 0, None, None]) ** 2 + (gy.to(p.dtype) - p[:, 1, None, None]) ** 2
        hit = torch.exp(-d2 / (2.0 * sigma * sigma)) * v[:, None, None]
        term = torch.log1p(-hit.clamp(max=1.0 - PROB_EPS)) * valid
        idx = (gy * w + gx).clamp(0, h * w - 1)
        log_miss = log_miss.index_add(0, idx.reshape(-1), term.reshape(-1))
    return -torch.expm1(log_miss.view(h, w))


def _splat_full(pts, vals, h, w, sigma, chunk=1024):
    """Exact full-grid evaluation (used when the window covers the image)."""
    ys = torch.arange(h, dtype=pts.dtype)
    xs = torch.arange(w, dtype=pts.dtype)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    log_miss = torch.zeros((h, w), dtype=pts.dtype)
    for start in range(0, len(pts), chunk):
        p = pts[start : start + chunk]
        v = vals[start : start + chunk].clamp(0.0, 1.0)
        d2 = (gx[None] - p[:, 0, None, None]) ** 2 + (gy[None] - p[:, 1, None, None]) ** 2
        hit = torch.exp(-d2 / (2.0 * sigma * sigma)) * v[:, None, None]
        log_miss = log_miss + torch.log1p(-hit.clamp(max=1.0 - PROB_EPS)).sum(dim=0)
    return -torch.expm1(log_miss)


def pal_loss(pred_contact, body_vertices, camera, gt_mask_2d, sigma=DEFAULT_SPLAT_SIGMA,
             visible_mask=None):
    """Pixel-anchoring loss: BCE between the splat-rendered contact map and
    the ground-truth 2D contact mask.

    Gradients flow to ``pred_contact``; the body and camera are constants
    (they come from the data record). ``visible_mask`` optionally restricts
    splatting to visible vertices (off by default: the whole contact-colored
    mesh is rendered).
    """
    gt = gt_mask_2d if torch.is_tensor(gt_mask_2d) else torch.tensor(np.asarray(gt_mask_2d))
    if tuple(gt.shape) != tuple(camera.image_size):
        raise ValueError(
            f"gt mask {tuple(gt.shape)} does not match camera image {camera.image_size}"
        )
    verts = (
        body_vertices.detach()
        if torch.is_tensor(body_vertices)
        else torch.tensor(np.asarray(body_vertices))
    ).to(pred_contact.dtype)
    points, _ = project_weak_perspective(verts, camera)
    values = pred_contact
    if visible_mask is not None:
        mask = torch.tensor(np.asarray(visible_mask), dtype=pred_contact.dtype)
        values = values * mask
    rendered = splat_render(points, values, camera.image_size, sigma=sigma)
    rendered = rendered.clamp(PROB_EPS, 1.0 - PROB_EPS)
    gt = gt.to(rendered.dtype)
    return -(gt * torch.log(rendered) + (1.0 - gt) * torch.log1p(-rendered)).mean()


def total_loss(components, weights):
    """Weighted sum of loss components; missing (None) terms are skipped.

    ``components`` maps {"contact", "pixel_anchor", "scene_seg", "part_seg"}
    to scalar tensors (or None when the ground truth is unavailable, e.g.
    records with 2D contact masks but no 3D labels).
    """
    w = weights.as_dict()
    unknown = set(components) - set(w)
    if unknown:
        raise ValueError(f"unknown loss components: {sorted(unknown)}")
    total = None
    for name, weight in w.items():
        term = components.get(name)
        if term is None or weight == 0.0:
            continue
        value = term if torch.is_tensor(term) else torch.as_tensor(float(term), dtype=torch.float64)
        if torch.isnan(value).any():
            raise FloatingPointError(f"loss component {name!r} is NaN")
        total = weight * value if total is None else total + weight * value
    if total is None:
        total = torch.zeros(())
    return total
