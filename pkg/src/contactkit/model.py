"""Dual-branch contact estimation network.

Two independent conv encoders extract scene-context and body-part features
from the image; a cross-attention block exchanges key/value pairs between
the branches; per-vertex contact probabilities come from a shallow MLP on
the fused tokens, while two transposed-conv decoders predict scene and part
segmentation maps that supervise the branches.

Spatial positions are the attention tokens, channels the embedding; queries,
keys, and values are the feature tokens themselves (optional learned
projections behind a config flag).

Checkpoints store a flat ``parameter name -> array`` map (the torch module
paths, e.g. ``scene_encoder.stages.0.weight``) plus the ModelConfig, so they
survive refactors that keep the module attribute names.
"""

import pickle
from dataclasses import dataclass, asdict, field

import numpy as np
import torch
from torch import nn

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    image_size: tuple = (64, 64)
    encoder_channels: tuple = (16, 32)
    num_vertices: int = 642
    num_parts: int = 24
    num_scene_channels: int = 6  # objects + background
    head_hidden: int = 128
    num_heads: int = 1
    attention_dim: int = None  # scaling C_t; None = token embedding dim per head
    learned_qkv: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "image_size", tuple(int(x) for x in self.image_size))
        object.__setattr__(self, "encoder_channels", tuple(int(c) for c in self.encoder_channels))
        channels = self.encoder_channels[-1]
        if channels % self.num_heads != 0:
            raise ValueError("encoder channels must divide evenly into heads")
        per_head = channels // self.num_heads
        if self.attention_dim is not None and self.attention_dim != per_head:
            raise ValueError(
                f"attention_dim must equal token embedding dim per head ({per_head})"
            )
        h, w = self.image_size
        stride = 2 ** len(self.encoder_channels)
        if h % stride or w % stride:
            raise ValueError("image size must be divisible by the encoder stride")

    @property
    def scale_dim(self):
        """Attention scaling C_t: the token embedding dimension per head."""
        if self.attention_dim is not None:
            return self.attention_dim
        return self.encoder_channels[-1] // self.num_heads


@dataclass
class ContactOutput:
    """Forward result: per-vertex contact probabilities plus both decoder maps."""

    contact: torch.Tensor  # (B, N_V), post-sigmoid
    scene_logits: torch.Tensor  # (B, N_o', H, W)
    part_logits: torch.Tensor  # (B, J+1, H, W)


class ConvEncoder(nn.Module):
    """Stack of stride-2 3x3 convs with ReLU; output (B, C, H/2^k, W/2^k)."""

    def __init__(self, channels):
        super().__init__()
        layers = []
        prev = 3
        for c in channels:
            layers += [nn.Conv2d(prev, c, 3, stride=2, padding=1), nn.ReLU()]
            prev = c
        self.stages = nn.Sequential(*layers)

    def forward(self, x):
        return self.stages(x)


class ConvDecoder(nn.Module):
    """Mirror of ConvEncoder with transposed convs back to input resolution."""

    def __init__(self, channels, out_channels):
        super().__init__()
        widths = list(reversed(channels))
        layers = []
        for i in range(len(widths) - 1):
            layers += [nn.ConvTranspose2d(widths[i], widths[i + 1], 4, stride=2, padding=1), nn.ReLU()]
        layers.append(nn.ConvTranspose2d(widths[-1], out_channels, 4, stride=2, padding=1))
        self.stages = nn.Sequential(*layers)

    def forward(self, x):
        return self.stages(x)


def tokens_from_map(feature_map):
    """(B, C, H', W') -> (B, T, C) with T = H'*W' spatial tokens."""
    b, c, h, w = feature_map.shape
    return feature_map.reshape(b, c, h * w).transpose(1, 2)


class CrossAttentionFusion(nn.Module):
    """Exchange key/value pairs between the scene and part token sets.

    fused = LayerNorm(attend(part->scene) * attend(scene->part)), where
    attend(q_branch -> kv_branch) = softmax(Q K^T / sqrt(C_t)) V and the
    Hadamard product couples the two attended streams per token.
    """

    def __init__(self, channels, num_heads=1, attention_dim=None, learned_qkv=False):
        super().__init__()
        if channels % num_heads:
            raise ValueError("channels must divide evenly into heads")
        self.channels = channels
        self.num_heads = num_heads
        self.attention_dim = attention_dim or channels // num_heads
        self.norm = nn.LayerNorm(channels)
        if learned_qkv:
            self.qkv_s = nn.ModuleList([nn.Linear(channels, channels) for _ in range(3)])
            self.qkv_p = nn.ModuleList([nn.Linear(channels, channels) for _ in range(3)])
        else:
            self.qkv_s = self.qkv_p = None

    def _split_heads(self, t):
        b, n, c = t.shape
        return t.reshape(b, n, self.num_heads, c // self.num_heads).transpose(1, 2)

    def _merge_heads(self, t):
        b, h, n, d = t.shape
        return t.transpose(1, 2).reshape(b, n, h * d)

    def attend(self, queries, keys, values):
        """Row-stochastic attention; returns (attended values, attention)."""
        q, k, v = map(self._split_heads, (queries, keys, values))
        scores = q @ k.transpose(-2, -1) / np.sqrt(self.attention_dim)
        attn = torch.softmax(scores, dim=-1)
        return self._merge_heads(attn @ v), attn

    def fuse_tokens(self, f_s, f_p):
        """Fuse (B, T, C) token matrices; also returns both attention maps."""
        if self.qkv_s is not None:
            q_s, k_s, v_s = (proj(f_s) for proj in self.qkv_s)
            q_p, k_p, v_p = (proj(f_p) for proj in self.qkv_p)
        else:
            q_s = k_s = v_s = f_s
            q_p = k_p = v_p = f_p
        f_s_att, attn_ps = self.attend(q_p, k_s, v_s)
        f_p_att, attn_sp = self.attend(q_s, k_p, v_p)
        return self.norm(f_s_att * f_p_att), attn_ps, attn_sp

    def forward(self, scene_map, part_map):
        if scene_map.shape != part_map.shape:
            raise ValueError("scene and part feature maps must have identical shapes")
        fused, _, _ = self.fuse_tokens(tokens_from_map(scene_map), tokens_from_map(part_map))
        return fused


class ContactHead(nn.Module):
    """Global token average -> two-layer MLP -> per-vertex sigmoid."""

    def __init__(self, channels, hidden, num_vertices):
        super().__init__()
        self.mlp = nn.Sequential(nn.Linear(channels, hidden), nn.ReLU(), nn.Linear(hidden, num_vertices))

    def forward(self, fused_tokens):
        pooled = fused_tokens.mean(dim=1)
        return torch.sigmoid(self.mlp(pooled))


class ContactNet(nn.Module):
    """Full network: encoders, cross-attention fusion, heads, decoders."""

    def __init__(self, config):
        super().__init__()
        self.config = config
        c = config.encoder_channels[-1]
        self.scene_encoder = ConvEncoder(config.encoder_channels)
        self.part_encoder = ConvEncoder(config.encoder_channels)
        self.fusion = CrossAttentionFusion(
            c, config.num_heads, config.scale_dim, config.learned_qkv
        )
        self.contact_head = ContactHead(c, config.head_hidden, config.num_vertices)
        self.scene_decoder = ConvDecoder(config.encoder_channels, config.num_scene_channels)
        self.part_decoder = ConvDecoder(config.encoder_channels, config.num_parts + 1)
        reset_parameters(self, config.seed)

    def encode(self, image):
        if image.shape[-2:] != torch.Size(self.config.image_size):
            raise ValueError(
                f"expected {self.config.image_size} input, got {tuple(image.shape[-2:])}"
            )
        return self.scene_encoder(image), self.part_encoder(image)

    def forward(self, image):
        squeeze = image.dim() == 3
        if squeeze:
            image = image[None]
        f_s, f_p = self.encode(image)
        fused = self.fusion(f_s, f_p)
        contact = self.contact_head(fused)
        scene_logits = self.scene_decoder(f_s)
        part_logits = self.part_decoder(f_p)
        if squeeze:
            contact, scene_logits, part_logits = contact[0], scene_logits[0], part_logits[0]
        return ContactOutput(contact=contact, scene_logits=scene_logits, part_logits=part_logits)


def reset_parameters(model, seed):
    """Deterministic re-init of every parameter from one seeded generator.

    Parameters are visited in sorted name order, so initialization does not
    depend on module construction order. Weights get fan-in-scaled uniform
    values; biases zero; norm weights one.
    """
    gen = torch.Generator().manual_seed(int(seed))
    for name, p in sorted(model.named_parameters(), key=lambda kv: kv[0]):
        with torch.no_grad():
            if p.dim() == 1:
                if name.endswith("weight"):  # LayerNorm scale
                    p.fill_(1.0)
                else:
                    p.zero_()
            else:
                fan_in = int(np.prod(p.shape[1:]))
                bound = 1.0 / np.sqrt(max(fan_in, 1))
                vals = torch.rand(p.shape, generator=gen, dtype=torch.float64)
                p.copy_(((vals * 2.0 - 1.0) * bound).to(p.dtype))
    return model


def count_parameters(model):
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(path, model, extra=None):
    """Write flat name->array parameter map + config (+ optional extras)."""
    params = {
        name: p.detach().cpu().numpy().copy()
        for name, p in sorted(model.named_parameters(), key=lambda kv: kv[0])
    }
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "params": params,
        "extra": extra or {},
    }
    with open(path, "wb") as f:
        pickle.dump(payload, f, protocol=4)


def load_checkpoint(path, dtype=torch.float32):
    """Rebuild a ContactNet (and extras) from a checkpoint file."""
    with open(path, "rb") as f:
        payload = pickle.load(f)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')!r}")
    cfg = dict(payload["config"])
    cfg["image_size"] = tuple(cfg["image_size"])
    cfg["encoder_channels"] = tuple(cfg["encoder_channels"])
    config = ModelConfig(**cfg)
    model = ContactNet(config).to(dtype)
    state = {name: torch.as_tensor(arr, dtype=dtype) for name, arr in payload["params"].items()}
    model.load_state_dict(state)
    return model, payload["extra"]
