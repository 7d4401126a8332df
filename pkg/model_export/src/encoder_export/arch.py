"""Torch reference implementation of the dual-encoder backbones.

Mirrors the published contrastive ViT-B architecture: a ViT image tower
and a causal transformer text tower with quick-GELU MLPs, joined by
linear projections into a shared 512-d space. Weights load from a plain
state dict using the original checkpoint's key names, so a real
checkpoint converts directly. The forward passes return raw embeddings
(no L2 normalization), matching what the inference package expects.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass(frozen=True)
class TowerConfig:
    model_tag: str
    embed_dim: int
    image_width: int
    image_layers: int
    image_heads: int
    patch_size: int
    text_width: int
    text_layers: int
    text_heads: int
    context_length: int

    @property
    def grid(self) -> int:
        return 224 // self.patch_size

    @property
    def image_positions(self) -> int:
        return self.grid * self.grid + 1


CONFIGS = {
    "ViT-B/32": TowerConfig(
        model_tag="ViT-B/32", embed_dim=512,
        image_width=768, image_layers=12, image_heads=12, patch_size=32,
        text_width=512, text_layers=12, text_heads=8, context_length=77,
    ),
    "ViT-B/16": TowerConfig(
        model_tag="ViT-B/16", embed_dim=512,
        image_width=768, image_layers=12, image_heads=12, patch_size=16,
        text_width=512, text_layers=12, text_heads=8, context_length=77,
    ),
}


class QuickGELU(nn.Module):
    def forward(self, x):
        return x * torch.sigmoid(1.702 * x)


class ResidualBlock(nn.Module):
    """Pre-norm transformer block with explicit attention arithmetic.

    Attention is written out by hand (not nn.MultiheadAttention) so the
    exported graph reproduces the exact same sequence of matmuls.
    """

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.width = width
        self.heads = heads
        self.ln_1 = nn.LayerNorm(width)
        self.in_proj_weight = nn.Parameter(torch.empty(3 * width, width))
        self.in_proj_bias = nn.Parameter(torch.empty(3 * width))
        self.out_proj = nn.Linear(width, width)
        self.ln_2 = nn.LayerNorm(width)
        self.c_fc = nn.Linear(width, width * 4)
        self.c_proj = nn.Linear(width * 4, width)
        self.gelu = QuickGELU()

    def attention(self, x: torch.Tensor, mask: torch.Tensor | None) -> torch.Tensor:
        b, t, w = x.shape
        h = self.heads
        dh = w // h
        qw, kw, vw = self.in_proj_weight.chunk(3, dim=0)
        qb, kb, vb = self.in_proj_bias.chunk(3, dim=0)
        q = (x @ qw.t() + qb).view(b, t, h, dh).permute(0, 2, 1, 3)
        k = (x @ kw.t() + kb).view(b, t, h, dh).permute(0, 2, 3, 1)
        v = (x @ vw.t() + vb).view(b, t, h, dh).permute(0, 2, 1, 3)
        scores = (q @ k) * (dh ** -0.5)
        if mask is not None:
            scores = scores + mask
        ctx = torch.softmax(scores, dim=-1) @ v
        ctx = ctx.permute(0, 2, 1, 3).reshape(b, t, w)
        return self.out_proj(ctx)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        x = x + self.attention(self.ln_1(x), mask)
        x = x + self.c_proj(self.gelu(self.c_fc(self.ln_2(x))))
        return x


class ImageTower(nn.Module):
    def __init__(self, cfg: TowerConfig):
        super().__init__()
        self.cfg = cfg
        width = cfg.image_width
        self.conv1 = nn.Conv2d(3, width, cfg.patch_size, cfg.patch_size, bias=False)
        self.class_embedding = nn.Parameter(torch.empty(width))
        self.positional_embedding = nn.Parameter(torch.empty(cfg.image_positions, width))
        self.ln_pre = nn.LayerNorm(width)
        self.blocks = nn.ModuleList(
            ResidualBlock(width, cfg.image_heads) for _ in range(cfg.image_layers)
        )
        self.ln_post = nn.LayerNorm(width)
        self.proj = nn.Parameter(torch.empty(width, cfg.embed_dim))

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        x = self.conv1(image)  # [b, width, grid, grid]
        x = x.reshape(x.shape[0], x.shape[1], -1).permute(0, 2, 1)
        cls = self.class_embedding.to(x.dtype) + torch.zeros(
            x.shape[0], 1, x.shape[-1], dtype=x.dtype
        )
        x = torch.cat([cls, x], dim=1) + self.positional_embedding
        x = self.ln_pre(x)
        for block in self.blocks:
            x = block(x)
        return self.ln_post(x[:, 0, :]) @ self.proj


class TextTower(nn.Module):
    def __init__(self, cfg: TowerConfig, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        width = cfg.text_width
        self.token_embedding = nn.Embedding(vocab_size, width)
        self.positional_embedding = nn.Parameter(torch.empty(cfg.context_length, width))
        self.blocks = nn.ModuleList(
            ResidualBlock(width, cfg.text_heads) for _ in range(cfg.text_layers)
        )
        self.ln_final = nn.LayerNorm(width)
        self.text_projection = nn.Parameter(torch.empty(width, cfg.embed_dim))
        mask = torch.full((cfg.context_length, cfg.context_length), float("-inf"))
        self.register_buffer("attn_mask", torch.triu(mask, diagonal=1))

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        x = self.token_embedding(tokens) + self.positional_embedding
        for block in self.blocks:
            x = block(x, self.attn_mask)
        x = self.ln_final(x)
        eot = tokens.argmax(dim=-1)
        pooled = x[torch.arange(x.shape[0]), eot]
        return pooled @ self.text_projection


class DualEncoder(nn.Module):
    def __init__(self, cfg: TowerConfig, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        self.visual = ImageTower(cfg)
        self.text = TextTower(cfg, vocab_size)

    @torch.no_grad()
    def encode_image(self, image: torch.Tensor) -> torch.Tensor:
        return self.visual(image.float())

    @torch.no_grad()
    def encode_text(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.text(tokens)


def _block_mapping(prefix: str, i: int, block_prefix: str) -> dict[str, str]:
    """Map checkpoint names for one residual block to our module names."""
    src = f"{prefix}transformer.resblocks.{i}."
    dst = f"{block_prefix}.{i}."
    return {
        src + "ln_1.weight": dst + "ln_1.weight",
        src + "ln_1.bias": dst + "ln_1.bias",
        src + "attn.in_proj_weight": dst + "in_proj_weight",
        src + "attn.in_proj_bias": dst + "in_proj_bias",
        src + "attn.out_proj.weight": dst + "out_proj.weight",
        src + "attn.out_proj.bias": dst + "out_proj.bias",
        src + "ln_2.weight": dst + "ln_2.weight",
        src + "ln_2.bias": dst + "ln_2.bias",
        src + "mlp.c_fc.weight": dst + "c_fc.weight",
        src + "mlp.c_fc.bias": dst + "c_fc.bias",
        src + "mlp.c_proj.weight": dst + "c_proj.weight",
        src + "mlp.c_proj.bias": dst + "c_proj.bias",
    }


def checkpoint_key_map(cfg: TowerConfig) -> dict[str, str]:
    mapping = {
        "visual.class_embedding": "visual.class_embedding",
        "visual.positional_embedding": "visual.positional_embedding",
        "visual.conv1.weight": "visual.conv1.weight",
        "visual.ln_pre.weight": "visual.ln_pre.weight",
        "visual.ln_pre.bias": "visual.ln_pre.bias",
        "visual.ln_post.weight": "visual.ln_post.weight",
        "visual.ln_post.bias": "visual.ln_post.bias",
        "visual.proj": "visual.proj",
        "token_embedding.weight": "text.token_embedding.weight",
        "positional_embedding": "text.positional_embedding",
        "ln_final.weight": "text.ln_final.weight",
        "ln_final.bias": "text.ln_final.bias",
        "text_projection": "text.text_projection",
    }
    for i in range(cfg.image_layers):
        mapping.update(_block_mapping("visual.", i, "visual.blocks"))
    for i in range(cfg.text_layers):
        mapping.update(_block_mapping("", i, "text.blocks"))
    return mapping


def load_dual_encoder(cfg: TowerConfig, state_dict: dict) -> DualEncoder:
    """Build the reference model from a checkpoint-style state dict."""
    vocab_size = state_dict["token_embedding.weight"].shape[0]
    model = DualEncoder(cfg, vocab_size)
    mapping = checkpoint_key_map(cfg)
    missing = [k for k in mapping if k not in state_dict]
    if missing:
        raise KeyError(f"checkpoint is missing {len(missing)} keys, e.g. {missing[:3]}")
    renamed = {mapping[k]: torch.as_tensor(v) for k, v in state_dict.items() if k in mapping}
    model.load_state_dict(renamed, strict=False)
    model.eval()
    return model


def random_state_dict(cfg: TowerConfig, vocab_size: int, seed: int = 0) -> dict:
    """A deterministic checkpoint-shaped state dict with sane magnitudes.

    Used by tests when no real checkpoint is on disk; weight scale 0.02
    keeps activations finite through all 12 layers.
    """
    gen = torch.Generator().manual_seed(seed)

    def w(*shape):
        return torch.randn(*shape, generator=gen) * 0.02

    def ln_like(n):
        return torch.ones(n) + torch.randn(n, generator=gen) * 0.01

    sd = {
        "visual.class_embedding": w(cfg.image_width),
        "visual.positional_embedding": w(cfg.image_positions, cfg.image_width),
        "visual.conv1.weight": w(cfg.image_width, 3, cfg.patch_size, cfg.patch_size),
        "visual.ln_pre.weight": ln_like(cfg.image_width),
        "visual.ln_pre.bias": w(cfg.image_width),
        "visual.ln_post.weight": ln_like(cfg.image_width),
        "visual.ln_post.bias": w(cfg.image_width),
        "visual.proj": w(cfg.image_width, cfg.embed_dim),
        "token_embedding.weight": w(vocab_size, cfg.text_width),
        "positional_embedding": w(cfg.context_length, cfg.text_width),
        "ln_final.weight": ln_like(cfg.text_width),
        "ln_final.bias": w(cfg.text_width),
        "text_projection": w(cfg.text_width, cfg.embed_dim),
    }

    def block(prefix, width):
        return {
            f"{prefix}ln_1.weight": ln_like(width),
            f"{prefix}ln_1.bias": w(width),
            f"{prefix}attn.in_proj_weight": w(3 * width, width),
            f"{prefix}attn.in_proj_bias": w(3 * width),
            f"{prefix}attn.out_proj.weight": w(width, width),
            f"{prefix}attn.out_proj.bias": w(width),
            f"{prefix}ln_2.weight": ln_like(width),
            f"{prefix}ln_2.bias": w(width),
            f"{prefix}mlp.c_fc.weight": w(4 * width, width),
            f"{prefix}mlp.c_fc.bias": w(4 * width),
            f"{prefix}mlp.c_proj.weight": w(width, 4 * width),
            f"{prefix}mlp.c_proj.bias": w(width),
        }

    for i in range(cfg.image_layers):
        sd.update(block(f"visual.transformer.resblocks.{i}.", cfg.image_width))
    for i in range(cfg.text_layers):
        sd.update(block(f"transformer.resblocks.{i}.", cfg.text_width))
    return sd
