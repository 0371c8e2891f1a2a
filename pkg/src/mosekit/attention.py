"""Desk-scale reference of memory-attention feature enhancement.

Feature maps are ``(C, h, w)`` arrays; memories are ``(N, C, h, w)`` (pixel)
and ``(N, C)`` (object). Attention is single-head scaled dot-product with
residual connections and no normalisation or positional encoding, so the
output does not depend on the order of memory entries.

Query and key projections are drawn from a seeded generator; value
projections are the identity, so with a single key (or identical keys) each
cross-attention increment is exactly the key's feature vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_SEED = 7
DEFAULT_LAYERS = 4
STRIDE = 16


def feature_size(height: int, width: int) -> tuple[int, int]:
    """Spatial size of the stride-16 feature map of an ``height`` x ``width`` image."""
    if height % STRIDE or width % STRIDE or height < STRIDE or width < STRIDE:
        raise ValueError(f"image size {height}x{width} is not a positive multiple of {STRIDE}")
    return height // STRIDE, width // STRIDE


def _finite(name: str, x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray, return_weights: bool = False):
    """``softmax(q k^T / sqrt(d)) v`` for 2-D ``q`` (n_q, d), ``k`` and ``v`` (n_k, d)."""
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ValueError("q, k, v must be 2-D")
    if k.shape[0] < 1:
        raise ValueError("need at least one key")
    if q.shape[1] != k.shape[1]:
        raise ValueError(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"{k.shape[0]} keys but {v.shape[0]} values")
    for name, a in (("q", q), ("k", k), ("v", v)):
        _finite(name, a)
    weights = softmax(q @ k.T / np.sqrt(q.shape[1]))
    out = weights @ v
    return (out, weights) if return_weights else out


@dataclass(frozen=True)
class BlockWeights:
    wq: np.ndarray
    wk: np.ndarray

    def __call__(self, x: np.ndarray, kv: np.ndarray, record: list | None = None) -> np.ndarray:
        out, w = attention(x @ self.wq, kv @ self.wk, kv, return_weights=True)
        if record is not None:
            record.append(w)
        return out


@dataclass(frozen=True)
class LayerWeights:
    self_attn: BlockWeights
    cross_attn: BlockWeights


def make_layers(channels: int, layers: int = DEFAULT_LAYERS, seed: int = DEFAULT_SEED) -> list[LayerWeights]:
    """Seeded Gaussian Q/K projections, scaled by 1/sqrt(C)."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(channels)

    def block():
        return BlockWeights(
            rng.normal(0.0, scale, (channels, channels)),
            rng.normal(0.0, scale, (channels, channels)),
        )

    return [LayerWeights(block(), block()) for _ in range(layers)]


def identity_layers(channels: int, layers: int = DEFAULT_LAYERS) -> list[LayerWeights]:
    eye = np.eye(channels)
    return [LayerWeights(BlockWeights(eye, eye), BlockWeights(eye, eye)) for _ in range(layers)]


def to_tokens(f: np.ndarray) -> np.ndarray:
    """``(C, h, w)`` -> ``(h*w, C)``, row-major over positions."""
    c = f.shape[0]
    return f.reshape(c, -1).T


def from_tokens(x: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    return x.T.reshape(shape)


def memory_tokens(pixel_memory: np.ndarray, object_memory: np.ndarray) -> np.ndarray:
    """Flatten pixel memory to ``(N*h*w, C)`` rows and append the ``N`` object rows."""
    n, c = pixel_memory.shape[:2]
    flat = pixel_memory.transpose(0, 2, 3, 1).reshape(-1, c)
    return np.concatenate([flat, object_memory.reshape(n, c)], axis=0)


def enhance_grounding(
    f_t: np.ndarray,
    pixel_memory: np.ndarray,
    object_memory: np.ndarray,
    layers: int | Sequence[LayerWeights] = DEFAULT_LAYERS,
    seed: int = DEFAULT_SEED,
    record: list | None = None,
) -> np.ndarray:
    """Enhance query features with grounding memory.

    Each layer applies ``x += SelfAttn(x)`` then ``x += CrossAttn(x, memory)``.
    ``layers`` is a layer count (weights drawn from ``seed``) or explicit
    weights. Attention weight matrices are appended to ``record`` if given.
    """
    f_t = np.asarray(f_t, dtype=np.float64)
    pixel_memory = np.asarray(pixel_memory, dtype=np.float64)
    object_memory = np.asarray(object_memory, dtype=np.float64)
    if f_t.ndim != 3:
        raise ValueError(f"f_t must be (C, h, w), got {f_t.shape}")
    c = f_t.shape[0]
    if pixel_memory.ndim != 4 or pixel_memory.shape[1] != c:
        raise ValueError(f"pixel memory must be (N, {c}, h, w), got {pixel_memory.shape}")
    if object_memory.shape != (pixel_memory.shape[0], c):
        raise ValueError(f"object memory must be ({pixel_memory.shape[0]}, {c}), got {object_memory.shape}")
    _finite("f_t", f_t)
    _finite("pixel memory", pixel_memory)
    _finite("object memory", object_memory)

    weights = make_layers(c, layers, seed) if isinstance(layers, int) else list(layers)
    mem = memory_tokens(pixel_memory, object_memory)
    x = to_tokens(f_t)
    for layer in weights:
        x = x + layer.self_attn(x, x, record)
        x = x + layer.cross_attn(x, mem, record)
    return from_tokens(x, f_t.shape)


def concept_vector_stub(features: Sequence[np.ndarray], masks: Sequence[np.ndarray]) -> np.ndarray:
    """Mean feature vector over mask-covered positions of all memory frames.

    Stands in for the vision-language model's segmentation-token embedding.
    """
    if len(features) == 0 or len(features) != len(masks):
        raise ValueError("need one mask per feature map and at least one frame")
    total = None
    count = 0
    for f, m in zip(features, masks):
        f = np.asarray(f, dtype=np.float64)
        m = np.asarray(m, dtype=bool)
        if m.shape != f.shape[1:]:
            raise ValueError(f"mask shape {m.shape} does not match feature map {f.shape}")
        picked = f[:, m]  # (C, n)
        total = picked.sum(axis=1) if total is None else total + picked.sum(axis=1)
        count += picked.shape[1]
    if count == 0:
        raise ValueError("all masks are empty")
    return total / count


def enhance_concept(
    f_t: np.ndarray,
    token: np.ndarray,
    weights: LayerWeights | None = None,
    seed: int = DEFAULT_SEED,
    record: list | None = None,
) -> np.ndarray:
    """``x = SelfAttn(f_t)``, then ``x += CrossAttn(x, token)``."""
    f_t = np.asarray(f_t, dtype=np.float64)
    token = np.asarray(token, dtype=np.float64).reshape(-1)
    if f_t.ndim != 3:
        raise ValueError(f"f_t must be (C, h, w), got {f_t.shape}")
    if token.shape[0] != f_t.shape[0]:
        raise ValueError(f"token length {token.shape[0]} != channels {f_t.shape[0]}")
    _finite("f_t", f_t)
    _finite("token", token)
    if weights is None:
        # Separate stream from the grounding layers drawn with the same seed.
        weights = make_layers(f_t.shape[0], 1, seed + 1)[0]
    x = to_tokens(f_t)
    x = weights.self_attn(x, x, record)
    x = x + weights.cross_attn(x, token[None, :], record)
    return from_tokens(x, f_t.shape)


def fuse(grounding: np.ndarray, concept: np.ndarray | None, active: bool) -> np.ndarray:
    if not active:
        return grounding
    if concept is None:
        raise ValueError("concept features are required when the gate is active")
    if np.shape(concept) != np.shape(grounding):
        raise ValueError(f"shape mismatch: {np.shape(grounding)} vs {np.shape(concept)}")
    return (grounding + concept) / 2


@dataclass(frozen=True, eq=False)
class EnhancedFeatures:
    grounding: np.ndarray
    concept: np.ndarray | None
    fused: np.ndarray


def enhance_frame(
    f_t: np.ndarray,
    pixel_memory: np.ndarray,
    object_memory: np.ndarray,
    token: np.ndarray | None,
    active: bool,
    layers: int = DEFAULT_LAYERS,
    seed: int = DEFAULT_SEED,
) -> EnhancedFeatures:
    """Grounding enhancement always; concept enhancement and fusion only when ``active``."""
    g = enhance_grounding(f_t, pixel_memory, object_memory, layers, seed)
    c = None
    if active:
        if token is None:
            raise ValueError("a concept token is required when the gate is active")
        c = enhance_concept(f_t, token, seed=seed)
    return EnhancedFeatures(g, c, fuse(g, c, active))


def attention_demo(channels: int = 8, hw: int = 4, nl: int = 22, seed: int = DEFAULT_SEED) -> dict:
    """Random inputs through the full enhancement path, with softmax row-sum diagnostics."""
    rng = np.random.default_rng(seed)
    f_t = rng.standard_normal((channels, hw, hw))
    pm = rng.standard_normal((nl, channels, hw, hw))
    om = rng.standard_normal((nl, channels))
    masks = rng.random((nl, hw, hw)) < 0.3
    masks[:, 0, 0] = True
    token = concept_vector_stub(list(pm), list(masks))

    record: list = []
    g = enhance_grounding(f_t, pm, om, DEFAULT_LAYERS, seed, record)
    diagnostics = []
    for i, w in enumerate(record):
        sums = w.sum(axis=1)
        diagnostics.append({
            "layer": i // 2 + 1,
            "block": "self" if i % 2 == 0 else "cross",
            "keys": int(w.shape[1]),
            "max_row_sum_error": float(np.max(np.abs(sums - 1.0))),
            "min_weight": float(w.min()),
        })
    c = enhance_concept(f_t, token, seed=seed)
    fused = fuse(g, c, True)
    return {
        "channels": channels,
        "hw": hw,
        "nl": nl,
        "seed": seed,
        "layers": DEFAULT_LAYERS,
        "inputs": {"f_t": f_t.tolist(), "pixel_memory_shape": list(pm.shape), "object_memory_shape": list(om.shape)},
        "concept_token": token.tolist(),
        "outputs": {"grounding": g.tolist(), "concept": c.tolist(), "fused": fused.tolist()},
        "row_sums": diagnostics,
    }
