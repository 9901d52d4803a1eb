"""Deterministic toy masked denoiser with attention-capture hooks.

A small bidirectional transformer over opaque token ids: seeded random
embeddings and projections, softmax attention per layer/head, and a hook
registry that observers use to capture post-softmax attention weights during
a forward pass. It stands in for a pretrained masked-diffusion backbone so
the export pipeline (hooks -> ROI crop -> dump) can be exercised end to end
on a desk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError

MASK_ID = 0
VOCAB = 256


def _softmax(x, axis=-1):
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class ToyMaskedDenoiser:
    layers: int = 2
    heads: int = 2
    dim: int = 32
    seed: int = 0
    expose_attention: bool = True
    _hooks: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.dim % self.heads:
            raise CapabilityError(f"dim {self.dim} not divisible by heads {self.heads}")
        rng = np.random.default_rng(self.seed)
        scale = 1.0 / np.sqrt(self.dim)
        self.tok_emb = rng.standard_normal((VOCAB, self.dim)) * scale
        self.pos_emb = rng.standard_normal((512, self.dim)) * scale
        self.w_q = rng.standard_normal((self.layers, self.dim, self.dim)) * scale
        self.w_k = rng.standard_normal((self.layers, self.dim, self.dim)) * scale
        self.w_v = rng.standard_normal((self.layers, self.dim, self.dim)) * scale
        self.w_o = rng.standard_normal((self.layers, self.dim, self.dim)) * scale
        self.w_mlp = rng.standard_normal((self.layers, self.dim, self.dim)) * scale
        self.w_out = rng.standard_normal((self.dim, VOCAB)) * scale

    def register_attention_hook(self, fn) -> None:
        """fn(layer_idx, weights) receives (heads, T, T) post-softmax attention."""
        if not self.expose_attention:
            raise CapabilityError("model does not expose attention outputs")
        self._hooks.append(fn)

    def clear_hooks(self) -> None:
        self._hooks.clear()

    def forward(self, token_ids, mask_flags):
        """One bidirectional denoising pass.

        Returns (confidence, predicted ids); registered hooks observe each
        layer's attention as it is produced.
        """
        ids = np.where(mask_flags, MASK_ID, np.asarray(token_ids) % VOCAB)
        t = ids.shape[0]
        if t > self.pos_emb.shape[0]:
            raise CapabilityError(f"sequence length {t} exceeds model horizon")
        x = self.tok_emb[ids] + self.pos_emb[:t]
        head_dim = self.dim // self.heads
        for layer in range(self.layers):
            q = (x @ self.w_q[layer]).reshape(t, self.heads, head_dim)
            k = (x @ self.w_k[layer]).reshape(t, self.heads, head_dim)
            v = (x @ self.w_v[layer]).reshape(t, self.heads, head_dim)
            logits = np.einsum("qhd,khd->hqk", q, k) / np.sqrt(head_dim)
            att = _softmax(logits, axis=-1)  # (heads, T, T), rows sum to 1
            for fn in self._hooks:
                fn(layer, att)
            ctx = np.einsum("hqk,khd->qhd", att, v).reshape(t, self.dim)
            x = x + ctx @ self.w_o[layer]
            x = x + np.tanh(x @ self.w_mlp[layer])
        probs = _softmax(x @ self.w_out, axis=-1)
        predicted = probs.argmax(axis=-1)
        confidence = probs.max(axis=-1)
        return confidence, predicted


# Registry keyed by model identifier; "blind" variant exposes no attention.
MODEL_REGISTRY = {
    "toy-2x2": lambda: ToyMaskedDenoiser(layers=2, heads=2, dim=32, seed=7),
    "toy-4x4": lambda: ToyMaskedDenoiser(layers=4, heads=4, dim=64, seed=7),
    "toy-2x2-blind": lambda: ToyMaskedDenoiser(layers=2, heads=2, dim=32, seed=7, expose_attention=False),
}


def load_model(model_id: str) -> ToyMaskedDenoiser:
    try:
        builder = MODEL_REGISTRY[model_id]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise CapabilityError(f"unknown model id {model_id!r}; known: {known}") from None
    return builder()


def tokenize(text: str) -> np.ndarray:
    """Byte-level toy tokenizer (ids 1..255; 0 is the mask id)."""
    ids = np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.int64)
    return np.maximum(ids, 1)
