"""Attention tensors, frontier-window ROI extraction, salient-head selection, layer fusion.

Everything here is pure and operates on post-softmax attention weights. ROI
cropping never renormalizes: mass that leaves the visible key range is
meaningful residual (it left the candidate region), so it must stay gone
rather than be redistributed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, ConfigError, DataError, WindowRangeError

ROW_SUM_TOL = 1e-4
WEIGHT_SUM_TOL = 1e-9
DEFAULT_TOP_K_HEADS = 8


def _as_float_array(weights, name: str) -> np.ndarray:
    arr = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains NaN or Inf entries")
    if arr.size and float(arr.min()) < 0.0:
        raise DataError(f"{name} contains negative entries")
    return arr


@dataclass(frozen=True)
class WindowSpec:
    """Frontier window [start, end) with `history_extent` key columns kept before start."""

    start: int
    end: int
    history_extent: int = 0

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise WindowRangeError(f"window [{self.start}, {self.end}) is empty or negative")
        if self.history_extent < 0 or self.history_extent > self.start:
            raise WindowRangeError(
                f"history_extent {self.history_extent} outside [0, {self.start}]"
            )

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def key_start(self) -> int:
        return self.start - self.history_extent

    @property
    def key_count(self) -> int:
        return self.history_extent + self.length


@dataclass(frozen=True)
class AttentionTensor:
    """Dense post-softmax attention, shape (layers, heads, queries, keys).

    Entries are nonnegative and finite; every query row sums to at most
    1 + ROW_SUM_TOL (exactly ~1 when the key axis covers the full visible
    context, less when cropped to an ROI).
    """

    weights: np.ndarray

    def __post_init__(self):
        arr = _as_float_array(self.weights, "attention weights")
        if arr.ndim != 4:
            raise DataError(f"attention tensor must be 4-d, got shape {arr.shape}")
        if arr.size and float(arr.sum(axis=3).max()) > 1.0 + ROW_SUM_TOL:
            raise DataError("attention row sums exceed 1 beyond tolerance")
        object.__setattr__(self, "weights", arr)

    @property
    def layers(self) -> int:
        return self.weights.shape[0]

    @property
    def heads(self) -> int:
        return self.weights.shape[1]

    @property
    def queries(self) -> int:
        return self.weights.shape[2]

    @property
    def keys(self) -> int:
        return self.weights.shape[3]

    def is_row_stochastic(self, tol: float = ROW_SUM_TOL) -> bool:
        """True when every query row sums to 1 within tol (full visible context)."""
        sums = self.weights.sum(axis=3)
        return bool(np.all(np.abs(sums - 1.0) <= tol))


@dataclass(frozen=True)
class FusionConfig:
    """Layer subset, fusion weights, and salient-head count for map fusion."""

    layer_ids: tuple[int, ...]
    layer_weights: tuple[float, ...]
    top_k_heads: int = DEFAULT_TOP_K_HEADS

    def __post_init__(self):
        ids = tuple(int(i) for i in self.layer_ids)
        ws = tuple(float(w) for w in self.layer_weights)
        if not ids:
            raise ConfigError("fusion needs at least one layer")
        if len(ids) != len(set(ids)):
            raise ConfigError(f"layer ids must be distinct, got {ids}")
        if len(ws) != len(ids):
            raise ConfigError("one weight per layer id required")
        if any(w < 0 for w in ws):
            raise ConfigError("layer weights must be nonnegative")
        if abs(sum(ws) - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(f"layer weights sum to {sum(ws)!r}, expected 1")
        if self.top_k_heads < 1:
            raise ConfigError("top_k_heads must be >= 1")
        object.__setattr__(self, "layer_ids", ids)
        object.__setattr__(self, "layer_weights", ws)

    @classmethod
    def uniform(cls, layer_ids: Iterable[int], top_k_heads: int = DEFAULT_TOP_K_HEADS) -> "FusionConfig":
        ids = tuple(layer_ids)
        if not ids:
            raise ConfigError("fusion needs at least one layer")
        # Equal weights, last one absorbs the rounding so they sum to exactly 1.
        w = 1.0 / len(ids)
        weights = (w,) * (len(ids) - 1) + (1.0 - w * (len(ids) - 1),)
        return cls(layer_ids=ids, layer_weights=weights, top_k_heads=top_k_heads)

    def validate_for(self, tensor: AttentionTensor) -> None:
        for lid in self.layer_ids:
            if lid < 0 or lid >= tensor.layers:
                raise ConfigError(f"layer id {lid} outside tensor layer range [0, {tensor.layers})")


@dataclass(frozen=True)
class FusedMap:
    """Single fused dependency map over one frontier window.

    Rows are the window queries; columns are `origin.history_extent` history
    keys followed by the window keys.
    """

    weights: np.ndarray
    origin: WindowSpec

    def __post_init__(self):
        arr = _as_float_array(self.weights, "fused map")
        if arr.ndim != 2:
            raise DataError(f"fused map must be 2-d, got shape {arr.shape}")
        expected = (self.origin.length, self.origin.key_count)
        if arr.shape != expected:
            raise DataError(f"fused map shape {arr.shape} inconsistent with window {expected}")
        object.__setattr__(self, "weights", np.ascontiguousarray(arr))

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def history_extent(self) -> int:
        return self.origin.history_extent


def extract_roi(tensor: AttentionTensor, window: WindowSpec) -> AttentionTensor:
    """Crop query rows to [start, end) and key columns to [start - history_extent, end).

    Entries are copied unmodified; no renormalization.
    """
    if window.end > tensor.queries:
        raise WindowRangeError(
            f"window end {window.end} exceeds query extent {tensor.queries} (query axis)"
        )
    if window.end > tensor.keys:
        raise WindowRangeError(
            f"window end {window.end} exceeds key extent {tensor.keys} (key axis)"
        )
    cropped = tensor.weights[:, :, window.start : window.end, window.key_start : window.end]
    return AttentionTensor(np.ascontiguousarray(cropped))


def head_saliency(roi_head) -> float:
    """Total attention mass of one head's ROI matrix."""
    arr = _as_float_array(roi_head, "head ROI")
    return float(arr.sum(dtype=np.float64))


def select_salient_heads(layer_roi, k: int) -> tuple[int, ...]:
    """Indices of the k heads with largest ROI mass, ascending; ties prefer the lower index.

    `layer_roi` is an array (heads, Q, K) or a sequence of per-head matrices.
    k is clamped to the head count.
    """
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    mats: Sequence = layer_roi
    n = len(mats)
    if n == 0:
        raise ArgumentError("empty head set")
    saliencies = np.array([head_saliency(m) for m in mats])
    if k >= n:
        return tuple(range(n))
    # Stable sort on descending mass keeps the lower index first among ties.
    order = np.argsort(-saliencies, kind="stable")[:k]
    return tuple(sorted(int(i) for i in order))


def _fuse_roi(roi: AttentionTensor, origin: WindowSpec, cfg: FusionConfig) -> FusedMap:
    """Fuse an already-cropped ROI tensor: per-layer salient-head mean, then weighted sum."""
    cfg.validate_for(roi)
    acc = np.zeros((roi.queries, roi.keys), dtype=np.float64)
    for lid, w in zip(cfg.layer_ids, cfg.layer_weights):
        heads = roi.weights[lid]
        chosen = select_salient_heads(heads, cfg.top_k_heads)
        layer_mean = heads[list(chosen)].mean(axis=0, dtype=np.float64)
        acc += w * layer_mean
    return FusedMap(acc, origin)


def fuse_layers(tensor: AttentionTensor, window: WindowSpec, cfg: FusionConfig) -> FusedMap:
    """ROI-crop, average the top-k salient heads per selected layer, sum with layer weights."""
    cfg.validate_for(tensor)
    roi = extract_roi(tensor, window)
    return _fuse_roi(roi, window, cfg)
