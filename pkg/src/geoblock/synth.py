"""Synthetic dependency worlds with known ground-truth block boundaries.

A planted world tiles the generation region with cohesive segments. Attention
rows distribute mass over the notional context [0, window_end): a p_in share
inside the row's own segment, a p_out share spread over everything else, and a
chain_mix fraction of the in-segment share concentrated on the immediate
predecessor. Rows are renormalized over that context, then cropped to the
visible keys without renormalization, so mass attending committed context
simply vanishes from a window-local map.

Two regimes fall out of one construction:

* clique (chain_mix = 0): dense mutual in-segment coupling; cuts at segment
  ends leak only the p_out dribble, interior cuts leak in-segment mass, so
  closure profiles peak at planted boundaries.
* chain (chain_mix = 1, single-token segments): every token binds to its
  predecessor chain, which is unresolved inside the window, so the binding
  anchors on the last resolved key before the window. The window-local ROI is
  then (near-)empty, every candidate degenerates, and boundary inference falls
  back to the minimum block: only small parallel updates are stable.

Segment-interior rows keep the literal sub-diagonal chain (key i-1);
segment-initial rows anchor before the window.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .attention import AttentionTensor, WindowSpec
from .decode import DecodeConfig, DecodeReport, DenoiserOutput, decode_sequence
from .errors import ArgumentError, ConfigError, WindowRangeError

# Confidence schedule: positions below their segment start stay cold; once all
# positions before the segment start are committed, confidence rises toward
# CONF_CAP with each refinement step (never reaching 1, so tau = 1 is the
# strict sequential limit).
COLD_BASE = 0.05
COLD_SPAN = 0.10
READY_BASE = 0.45
READY_SPAN = 0.30
READY_DECAY = 0.55
CONF_CAP = 0.995

TOKEN_BASE = 1000
PROMPT_BASE = 10


@dataclass(frozen=True)
class PlantedStructureSpec:
    """Planted dependency layout: segments, leakage, chain mixing, jitter."""

    segment_lengths: tuple[int, ...]
    p_in: float = 0.8
    p_out: float = 0.05
    chain_mix: float = 0.0
    noise: float = 0.0
    layers: int = 1
    heads: int = 1
    seed: int = 0

    def __post_init__(self):
        segs = tuple(int(s) for s in self.segment_lengths)
        if not segs or any(s < 1 for s in segs):
            raise ConfigError("segment lengths must be a nonempty list of counts >= 1")
        if not 0.0 < self.p_in <= 1.0:
            raise ConfigError(f"p_in must be in (0, 1], got {self.p_in}")
        if not 0.0 <= self.p_out < 1.0:
            raise ConfigError(f"p_out must be in [0, 1), got {self.p_out}")
        if self.p_in + self.p_out > 1.0 + 1e-12:
            raise ConfigError("p_in + p_out must not exceed 1")
        if not 0.0 <= self.chain_mix <= 1.0:
            raise ConfigError(f"chain_mix must be in [0, 1], got {self.chain_mix}")
        if self.noise < 0.0:
            raise ConfigError("noise must be >= 0")
        if self.layers < 1 or self.heads < 1:
            raise ConfigError("layers and heads must be >= 1")
        object.__setattr__(self, "segment_lengths", segs)

    @classmethod
    def from_config(cls, text: str) -> "PlantedStructureSpec":
        return build_spec(parse_world_config(text))

    def to_config(self) -> str:
        lines = [
            f"segment_lengths = {','.join(str(s) for s in self.segment_lengths)}",
            f"p_in = {self.p_in:.10g}",
            f"p_out = {self.p_out:.10g}",
            f"chain_mix = {self.chain_mix:.10g}",
            f"noise = {self.noise:.10g}",
            f"layers = {self.layers}",
            f"heads = {self.heads}",
            f"seed = {self.seed}",
        ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SyntheticWorld:
    """Planted structure placed on a canvas behind a committed prompt."""

    spec: PlantedStructureSpec
    prompt_len: int = 4

    def __post_init__(self):
        if self.prompt_len < 0:
            raise ConfigError("prompt_len must be >= 0")
        total = self.prompt_len + sum(self.spec.segment_lengths)
        starts = np.zeros(total, dtype=np.int64)
        ends = np.zeros(total, dtype=np.int64)
        starts[: self.prompt_len] = 0
        ends[: self.prompt_len] = self.prompt_len
        pos = self.prompt_len
        bounds = []
        for length in self.spec.segment_lengths:
            starts[pos : pos + length] = pos
            ends[pos : pos + length] = pos + length
            pos += length
            bounds.append(pos)
        rng = np.random.default_rng(np.random.SeedSequence([self.spec.seed, 0xC0FF]))
        object.__setattr__(self, "_seg_start", starts)
        object.__setattr__(self, "_seg_end", ends)
        object.__setattr__(self, "boundaries", tuple(bounds))
        object.__setattr__(self, "_u_cold", rng.random(total))
        object.__setattr__(self, "_u_ready", rng.random(total))

    @property
    def total_len(self) -> int:
        return self.prompt_len + sum(self.spec.segment_lengths)

    @property
    def interior_boundaries(self) -> tuple[int, ...]:
        """Planted boundaries a scheduler can actually get wrong (canvas end excluded)."""
        return self.boundaries[:-1]

    def segment_bounds(self, pos: int) -> tuple[int, int]:
        return int(self._seg_start[pos]), int(self._seg_end[pos])


def gen_attention(world: SyntheticWorld, window: WindowSpec) -> AttentionTensor:
    """Planted attention for one window: rows [start, end), keys [start - h, end).

    Identical structure across layers and heads, independent multiplicative
    jitter exp(noise * g) per replica, rows renormalized over [0, end) before
    cropping.
    """
    spec = world.spec
    s, e = window.start, window.end
    if e > world.total_len:
        raise WindowRangeError(f"window end {e} exceeds world extent {world.total_len}")
    ctx = e
    n_rows = e - s
    base = np.zeros((n_rows, ctx), dtype=np.float64)

    uniform_share = (1.0 - spec.chain_mix) * spec.p_in
    chain_share = spec.chain_mix * spec.p_in
    for i in range(s, e):
        r = i - s
        seg_lo, seg_hi = world.segment_bounds(i)
        seg_hi = min(seg_hi, ctx)
        n_seg = seg_hi - seg_lo
        if uniform_share > 0.0:
            base[r, seg_lo:seg_hi] += uniform_share / n_seg
        if chain_share > 0.0:
            if i - 1 >= seg_lo:
                target = i - 1  # in-segment predecessor (sub-diagonal chain)
            elif s >= 1:
                target = s - 1  # last resolved key before the window
            else:
                target = i  # canvas start: nothing resolved, self-anchor
            base[r, target] += chain_share
        n_out = ctx - n_seg
        if n_out > 0 and spec.p_out > 0.0:
            share = spec.p_out / n_out
            base[r, :seg_lo] += share
            base[r, seg_hi:] += share

    k0 = window.key_start
    if spec.noise == 0.0:
        row_sums = base.sum(axis=1, keepdims=True)
        normalized = base / row_sums
        roi = normalized[:, k0:]
        out = np.broadcast_to(roi, (spec.layers, spec.heads, n_rows, ctx - k0))
        return AttentionTensor(np.ascontiguousarray(out))

    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, 0xA77E, s, e, window.history_extent])
    )
    out = np.empty((spec.layers, spec.heads, n_rows, ctx - k0), dtype=np.float64)
    for layer in range(spec.layers):
        for head in range(spec.heads):
            g = rng.standard_normal(size=base.shape)
            w = base * np.exp(spec.noise * g)
            w /= w.sum(axis=1, keepdims=True)
            out[layer, head] = w[:, k0:]
    return AttentionTensor(out)


def boundary_recovery(spans, truth, slack: int = 0) -> float:
    """Fraction of ground-truth boundaries matched by some block edge within +-slack."""
    if slack < 0:
        raise ArgumentError("slack must be >= 0")
    truths = [int(t) for t in truth]
    if not truths:
        raise ArgumentError("empty ground truth")
    edges = sorted({int(end) for _, end in spans})
    if not edges:
        return 0.0
    arr = np.asarray(edges, dtype=np.int64)
    hit = sum(1 for t in truths if int(np.abs(arr - t).min()) <= slack)
    return hit / len(truths)


class SimDenoiser:
    """Denoiser over a planted world: scheduled confidences + planted attention.

    Stateless across calls (attention and confidences are functions of the
    world, the decode state, and the step), so instances are safe to share
    across sequences.
    """

    def __init__(self, world: SyntheticWorld):
        self.world = world

    def evaluate(self, state, start, end, step, attention_window=None) -> DenoiserOutput:
        conf = self._confidences(state, start, end, step)
        tokens = np.arange(start, end, dtype=np.int64) + TOKEN_BASE
        attention = (
            gen_attention(self.world, attention_window) if attention_window is not None else None
        )
        return DenoiserOutput(confidence=conf, tokens=tokens, attention=attention)

    def attention_for(self, state, window: WindowSpec) -> AttentionTensor:
        return gen_attention(self.world, window)

    def _confidences(self, state, start, end, step):
        w = self.world
        masked_cum = np.concatenate(([0], np.cumsum(state.mask_flags)))
        out = np.empty(end - start, dtype=np.float64)
        decay = READY_DECAY**step
        for i, p in enumerate(range(start, end)):
            seg_lo = w._seg_start[p]
            if masked_cum[seg_lo] > 0:
                out[i] = COLD_BASE + COLD_SPAN * w._u_cold[p]
            else:
                c0 = READY_BASE + READY_SPAN * w._u_ready[p]
                out[i] = min(CONF_CAP, 1.0 - (1.0 - c0) * decay)
        return out


def simulate_world(
    world: SyntheticWorld,
    cfg: DecodeConfig,
    *,
    collect_trace: bool = False,
    recovery_slack: int = 1,
) -> DecodeReport:
    """Decode one planted world end to end and grade boundary recovery."""
    cfg = replace(
        cfg,
        max_len=world.total_len,
        oracle_boundaries=world.boundaries if cfg.scheduler == "oracle" else cfg.oracle_boundaries,
    )
    prompt = np.arange(world.prompt_len, dtype=np.int64) + PROMPT_BASE
    report = decode_sequence(prompt, SimDenoiser(world), cfg, collect_trace=collect_trace)
    if world.interior_boundaries:
        edges = world.prompt_len + np.cumsum(report.block_lengths)
        spans = [(0, int(e)) for e in edges]
        report.boundary_recovery = boundary_recovery(
            spans, world.interior_boundaries, recovery_slack
        )
    return report


# -- world configuration files (key = value lines) --------------------------

_WORLD_KEYS = {
    "segment_lengths",
    "segment_min",
    "segment_max",
    "segment_count",
    "p_in",
    "p_out",
    "chain_mix",
    "noise",
    "layers",
    "heads",
    "seed",
    "prompt_len",
}


def parse_world_config(text: str) -> dict:
    """Parse `key = value` world config text; raises ConfigError naming the line."""
    if "\n" not in text and Path(text).exists():
        text = Path(text).read_text(encoding="utf-8")
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _WORLD_KEYS:
            raise ConfigError(f"line {lineno}: unknown field {key!r}")
        try:
            if key == "segment_lengths":
                cfg[key] = tuple(int(v) for v in value.split(",") if v.strip())
            elif key in ("segment_min", "segment_max", "segment_count", "layers", "heads", "seed", "prompt_len"):
                cfg[key] = int(value)
            else:
                cfg[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: field {key!r}: {exc}") from None
    return cfg


def build_spec(cfg: dict, seed: int | None = None) -> PlantedStructureSpec:
    """Materialize a PlantedStructureSpec, sampling ranged segments when configured."""
    cfg = dict(cfg)
    cfg.pop("prompt_len", None)
    if seed is not None:
        cfg["seed"] = int(seed)
    ranged = {"segment_min", "segment_max", "segment_count"} & cfg.keys()
    if "segment_lengths" in cfg and ranged:
        raise ConfigError("give either segment_lengths or segment_min/max/count, not both")
    if ranged:
        if ranged != {"segment_min", "segment_max", "segment_count"}:
            raise ConfigError("ranged segments need segment_min, segment_max and segment_count")
        lo, hi, n = cfg.pop("segment_min"), cfg.pop("segment_max"), cfg.pop("segment_count")
        if not 1 <= lo <= hi or n < 1:
            raise ConfigError(f"invalid segment range [{lo}, {hi}] x {n}")
        rng = np.random.default_rng(np.random.SeedSequence([cfg.get("seed", 0), 0x5E65]))
        cfg["segment_lengths"] = tuple(int(v) for v in rng.integers(lo, hi + 1, size=n))
    if "segment_lengths" not in cfg:
        raise ConfigError("world config needs segment_lengths or a segment range")
    return PlantedStructureSpec(**cfg)


def make_world(cfg: dict, seed: int | None = None) -> SyntheticWorld:
    prompt_len = int(cfg.get("prompt_len", 4))
    return SyntheticWorld(spec=build_spec(cfg, seed), prompt_len=prompt_len)
