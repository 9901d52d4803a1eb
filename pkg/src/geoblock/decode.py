"""Block-diffusion decoding state machine with pluggable denoiser and schedulers.

The decode loop alternates boundary inference at each frontier (geoblock /
fixed / oracle schedulers) with threshold-parallel unmasking inside the chosen
block. Forward-pass accounting: every unmask step costs one NFE; boundary
probes cost one NFE each in dedicated_probe mode and are also tallied in
probe_nfe. Token identities are opaque ids; the harness verifies scheduling
geometry, not language quality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .attention import AttentionTensor, FusionConfig, WindowSpec, _fuse_roi, fuse_layers
from .errors import ArgumentError, ConfigError, StateError, WindowRangeError
from .scoring import BoundaryDecision, ScoreParams, score_profile, select_boundary

MASK_TOKEN = -1

SCHEDULERS = ("geoblock", "fixed", "oracle")
PROBE_MODES = ("dedicated_probe", "reuse_pass")


@dataclass
class DecoderState:
    """Token canvas plus commitment bookkeeping for one decoding sequence."""

    canvas: np.ndarray
    mask_flags: np.ndarray
    prompt_len: int
    frontier: int
    blocks: list[tuple[int, int]] = field(default_factory=list)
    nfe: int = 0
    probe_nfe: int = 0
    active_end: Optional[int] = None

    @classmethod
    def initial(cls, prompt: Sequence[int], total_len: int) -> "DecoderState":
        prompt = np.asarray(prompt, dtype=np.int64)
        if total_len <= prompt.shape[0]:
            raise ArgumentError(
                f"total length {total_len} must exceed prompt length {prompt.shape[0]}"
            )
        canvas = np.full(total_len, MASK_TOKEN, dtype=np.int64)
        canvas[: prompt.shape[0]] = prompt
        mask = np.ones(total_len, dtype=bool)
        mask[: prompt.shape[0]] = False
        return cls(
            canvas=canvas,
            mask_flags=mask,
            prompt_len=int(prompt.shape[0]),
            frontier=int(prompt.shape[0]),
        )

    def check(self) -> None:
        """Assert the structural invariants; used by tests."""
        assert not self.mask_flags[: self.frontier].any(), "committed prefix has masked holes"
        edge = self.active_end if self.active_end is not None else self.frontier
        assert not (~self.mask_flags[edge:]).any() or edge == len(
            self.canvas
        ), "positions beyond the active block must stay masked"
        pos = self.prompt_len
        for start, end in self.blocks:
            assert start == pos and end > start, "block spans must tile the generated region"
            pos = end
        assert pos == self.frontier, "block spans must reach the frontier"


@dataclass
class DenoiserOutput:
    """One forward pass: confidences and proposed ids over the active region,
    plus (optionally) ROI attention for a requested window."""

    confidence: np.ndarray
    tokens: np.ndarray
    attention: Optional[AttentionTensor] = None

    def __post_init__(self):
        conf = np.asarray(self.confidence, dtype=np.float64)
        if not np.all(np.isfinite(conf)) or conf.size and (
            conf.min() < 0.0 or conf.max() > 1.0
        ):
            raise ArgumentError("confidences must be finite and in [0, 1]")
        self.confidence = conf
        self.tokens = np.asarray(self.tokens, dtype=np.int64)


class Denoiser(Protocol):
    """Pluggable mask predictor.

    evaluate() is one counted forward pass over the active region; when
    `attention_window` is given the output carries the ROI attention for that
    window. attention_for() re-exposes the attention a previous pass would
    already have produced (reuse_pass mode) without counting a new pass.
    """

    def evaluate(
        self,
        state: DecoderState,
        start: int,
        end: int,
        step: int,
        attention_window: Optional[WindowSpec] = None,
    ) -> DenoiserOutput: ...

    def attention_for(self, state: DecoderState, window: WindowSpec) -> AttentionTensor: ...


@dataclass(frozen=True)
class DecodeConfig:
    score_params: ScoreParams = ScoreParams()
    fusion: Optional[FusionConfig] = None
    threshold: float = 0.9
    scheduler: str = "geoblock"
    fixed_block: Optional[int] = None
    probe_mode: str = "dedicated_probe"
    max_len: int = 0
    terminator: Optional[int] = None
    oracle_boundaries: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"scheduler must be one of {SCHEDULERS}, got {self.scheduler!r}")
        if self.scheduler == "fixed" and (self.fixed_block is None or self.fixed_block < 1):
            raise ConfigError("fixed scheduler requires fixed_block >= 1")
        if self.probe_mode not in PROBE_MODES:
            raise ConfigError(f"probe_mode must be one of {PROBE_MODES}, got {self.probe_mode!r}")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1")


@dataclass(frozen=True)
class TraceEvent:
    step: int
    kind: str  # "probe" | "commit"
    positions: tuple[int, ...]
    block: int


@dataclass
class DecodeReport:
    """Outcome of one decoded sequence: NFE, block-length stats, recovery."""

    total_nfe: int
    probe_nfe: int
    extra_nfe_ratio: float
    block_lengths: tuple[int, ...]
    block_length_mean: float
    block_length_std: float
    prompt_len: int
    generated: int
    truncated: bool = False
    boundary_recovery: Optional[float] = None
    trace: Optional[tuple[TraceEvent, ...]] = None

    def to_text(self) -> str:
        rec = "none" if self.boundary_recovery is None else f"{self.boundary_recovery:.10g}"
        lines = [
            f"total_nfe: {self.total_nfe}",
            f"probe_nfe: {self.probe_nfe}",
            f"extra_nfe_ratio: {self.extra_nfe_ratio:.10g}",
            f"block_lengths: {','.join(str(b) for b in self.block_lengths)}",
            f"block_length_mean: {self.block_length_mean:.10g}",
            f"block_length_std: {self.block_length_std:.10g}",
            f"prompt_len: {self.prompt_len}",
            f"generated: {self.generated}",
            f"truncated: {str(self.truncated).lower()}",
            f"boundary_recovery: {rec}",
        ]
        return "\n".join(lines) + "\n"

    def trace_lines(self) -> str:
        if self.trace is None:
            return ""
        out = []
        for ev in self.trace:
            pos = ",".join(str(p) for p in ev.positions) if ev.positions else "-"
            out.append(f"{ev.step} {ev.kind} block={ev.block} positions={pos}")
        return "\n".join(out) + "\n"


def infer_block(
    attention: AttentionTensor,
    window: WindowSpec,
    cfg: DecodeConfig,
    *,
    closed_end: bool = False,
    roi_aligned: bool = False,
) -> BoundaryDecision:
    """Full boundary-inference pipeline: ROI -> salient heads -> fusion -> profile -> selection.

    `roi_aligned` marks `attention` as already cropped to `window` (queries =
    window rows, keys = history + window keys), skipping re-extraction.
    """
    fusion = cfg.fusion if cfg.fusion is not None else FusionConfig.uniform(range(attention.layers))
    if roi_aligned:
        if attention.queries != window.length or attention.keys != window.key_count:
            raise WindowRangeError(
                f"ROI shape ({attention.queries}, {attention.keys}) does not match "
                f"window ({window.length}, {window.key_count})"
            )
        fused = _fuse_roi(attention, window, fusion)
    else:
        fused = fuse_layers(attention, window, fusion)
    profile = score_profile(fused, cfg.score_params, closed_end=closed_end)
    return select_boundary(profile)


def unmask_step(state: DecoderState, out: DenoiserOutput, tau: float) -> tuple[int, ...]:
    """Commit every masked active-block position with confidence > tau.

    When nothing clears the threshold, commits the single most confident
    masked position (liveness fallback, ties to the lower index).
    Increments nfe by one. Returns the committed absolute positions.
    """
    if not 0.0 <= tau <= 1.0:
        raise ArgumentError(f"tau must be in [0, 1], got {tau}")
    if state.active_end is None:
        raise StateError("no active block")
    start, end = state.frontier, state.active_end
    mask = state.mask_flags[start:end]
    if not mask.any():
        raise StateError("active block has no masked positions")
    conf = out.confidence
    if conf.shape[0] != end - start:
        raise ArgumentError(
            f"confidence covers {conf.shape[0]} positions, active block has {end - start}"
        )
    commit = mask & (conf > tau)
    if not commit.any():
        masked_conf = np.where(mask, conf, -1.0)
        commit = np.zeros_like(mask)
        commit[int(np.argmax(masked_conf))] = True
    local = np.nonzero(commit)[0]
    state.canvas[start + local] = out.tokens[local]
    state.mask_flags[start + local] = False
    state.nfe += 1
    return tuple(int(start + i) for i in local)


def decode_block(state: DecoderState, denoiser, boundary, cfg: DecodeConfig, trace=None) -> int:
    """Refine the block [frontier, frontier + block_len) to full commitment.

    Returns the number of unmask steps taken. `boundary` is a
    BoundaryDecision or a bare block length (scheduler-clipped tails).
    """
    block_len = boundary.block_len if isinstance(boundary, BoundaryDecision) else int(boundary)
    start = state.frontier
    end = start + block_len
    if end > len(state.canvas):
        raise WindowRangeError(f"block end {end} exceeds canvas {len(state.canvas)}")
    state.active_end = end
    steps = 0
    while state.mask_flags[start:end].any():
        out = denoiser.evaluate(state, start, end, steps)
        committed = unmask_step(state, out, cfg.threshold)
        if trace is not None:
            trace.append(TraceEvent(len(trace), "commit", committed, len(state.blocks)))
        steps += 1
    state.blocks.append((start, end))
    state.frontier = end
    state.active_end = None
    return steps


def decode_sequence(
    prompt: Sequence[int],
    denoiser,
    cfg: DecodeConfig,
    *,
    collect_trace: bool = False,
) -> DecodeReport:
    """Decode a full canvas: infer a boundary at each frontier, then refine the block.

    Stops at max_len or after the block in which `cfg.terminator` is
    committed. Final blocks are clipped at the canvas end, never padded.
    """
    state = DecoderState.initial(prompt, cfg.max_len)
    trace: Optional[list[TraceEvent]] = [] if collect_trace else None
    params = cfg.score_params
    truncated = False

    while state.frontier < cfg.max_len:
        remaining = cfg.max_len - state.frontier
        if cfg.scheduler == "fixed":
            if cfg.fixed_block > remaining:
                truncated = True
            block_len = min(cfg.fixed_block, remaining)
        elif cfg.scheduler == "oracle":
            if cfg.oracle_boundaries is None:
                raise ConfigError("oracle scheduler requires oracle_boundaries")
            nxt = min((b for b in cfg.oracle_boundaries if b > state.frontier), default=cfg.max_len)
            block_len = min(nxt - state.frontier, remaining, params.max_block)
        else:
            if remaining < params.min_block:
                # Tail shorter than any candidate: clip, no inference.
                truncated = True
                block_len = remaining
            else:
                length = min(params.max_block, remaining)
                window = WindowSpec(state.frontier, state.frontier + length, 0)
                closed = window.end == cfg.max_len
                if cfg.probe_mode == "dedicated_probe" or state.nfe == 0:
                    probe = denoiser.evaluate(
                        state, window.start, window.end, 0, attention_window=window
                    )
                    state.nfe += 1
                    state.probe_nfe += 1
                    if trace is not None:
                        trace.append(TraceEvent(len(trace), "probe", (), len(state.blocks)))
                    attention = probe.attention
                else:
                    attention = denoiser.attention_for(state, window)
                decision = infer_block(attention, window, cfg, closed_end=closed, roi_aligned=True)
                block_len = decision.block_len
        decode_block(state, denoiser, block_len, cfg, trace)
        if cfg.terminator is not None:
            start, end = state.blocks[-1]
            if np.any(state.canvas[start:end] == cfg.terminator):
                break

    lengths = tuple(end - start for start, end in state.blocks)
    base = state.nfe - state.probe_nfe
    ratio = state.probe_nfe / base if base > 0 else 0.0
    return DecodeReport(
        total_nfe=state.nfe,
        probe_nfe=state.probe_nfe,
        extra_nfe_ratio=ratio,
        block_lengths=lengths,
        block_length_mean=float(np.mean(lengths)) if lengths else 0.0,
        block_length_std=float(np.std(lengths)) if lengths else 0.0,
        prompt_len=state.prompt_len,
        generated=state.frontier - state.prompt_len,
        truncated=truncated,
        trace=tuple(trace) if trace is not None else None,
    )
