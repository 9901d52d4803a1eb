"""Dependency-closure scoring and right-shift boundary selection.

For a frontier window of length L and a candidate split x, the window-local
partition is

    H = history columns + {1..x-m},   C = {x-m+1..x},   F = {x+1..L},

and with S_{U->V} the attention mass flowing from rows U into columns V, the
closure score of x is

    score(x) = (S_CC + alpha * S_CH) / (S_CC + alpha * S_CH + S_CF).

Scores live in [0, 1]; a denominator at or below DEGENERACY_EPS marks the
candidate degenerate (no dependency evidence) and scores it 0. Selection
takes the rightmost candidate within `delta` of the maximum score; an
all-degenerate profile falls back to the minimum block length.

Coordinates are window-local and 1-based: window tokens are 1..L and history
columns (when the map carries them) are 1-h..0, so a single affine map covers
both (array column = history_extent + t - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .attention import FusedMap, WindowSpec
from .errors import ArgumentError, ConfigError, DataError, WindowRangeError

DEGENERACY_EPS = 1e-12


@dataclass(frozen=True)
class ScoreParams:
    """Closure-score knobs: anchoring alpha, block bounds, right-shift tolerance delta."""

    alpha: float = 0.5
    min_block: int = 4
    delta: float = 0.1
    max_block: int = 32

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError(f"delta must be in [0, 1], got {self.delta}")
        if self.min_block < 1:
            raise ConfigError(f"min_block must be >= 1, got {self.min_block}")
        if self.max_block < self.min_block:
            raise ConfigError(
                f"max_block {self.max_block} smaller than min_block {self.min_block}"
            )


@dataclass(frozen=True)
class RegionPartition:
    """Past / candidate / future index sets for one split (window-local coords)."""

    past: frozenset[int]
    candidate: frozenset[int]
    future: frozenset[int]


def region_partition(
    window_len: int, x: int, m: int, history_cols: Iterable[int] = ()
) -> RegionPartition:
    """Partition for split x: H = history + {1..x-m}, C = {x-m+1..x}, F = {x+1..L}."""
    if m < 1 or window_len < 1:
        raise WindowRangeError(f"need m >= 1 and window_len >= 1, got m={m}, L={window_len}")
    if x < m or x > window_len - 1:
        raise WindowRangeError(
            f"split {x} outside candidate range [{m}, {window_len - 1}]"
        )
    past = frozenset(int(c) for c in history_cols) | frozenset(range(1, x - m + 1))
    return RegionPartition(
        past=past,
        candidate=frozenset(range(x - m + 1, x + 1)),
        future=frozenset(range(x + 1, window_len + 1)),
    )


def _index_arrays(a, rows, cols):
    """Map 1-based window-local (row, col) index sets onto array indices."""
    if isinstance(a, FusedMap):
        arr = a.weights
        h = a.history_extent
    else:
        arr = np.asarray(a, dtype=np.float64)
        h = 0
    n_rows, n_cols = arr.shape
    r = np.asarray(sorted(int(i) for i in rows), dtype=np.int64) - 1
    c = np.asarray(sorted(int(j) for j in cols), dtype=np.int64) + (h - 1)
    if r.size and (r.min() < 0 or r.max() >= n_rows):
        raise WindowRangeError(f"row index outside [1, {n_rows}]")
    if c.size and (c.min() < 0 or c.max() >= n_cols):
        raise WindowRangeError(f"column index outside [{1 - h}, {n_cols - h}]")
    return arr, r, c


def mass(a, rows: Iterable[int], cols: Iterable[int]) -> float:
    """Accumulated attention mass S_{rows->cols}; 0 for an empty row or column set.

    `a` is a FusedMap (history columns addressed as 1-h..0) or a bare matrix
    (no history, rows and cols both 1-based).
    """
    arr, r, c = _index_arrays(a, rows, cols)
    if r.size == 0 or c.size == 0:
        return 0.0
    return float(arr[np.ix_(r, c)].sum(dtype=np.float64))


def closure_score(s_cc: float, s_ch: float, s_cf: float, alpha: float) -> float:
    """(S_CC + alpha*S_CH) / (S_CC + alpha*S_CH + S_CF); 0 when the denominator degenerates."""
    if not 0.0 <= alpha <= 1.0:
        raise ArgumentError(f"alpha must be in [0, 1], got {alpha}")
    for name, v in (("s_cc", s_cc), ("s_ch", s_ch), ("s_cf", s_cf)):
        if not np.isfinite(v):
            raise DataError(f"{name} is not finite")
        if v < 0.0:
            raise DataError(f"{name} must be nonnegative, got {v}")
    anchored = s_cc + alpha * s_ch
    denom = anchored + s_cf
    if denom <= DEGENERACY_EPS:
        return 0.0
    return anchored / denom


@dataclass(frozen=True)
class ScoreCandidate:
    split: int
    score: float
    s_cc: float
    s_ch: float
    s_cf: float
    degenerate: bool


@dataclass(frozen=True)
class ScoreProfile:
    """Closure scores over all candidate splits of one window."""

    candidates: tuple[ScoreCandidate, ...]
    window: WindowSpec
    params: ScoreParams

    def splits(self) -> tuple[int, ...]:
        return tuple(c.split for c in self.candidates)

    def scores(self) -> tuple[float, ...]:
        return tuple(c.score for c in self.candidates)

    def to_table(self) -> str:
        """Tabular text export, one row per candidate (the score-profile curve)."""
        lines = ["x,score,s_cc,s_ch,s_cf"]
        for c in self.candidates:
            lines.append(
                f"{c.split},{c.score:.12g},{c.s_cc:.12g},{c.s_ch:.12g},{c.s_cf:.12g}"
            )
        return "\n".join(lines) + "\n"


def candidate_splits(window_len: int, params: ScoreParams, closed_end: bool) -> list[int]:
    """Candidate split positions {m .. min(L, B_max)}, dropping the empty-future
    terminal x = L on open windows unless it is the only candidate."""
    m = params.min_block
    if window_len < m:
        raise WindowRangeError(f"window length {window_len} shorter than min_block {m}")
    top = min(window_len, params.max_block)
    xs = list(range(m, top + 1))
    if top == window_len and not closed_end and len(xs) > 1:
        xs.pop()
    return xs


def _resolve_history(a: FusedMap, history_cols) -> int:
    """Number of trailing history columns to fold into H (the rest are dropped)."""
    h = a.history_extent
    if history_cols is None:
        return h
    cols = sorted(int(c) for c in history_cols)
    if not cols:
        return 0
    if cols[0] < 1 - h or cols[-1] > 0:
        raise ConfigError(f"history columns must lie in [{1 - h}, 0]")
    n = len(cols)
    if cols != list(range(1 - n, 1)):
        raise ConfigError("history columns must form a contiguous suffix ending at 0")
    return n


def score_profile(
    a: FusedMap,
    params: ScoreParams,
    history_cols=None,
    *,
    closed_end: bool = False,
) -> ScoreProfile:
    """Closure score for every candidate split of the fused map's window.

    Masses are accumulated incrementally (per-row prefix sums, O(L * K) total)
    in double precision; see tests for the naive-recomputation oracle.
    `history_cols` defaults to all of the map's history columns; passing a
    contiguous suffix {1-n..0} folds only those into H and drops the rest.
    `closed_end` declares that nothing exists beyond the window's key range,
    admitting the terminal full-window candidate (empty future => score 1).
    """
    n_hist = _resolve_history(a, history_cols)
    weights = a.weights
    if n_hist < a.history_extent:
        weights = weights[:, a.history_extent - n_hist :]
    xs = candidate_splits(a.rows, params, closed_end)
    splits = np.asarray(xs, dtype=np.int64)
    s_cc, s_ch, s_cf = _kernels.profile_masses(weights, n_hist, params.min_block, splits)

    anchored = s_cc + params.alpha * s_ch
    denom = anchored + s_cf
    degenerate = denom <= DEGENERACY_EPS
    scores = np.where(degenerate, 0.0, anchored / np.where(degenerate, 1.0, denom))

    cands = tuple(
        ScoreCandidate(
            split=int(x),
            score=float(s),
            s_cc=float(cc),
            s_ch=float(ch),
            s_cf=float(cf),
            degenerate=bool(d),
        )
        for x, s, cc, ch, cf, d in zip(xs, scores, s_cc, s_ch, s_cf, degenerate)
    )
    return ScoreProfile(candidates=cands, window=a.origin, params=params)


@dataclass(frozen=True)
class BoundaryDecision:
    """Selected split and the bookkeeping behind it."""

    split: int
    block_len: int
    score_at_split: float
    max_score: float
    threshold: float
    degenerate: bool


def select_boundary(profile: ScoreProfile) -> BoundaryDecision:
    """Rightmost non-degenerate candidate within delta of the maximum score.

    All-degenerate profiles fall back to min_block with the degenerate flag set.
    """
    if not profile.candidates:
        raise ArgumentError("empty score profile")
    delta = profile.params.delta
    live = [c for c in profile.candidates if not c.degenerate]
    if not live:
        m = profile.params.min_block
        return BoundaryDecision(
            split=m,
            block_len=m,
            score_at_split=0.0,
            max_score=0.0,
            threshold=-delta,
            degenerate=True,
        )
    max_score = max(c.score for c in live)
    tau = max_score - delta
    chosen = max((c for c in live if c.score >= tau), key=lambda c: c.split)
    return BoundaryDecision(
        split=chosen.split,
        block_len=chosen.split,
        score_at_split=chosen.score,
        max_score=max_score,
        threshold=tau,
        degenerate=False,
    )
