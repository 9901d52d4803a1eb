"""Export sessions: decode with a toy denoiser, capture ROI attention per frontier.

The exporter is a telemetry tap. It never infers block boundaries itself; it
advances through fixed windows, and at each frontier runs one instrumented
forward pass, crops query rows to the frontier window and key columns to
[0, window end), and writes a geoblock dump (float32 per the dump format).
Dump paths are recorded in a manifest in decode order; session metadata
(model, layers, capture mode) goes to a sidecar file, keeping the manifest a
pure path list.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from geoblock.attention import AttentionTensor, WindowSpec
from geoblock.dumpio import write_dump, write_manifest

from .errors import CapabilityError, ExportError
from .toymodel import ToyMaskedDenoiser, load_model

MANIFEST_NAME = "manifest.txt"
SESSION_NAME = "session.txt"
CAPTURE_MODE = "forward"  # attention taken from the instrumented forward pass


@dataclass
class ExportSession:
    model_id: str
    layer_ids: tuple[int, ...]
    prompt: np.ndarray
    gen_length: int
    window_length: int
    out_dir: Path
    threshold: float = 0.9
    manifest: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.prompt = np.asarray(self.prompt, dtype=np.int64)
        self.layer_ids = tuple(int(i) for i in self.layer_ids)
        if not self.layer_ids:
            raise CapabilityError("at least one layer id required")
        if self.gen_length < 1 or self.window_length < 1:
            raise ExportError("gen_length and window_length must be >= 1")
        self._model: ToyMaskedDenoiser | None = None

    @property
    def total_len(self) -> int:
        return int(self.prompt.shape[0]) + self.gen_length

    def model(self) -> ToyMaskedDenoiser:
        if self._model is None:
            self._model = load_model(self.model_id)
            for lid in self.layer_ids:
                if lid < 0 or lid >= self._model.layers:
                    raise CapabilityError(
                        f"layer id {lid} beyond model depth {self._model.layers}"
                    )
        return self._model


def _captured_forward(model, canvas, mask_flags, layer_ids):
    """One forward pass with attention capture for the selected layers."""
    captured: dict[int, np.ndarray] = {}

    def hook(layer, att):
        if layer in layer_ids:
            captured[layer] = att.copy()

    model.register_attention_hook(hook)
    try:
        confidence, predicted = model.forward(canvas, mask_flags)
    finally:
        model.clear_hooks()
    missing = [lid for lid in layer_ids if lid not in captured]
    if missing:
        raise ExportError(f"forward pass produced no attention for layers {missing}")
    stack = np.stack([captured[lid] for lid in layer_ids])  # (L, H, T, T)
    return confidence, predicted, stack


def capture_frontier(session: ExportSession, frontier: int, canvas=None, mask_flags=None) -> Path:
    """Run one instrumented pass and dump the frontier window's ROI attention.

    Queries are cropped to [frontier, window end), keys to [0, window end);
    history_extent therefore equals the frontier position. Appends the dump
    to the session manifest and returns its path.
    """
    model = session.model()
    total = session.total_len
    if frontier < 0 or frontier >= total:
        raise ExportError(f"frontier {frontier} outside canvas [0, {total})")
    if canvas is None:
        canvas = np.zeros(total, dtype=np.int64)
        canvas[: session.prompt.shape[0]] = session.prompt
        mask_flags = np.ones(total, dtype=bool)
        mask_flags[: session.prompt.shape[0]] = False

    _, _, full = _captured_forward(model, canvas, mask_flags, session.layer_ids)
    end = min(frontier + session.window_length, total)
    window = WindowSpec(start=frontier, end=end, history_extent=frontier)
    roi = full[:, :, frontier:end, :end]
    if roi.shape[2] != window.length or roi.shape[3] != window.key_count:
        raise ExportError(
            f"captured ROI shape {roi.shape[2:]} does not match header "
            f"({window.length}, {window.key_count})"
        )
    tensor = AttentionTensor(np.ascontiguousarray(roi))

    session.out_dir.mkdir(parents=True, exist_ok=True)
    name = f"frontier_{frontier:05d}.gba"
    write_dump(session.out_dir / name, tensor, window)
    session.manifest.append(name)
    return session.out_dir / name


def run_export(session: ExportSession) -> list[Path]:
    """Decode the canvas in fixed windows, capturing one dump per frontier.

    Threshold-parallel commitment with a top-1 fallback keeps the loop live;
    scheduling stays fixed because the exporter takes no boundary decisions.
    """
    model = session.model()
    total = session.total_len
    canvas = np.zeros(total, dtype=np.int64)
    canvas[: session.prompt.shape[0]] = session.prompt
    mask_flags = np.ones(total, dtype=bool)
    mask_flags[: session.prompt.shape[0]] = False

    paths = []
    frontier = int(session.prompt.shape[0])
    while frontier < total:
        paths.append(capture_frontier(session, frontier, canvas, mask_flags))
        end = min(frontier + session.window_length, total)
        while mask_flags[frontier:end].any():
            confidence, predicted = model.forward(canvas, mask_flags)
            window_mask = mask_flags.copy()
            window_mask[:frontier] = False
            window_mask[end:] = False
            commit = window_mask & (confidence > session.threshold)
            if not commit.any():
                conf = np.where(window_mask, confidence, -1.0)
                commit = np.zeros_like(window_mask)
                commit[int(np.argmax(conf))] = True
            canvas[commit] = predicted[commit]
            mask_flags[commit] = False
        frontier = end

    write_manifest(session.out_dir / MANIFEST_NAME, session.manifest)
    meta = [
        f"model: {session.model_id}",
        f"layers: {','.join(str(i) for i in session.layer_ids)}",
        f"window_length: {session.window_length}",
        f"capture_mode: {CAPTURE_MODE}",
        f"dumps: {len(session.manifest)}",
    ]
    (session.out_dir / SESSION_NAME).write_text("\n".join(meta) + "\n", encoding="utf-8")
    return paths
