"""Attention telemetry tap for geoblock: capture ROI dumps from an instrumented denoiser."""

from .errors import CapabilityError, ExporterError, ExportError
from .session import ExportSession, capture_frontier, run_export
from .toymodel import MODEL_REGISTRY, ToyMaskedDenoiser, load_model, tokenize

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "ExportError",
    "ExporterError",
    "ExportSession",
    "MODEL_REGISTRY",
    "ToyMaskedDenoiser",
    "capture_frontier",
    "load_model",
    "run_export",
    "tokenize",
]
