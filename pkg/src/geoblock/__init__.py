"""GeoBlock: attention-geometry block boundary inference for block-diffusion decoding."""

from ._kernels import BACKEND
from .attention import (
    AttentionTensor,
    FusedMap,
    FusionConfig,
    WindowSpec,
    extract_roi,
    fuse_layers,
    head_saliency,
    select_salient_heads,
)
from .decode import (
    DecodeConfig,
    DecodeReport,
    DecoderState,
    DenoiserOutput,
    decode_block,
    decode_sequence,
    infer_block,
    unmask_step,
)
from .dumpio import read_dump, read_manifest, write_dump, write_manifest
from .scoring import (
    BoundaryDecision,
    RegionPartition,
    ScoreParams,
    ScoreProfile,
    closure_score,
    mass,
    region_partition,
    score_profile,
    select_boundary,
)
from .synth import (
    PlantedStructureSpec,
    SimDenoiser,
    SyntheticWorld,
    boundary_recovery,
    gen_attention,
    simulate_world,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionTensor",
    "BACKEND",
    "BoundaryDecision",
    "DecodeConfig",
    "DecodeReport",
    "DecoderState",
    "DenoiserOutput",
    "FusedMap",
    "FusionConfig",
    "PlantedStructureSpec",
    "RegionPartition",
    "ScoreParams",
    "ScoreProfile",
    "SimDenoiser",
    "SyntheticWorld",
    "WindowSpec",
    "boundary_recovery",
    "closure_score",
    "decode_block",
    "decode_sequence",
    "extract_roi",
    "fuse_layers",
    "gen_attention",
    "head_saliency",
    "infer_block",
    "mass",
    "read_dump",
    "read_manifest",
    "region_partition",
    "score_profile",
    "select_boundary",
    "select_salient_heads",
    "simulate_world",
    "unmask_step",
    "write_dump",
    "write_manifest",
]
