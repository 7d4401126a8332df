"""One-shot exporter: dual-encoder checkpoints to ONNX towers plus golden fixtures."""

from .arch import CONFIGS, DualEncoder, load_dual_encoder, random_state_dict
from .export import (
    ExportManifest,
    ExportVerificationError,
    export,
    golden_images,
    verify_export,
)

__version__ = "0.1.0"
