"""Training-free zero-shot video action recognition.

Classes are described by LLM-generated text (steps, description, scene
context, objects), both descriptors and uniformly sampled video frames are
embedded with a frozen contrastive vision-language encoder pair, and a
video is assigned the class whose averaged text embedding is most cosine-
similar to its averaged frame embedding.
"""

from .assembly import DescriptorConfig, DescriptorKind, PromptBatch, assemble, base_texts
from .backend import EncoderSpec, FileBackend, OnnxBackend, frame_key, load_backend
from .classifier import (
    ClassEmbedding,
    Prediction,
    class_embedding,
    predict,
    topk_hit,
    video_embedding,
)
from .descriptors import (
    DescriptorCache,
    DescriptorSet,
    GenerationResult,
    generate_all,
    generate_context,
    generate_decomposition,
    generate_description,
)
from .evaluation import (
    AblationTable,
    EvalReport,
    RunConfig,
    ablate_backbone_frames,
    ablate_descriptors,
    ablate_llm,
    ablate_prompt_grid,
    evaluate,
)
from .labels import ActionClass, LabelSpace, normalize_label
from .llm import HttpChatTransport, LlmConfig
from .manifest import DatasetManifest, load_manifest
from .video import VideoSample, load_sample, uniform_indices

__version__ = "0.1.0"
