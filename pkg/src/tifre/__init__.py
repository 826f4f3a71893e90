"""Question-guided video frame reduction.

Select the frames of a video most relevant to a textual question by
comparing text and image embeddings in a shared space, then fold the
information of every unselected frame into its most similar key frame
by weighted pixel averaging. The result is a short frame sequence plus
a manifest recording exactly how it was produced.
"""

from .embedding import (
    BackendDescriptor,
    EmbeddingCache,
    FrameEmbeddings,
    LocalOnnxBackend,
    MockBackend,
    RemoteBackend,
    embed_images,
    embed_text,
)
from .errors import (
    BackendError,
    ConfigError,
    ContractViolation,
    DegenerateVectorError,
    DimensionError,
    EmptyInputError,
    FrameDecodeError,
    LLMError,
    MergeDimensionError,
    PromptParseError,
    ScenarioError,
    StageError,
    TifreError,
    ToolNotFoundError,
)
from .evalharness import EvalReport, ScenarioSpec, evaluate, generate_scenario
from .manifest import RunManifest
from .merging import MatchAssignment, MergedFrameSet, match_frames, merge_frames
from .pipeline import RunConfig, run_tifre
from .prompting import (
    LlmConfig,
    PromptSet,
    Question,
    build_rewrite_request,
    fallback_extract_prompts,
    parse_llm_output,
)
from .selection import Selection, fixed_fps_select, select_top_k
from .similarity import cosine_similarity, saliency, similarity_matrix
from .video_io import Frame, extract_frames, write_outputs

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "BackendError",
    "ConfigError",
    "ContractViolation",
    "DegenerateVectorError",
    "DimensionError",
    "EmbeddingCache",
    "EmptyInputError",
    "EvalReport",
    "Frame",
    "FrameDecodeError",
    "FrameEmbeddings",
    "LLMError",
    "LlmConfig",
    "LocalOnnxBackend",
    "MatchAssignment",
    "MergeDimensionError",
    "MergedFrameSet",
    "MockBackend",
    "PromptParseError",
    "PromptSet",
    "Question",
    "RemoteBackend",
    "RunConfig",
    "RunManifest",
    "ScenarioError",
    "ScenarioSpec",
    "Selection",
    "StageError",
    "TifreError",
    "ToolNotFoundError",
    "build_rewrite_request",
    "cosine_similarity",
    "embed_images",
    "embed_text",
    "evaluate",
    "extract_frames",
    "fallback_extract_prompts",
    "fixed_fps_select",
    "generate_scenario",
    "match_frames",
    "merge_frames",
    "parse_llm_output",
    "run_tifre",
    "saliency",
    "select_top_k",
    "similarity_matrix",
    "write_outputs",
    "__version__",
]
