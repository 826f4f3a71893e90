"""End-to-end orchestration: frames in, merged key frames + manifest out.

Stage order: extract -> prompts -> embed -> select -> match -> merge ->
write. Each stage is timed and failures are rethrown as StageError with
the stage name, original exception chained as the cause; the output
directory is never left half-written (see video_io.write_outputs).

Strategy "tifre" scores frames against text prompts; "fixed-fps" picks
evenly spaced indices and skips prompting entirely. Both feed the same
matching and merging path.
"""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import PIL

from . import embedding, video_io
from .errors import ConfigError, LLMError, PromptParseError, StageError
from .llm_client import ChatClient, TranscriptClient
from .manifest import RunManifest
from .merging import MERGE_MODES, match_frames, merge_frames
from .prompting import (
    LlmConfig,
    PromptSet,
    Question,
    build_rewrite_request,
    fallback_extract_prompts,
    parse_llm_output,
)
from .selection import fixed_fps_select, select_top_k
from .similarity import saliency, similarity_matrix

STRATEGIES = ("tifre", "fixed-fps")

# Relative saliency threshold applied when the user does not set one.
DEFAULT_THRESHOLD = 0.8
DEFAULT_MAX_FRAMES = 10
BACKEND_KINDS = ("mock", "remote", "local-model")


@dataclass
class RunConfig:
    """Everything one run needs; validate() before use."""

    input: str
    out_dir: str
    question: str | None = None
    options: tuple[str, ...] = ()
    prompts: tuple[str, ...] | None = None
    max_frames: int = DEFAULT_MAX_FRAMES
    threshold: float | None = None
    strategy: str = "tifre"
    merge_mode: str = "normalized"
    backend_kind: str = "mock"
    backend_dim: int = 64
    backend_url: str = ""
    image_model: str = ""
    text_model: str = ""
    tokenizer_dir: str = ""
    llm: LlmConfig = field(default_factory=LlmConfig)
    llm_transcript: str = ""
    allow_fallback: bool = True
    fps: float = 1.0
    working_res: tuple[int, int] = (224, 224)
    seed: int = 0
    cache_dir: str = ""
    contact_sheet: bool = False
    decoder: str = "ffmpeg"

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.merge_mode not in MERGE_MODES:
            raise ConfigError(f"merge mode must be one of {MERGE_MODES}, got {self.merge_mode!r}")
        if self.backend_kind not in BACKEND_KINDS:
            raise ConfigError(f"backend must be one of {BACKEND_KINDS}, got {self.backend_kind!r}")
        if self.max_frames < 1:
            raise ConfigError(f"max frame count must be >= 1, got {self.max_frames}")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.fps <= 0:
            raise ConfigError(f"fps must be > 0, got {self.fps}")
        if self.working_res[0] < 1 or self.working_res[1] < 1:
            raise ConfigError(f"working resolution must be positive, got {self.working_res}")
        if self.strategy == "fixed-fps" and self.threshold not in (None, 0, 0.0):
            raise ConfigError("fixed-fps selection is content-independent; threshold not allowed")
        if self.strategy == "tifre" and not self.prompts and not self.question:
            raise ConfigError("tifre strategy needs --question or explicit prompts")
        if self.prompts is not None:
            try:
                PromptSet(tuple(self.prompts), source="user-supplied")
            except PromptParseError as exc:
                raise ConfigError(f"invalid prompt list: {exc}") from exc
        if self.backend_kind == "remote" and not self.backend_url:
            raise ConfigError("remote backend needs --backend-url")
        if self.backend_kind == "local-model" and not self.image_model:
            raise ConfigError("local-model backend needs --image-model")

    def resolved_threshold(self) -> float:
        if self.threshold is not None:
            return float(self.threshold)
        return DEFAULT_THRESHOLD if self.strategy == "tifre" else 0.0


def build_backend(cfg: RunConfig):
    if cfg.backend_kind == "mock":
        return embedding.MockBackend(dim=cfg.backend_dim, seed=cfg.seed)
    if cfg.backend_kind == "remote":
        return embedding.RemoteBackend(url=cfg.backend_url, dim=cfg.backend_dim)
    return embedding.LocalOnnxBackend(
        image_model=cfg.image_model,
        dim=cfg.backend_dim,
        text_model=cfg.text_model or None,
        tokenizer_dir=cfg.tokenizer_dir or None,
    )


def _acquire_prompts(cfg: RunConfig, chat) -> PromptSet:
    if cfg.prompts is not None:
        return PromptSet(tuple(cfg.prompts), source="user-supplied")
    q = Question(cfg.question, tuple(cfg.options))
    client = chat
    if client is None:
        if cfg.llm_transcript:
            client = TranscriptClient(cfg.llm_transcript)
        elif cfg.llm.endpoint:
            client = ChatClient(cfg.llm)
    if client is None:
        return fallback_extract_prompts(q)
    try:
        return parse_llm_output(client.complete(build_rewrite_request(q, cfg.llm)))
    except (LLMError, PromptParseError):
        if not cfg.allow_fallback:
            raise
        return fallback_extract_prompts(q)


def _timed(name: str, timings: dict, fn: Callable):
    start = time.perf_counter()
    try:
        return fn()
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, str(exc)) from exc
    finally:
        timings[name] = time.perf_counter() - start


def run_tifre(cfg: RunConfig, backend=None, chat=None) -> RunManifest:
    """Run the full reduction; returns the manifest written to cfg.out_dir.

    `backend` and `chat` override the instances built from cfg (used by
    tests to inject planted or canned implementations).
    """
    cfg.validate()
    timings: dict[str, float] = {}
    threshold = cfg.resolved_threshold()

    frames = _timed(
        "extract",
        timings,
        lambda: video_io.extract_frames(
            cfg.input, fps=cfg.fps, working_res=cfg.working_res, decoder=cfg.decoder
        ),
    )
    n = len(frames)

    prompt_set: PromptSet | None = None
    if cfg.strategy == "tifre":
        prompt_set = _timed("prompts", timings, lambda: _acquire_prompts(cfg, chat))

    if backend is None:
        backend = _timed("backend", timings, lambda: build_backend(cfg))
    cache = None
    if cfg.cache_dir:
        cache = embedding.EmbeddingCache(cfg.cache_dir, backend.descriptor.identity)

    def _embed():
        frame_embs = embedding.embed_images(frames, backend, cache)
        text_vecs = embedding.embed_text(prompt_set, backend) if prompt_set else None
        return frame_embs, text_vecs

    frame_embs, text_vecs = _timed("embed", timings, _embed)

    def _select():
        if cfg.strategy == "fixed-fps":
            return fixed_fps_select(n, cfg.max_frames)
        sims = similarity_matrix(list(text_vecs), list(frame_embs.vectors))
        return select_top_k(saliency(sims), cfg.max_frames, threshold)

    sel = _timed("select", timings, _select)
    asg = _timed("match", timings, lambda: match_frames(frame_embs, sel))
    merged = _timed(
        "merge", timings, lambda: merge_frames(frames, sel, asg, mode=cfg.merge_mode)
    )

    tool_versions = {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pillow": PIL.__version__,
    }
    if Path(cfg.input).is_file():
        version = video_io.decoder_version(cfg.decoder)
        if version:
            tool_versions[cfg.decoder] = version

    manifest = RunManifest(
        question=cfg.question or "",
        strategy=cfg.strategy,
        backend=backend.descriptor.to_dict(),
        coarse_fps=float(cfg.fps),
        working_res=[int(cfg.working_res[0]), int(cfg.working_res[1])],
        num_frames=n,
        max_frames=cfg.max_frames,
        threshold=threshold,
        merge_mode=cfg.merge_mode,
        saliency=[float(s) for s in sel.scores],
        key_indices=[int(i) for i in sel.key_indices],
        assignments=[
            {"non_key": int(nk), "key": int(k), "weight": float(w)}
            for nk, (k, w) in sorted(asg.pairs.items())
        ],
        prompts=list(prompt_set.prompts) if prompt_set else None,
        prompt_source=prompt_set.source if prompt_set else None,
        tool_versions=tool_versions,
        timings_sec=timings,
        seed=cfg.seed,
        source_id=str(cfg.input),
    )
    _timed(
        "write",
        timings,
        lambda: video_io.write_outputs(
            merged, manifest, cfg.out_dir, contact_sheet=cfg.contact_sheet
        ),
    )
    return manifest
