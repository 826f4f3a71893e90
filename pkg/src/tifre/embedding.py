"""Text and image embeddings behind one backend abstraction.

Three interchangeable backends produce vectors in a shared space:

- MockBackend: deterministic hash-derived vectors, plus a "planted"
  registry mapping chosen contents to chosen vectors for test scenarios.
  The whole test suite runs on this backend.
- RemoteBackend: HTTP embedding service
  (POST {inputs, modality} -> {vectors}; images base64-encoded PNG).
- LocalOnnxBackend: ONNX image/text encoder pair loaded from disk with a
  sidecar preprocessing descriptor; optional dependency, lazily imported.

Every backend exposes a descriptor (kind, dim, identity) and two methods:
embed_texts(list[str]) and embed_images(list[ndarray]) returning (n, dim)
float64 arrays aligned with the input order.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import tempfile
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .errors import BackendError, ContractViolation

MIN_DIM = 8


@dataclass(frozen=True)
class BackendDescriptor:
    """What produced the vectors: backend kind, dimension, and identity."""

    kind: str
    dim: int
    identity: str

    def __post_init__(self):
        if self.kind not in ("mock", "remote", "local-model"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.dim < MIN_DIM:
            raise ValueError(f"embedding dim must be >= {MIN_DIM}, got {self.dim}")
        if not self.identity:
            raise ValueError("backend identity is empty")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "identity": self.identity}


@dataclass(eq=False)
class FrameEmbeddings:
    """(N, dim) frame vectors aligned by frame index."""

    vectors: np.ndarray
    backend: BackendDescriptor


def text_content(text: str) -> bytes:
    """Canonical content bytes of a text input (keys mock + cache)."""
    return b"txt:" + text.encode("utf-8")


def image_content(pixels: np.ndarray) -> bytes:
    """Canonical content bytes of an image: shape header + raw pixels."""
    arr = np.ascontiguousarray(pixels)
    shape = "x".join(str(s) for s in arr.shape)
    return f"img:{shape}:{arr.dtype.str}:".encode("ascii") + arr.tobytes()


def _check_image(pixels, index: int) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(
            f"frame {index}: expected H x W x 3 uint8 pixels, got shape {arr.shape} dtype {arr.dtype}"
        )
    return arr


class MockBackend:
    """Pure function of (seed, content bytes); no model, no network.

    Unplanted content maps to a vector whose components are derived from
    SHA-256 of (seed, content), uniform in [-1, 1). Planted content
    returns the registered vector exactly, letting tests construct known
    similarity structure (e.g. a frame collinear with a prompt).
    """

    def __init__(self, dim: int = 64, seed: int = 0, planted: dict[bytes, np.ndarray] | None = None):
        self.descriptor = BackendDescriptor("mock", dim, f"mock:seed={seed}:dim={dim}")
        self._seed_bytes = str(seed).encode("ascii")
        self._planted: dict[bytes, np.ndarray] = {}
        for content, vec in (planted or {}).items():
            self._plant(content, vec)

    def _plant(self, content: bytes, vector) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.descriptor.dim,):
            raise ValueError(f"planted vector shape {vec.shape} != ({self.descriptor.dim},)")
        self._planted[content] = vec.copy()

    def plant_text(self, text: str, vector) -> None:
        self._plant(text_content(text), vector)

    def plant_image(self, pixels, vector) -> None:
        self._plant(image_content(np.asarray(pixels)), vector)

    def _vector_for(self, content: bytes) -> np.ndarray:
        hit = self._planted.get(content)
        if hit is not None:
            return hit.copy()
        return _hash_vector(self._seed_bytes, content, self.descriptor.dim)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._vector_for(text_content(t)) for t in texts])

    def embed_images(self, images: Sequence[np.ndarray]) -> np.ndarray:
        contents = [image_content(_check_image(img, i)) for i, img in enumerate(images)]
        return np.stack([self._vector_for(c) for c in contents])


def _hash_vector(seed_bytes: bytes, content: bytes, dim: int) -> np.ndarray:
    """Expand SHA-256 of (seed, content) into dim floats in [-1, 1)."""
    out = np.empty(dim, dtype=np.float64)
    base = hashlib.sha256(seed_bytes + b"|" + content).digest()
    filled = 0
    counter = 0
    while filled < dim:
        block = hashlib.sha256(base + counter.to_bytes(4, "big")).digest()
        for off in range(0, 32, 8):
            if filled >= dim:
                break
            u = int.from_bytes(block[off : off + 8], "big")
            out[filled] = u / 2.0**63 - 1.0
            filled += 1
        counter += 1
    return out


def png_bytes(pixels: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


class RemoteBackend:
    """HTTP embedding service; inputs are chunked, output order preserved."""

    def __init__(
        self,
        url: str,
        dim: int,
        timeout: float = 30.0,
        batch_size: int = 16,
        session: requests.Session | None = None,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.descriptor = BackendDescriptor("remote", dim, url)
        self.timeout = timeout
        self.batch_size = batch_size
        self._session = session or requests.Session()

    def _post_batched(self, inputs: list, modality: str) -> np.ndarray:
        chunks = []
        for start in range(0, len(inputs), self.batch_size):
            chunk = inputs[start : start + self.batch_size]
            try:
                resp = self._session.post(
                    self.descriptor.identity,
                    json={"inputs": chunk, "modality": modality},
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                payload = resp.json()
            except (requests.RequestException, ValueError) as exc:
                raise BackendError(f"embedding service failed: {exc}") from exc
            try:
                vectors = np.asarray(payload["vectors"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise BackendError(f"malformed embedding response: {exc}") from exc
            if vectors.ndim != 2 or vectors.shape[0] != len(chunk):
                raise BackendError(
                    f"embedding response shape {vectors.shape} for {len(chunk)} inputs"
                )
            chunks.append(vectors)
        return np.vstack(chunks)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        return self._post_batched(list(texts), "text")

    def embed_images(self, images: Sequence[np.ndarray]) -> np.ndarray:
        blobs = [
            base64.b64encode(png_bytes(_check_image(img, i))).decode("ascii")
            for i, img in enumerate(images)
        ]
        return self._post_batched(blobs, "image")


@dataclass(frozen=True)
class PreprocessSpec:
    """Sidecar image-preprocessing descriptor shipped with a local model.

    Not hard-coded: resolution, normalization constants, and tensor layout
    all come from the model's own JSON file, keeping the artifact
    model-agnostic.
    """

    input_size: int | tuple[int, int]
    mean: tuple[float, float, float]
    std: tuple[float, float, float]
    layout: str

    def __post_init__(self):
        size = self.input_size
        if isinstance(size, int):
            size = (size, size)
        object.__setattr__(self, "input_size", tuple(size))
        if self.layout not in ("NCHW", "NHWC"):
            raise ValueError(f"layout must be NCHW or NHWC, got {self.layout!r}")
        if len(self.input_size) != 2 or min(self.input_size) < 1:
            raise ValueError(f"bad inputSize {self.input_size!r}")
        if len(self.mean) != 3 or len(self.std) != 3 or any(s <= 0 for s in self.std):
            raise ValueError("mean/std must be 3 positive-std channel values")

    @classmethod
    def from_json(cls, path: str | Path) -> "PreprocessSpec":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        size = data["inputSize"]
        return cls(
            input_size=size if isinstance(size, int) else tuple(size),
            mean=tuple(data["mean"]),
            std=tuple(data["std"]),
            layout=data.get("layout", "NCHW"),
        )


def preprocess_image(pixels: np.ndarray, spec: PreprocessSpec) -> np.ndarray:
    """Resize shorter side, center-crop, scale, normalize, lay out. Pure."""
    from PIL import Image

    tw, th = spec.input_size
    img = Image.fromarray(pixels)
    scale = max(tw / img.width, th / img.height)
    resized = img.resize(
        (max(tw, round(img.width * scale)), max(th, round(img.height * scale))),
        Image.BICUBIC,
    )
    left = (resized.width - tw) // 2
    top = (resized.height - th) // 2
    cropped = resized.crop((left, top, left + tw, top + th))
    arr = np.asarray(cropped, dtype=np.float32) / 255.0
    arr = (arr - np.asarray(spec.mean, dtype=np.float32)) / np.asarray(spec.std, dtype=np.float32)
    if spec.layout == "NCHW":
        arr = arr.transpose(2, 0, 1)
    return arr


class LocalOnnxBackend:
    """ONNX-format image/text encoder pair on the local filesystem.

    Expects an image model, optionally a text model plus a tokenizer
    directory, and a preprocessing descriptor (default sidecar path:
    <image_model> + ".preprocess.json"). Requires the optional
    dependencies onnxruntime and transformers.
    """

    def __init__(
        self,
        image_model: str | Path,
        dim: int,
        text_model: str | Path | None = None,
        tokenizer_dir: str | Path | None = None,
        preprocess: PreprocessSpec | str | Path | None = None,
        batch_size: int = 16,
    ):
        try:
            import onnxruntime
        except ImportError as exc:
            raise BackendError(
                "onnxruntime is not installed; install the 'local' extra "
                "(pip install tifre[local]) to use a local model backend"
            ) from exc
        image_model = Path(image_model)
        if not image_model.exists():
            raise BackendError(f"model file not found: {image_model}")
        if preprocess is None:
            preprocess = Path(str(image_model) + ".preprocess.json")
        if not isinstance(preprocess, PreprocessSpec):
            if not Path(preprocess).exists():
                raise BackendError(f"preprocessing descriptor not found: {preprocess}")
            preprocess = PreprocessSpec.from_json(preprocess)
        self.preprocess = preprocess
        self.batch_size = batch_size
        self.descriptor = BackendDescriptor("local-model", dim, str(image_model))
        opts = onnxruntime.SessionOptions()
        self._image_session = onnxruntime.InferenceSession(str(image_model), opts)
        self._text_session = None
        self._tokenizer = None
        if text_model is not None:
            text_model = Path(text_model)
            if not text_model.exists():
                raise BackendError(f"model file not found: {text_model}")
            self._text_session = onnxruntime.InferenceSession(str(text_model), opts)
            if tokenizer_dir is None:
                raise BackendError("a text model requires a tokenizer directory")
            try:
                from transformers import AutoTokenizer
            except ImportError as exc:
                raise BackendError(
                    "transformers is not installed; install the 'local' extra "
                    "(pip install tifre[local]) to embed text locally"
                ) from exc
            self._tokenizer = AutoTokenizer.from_pretrained(str(tokenizer_dir))

    def embed_images(self, images: Sequence[np.ndarray]) -> np.ndarray:
        batches = []
        arrays = [preprocess_image(_check_image(img, i), self.preprocess) for i, img in enumerate(images)]
        input_name = self._image_session.get_inputs()[0].name
        for start in range(0, len(arrays), self.batch_size):
            batch = np.stack(arrays[start : start + self.batch_size])
            (out,) = self._image_session.run(None, {input_name: batch})
            batches.append(np.asarray(out, dtype=np.float64))
        return np.vstack(batches)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if self._text_session is None or self._tokenizer is None:
            raise BackendError("local backend has no text model configured")
        enc = self._tokenizer(list(texts), padding=True, return_tensors="np")
        feeds = {
            inp.name: enc[inp.name]
            for inp in self._text_session.get_inputs()
            if inp.name in enc
        }
        (out,) = self._text_session.run(None, feeds)
        return np.asarray(out, dtype=np.float64)


class EmbeddingCache:
    """Frame-embedding cache keyed by (backend identity, content hash).

    Lives beside the run manifest so re-running a video with a different
    question reuses the frame vectors (the per-question cost is text-side
    only). A cache written under a different backend identity is ignored.
    """

    FILENAME = "embeddings.cache.npz"

    def __init__(self, directory: str | Path, identity: str):
        self.path = Path(directory) / self.FILENAME
        self.identity = identity
        self._entries: dict[str, np.ndarray] = {}
        self._dirty = False
        if self.path.exists():
            try:
                with np.load(self.path, allow_pickle=False) as data:
                    if str(data["__identity__"]) == identity:
                        self._entries = {
                            k: np.asarray(data[k], dtype=np.float64)
                            for k in data.files
                            if k != "__identity__"
                        }
            except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile):
                self._entries = {}

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> np.ndarray | None:
        hit = self._entries.get(key)
        return None if hit is None else hit.copy()

    def put(self, key: str, vector: np.ndarray) -> None:
        self._entries[key] = np.asarray(vector, dtype=np.float64).copy()
        self._dirty = True

    def save(self) -> None:
        if not self._dirty:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        # suffix must stay ".npz" or np.savez silently writes elsewhere
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, suffix=".tmp.npz")
        os.close(fd)
        try:
            np.savez(tmp, __identity__=np.asarray(self.identity), **self._entries)
            os.replace(tmp, self.path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        self._dirty = False


def cache_key(content: bytes) -> str:
    return hashlib.sha256(content).hexdigest()


def _check_contract(vectors: np.ndarray, descriptor: BackendDescriptor, expected: int) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != expected:
        raise ContractViolation(
            f"backend returned shape {vectors.shape}, expected ({expected}, {descriptor.dim})"
        )
    if vectors.shape[1] != descriptor.dim:
        raise ContractViolation(
            f"backend returned dim {vectors.shape[1]}, descriptor says {descriptor.dim}"
        )
    if not np.all(np.isfinite(vectors)):
        raise ContractViolation("backend returned non-finite vector components")
    return vectors


def embed_text(prompts, backend) -> np.ndarray:
    """Embed a PromptSet; (K, dim) array index-aligned with the prompts."""
    texts = list(prompts.prompts)
    return _check_contract(backend.embed_texts(texts), backend.descriptor, len(texts))


def embed_images(frames: Sequence, backend, cache: EmbeddingCache | None = None) -> FrameEmbeddings:
    """Embed frame pixel buffers; index-aligned (N, dim) FrameEmbeddings.

    With a cache, only frames whose content hash misses are sent to the
    backend; hits are returned verbatim, so cached and uncached runs are
    bit-identical.
    """
    if len(frames) == 0:
        raise ValueError("no frames to embed")
    arrays = [_check_image(f.pixels, i) for i, f in enumerate(frames)]
    if cache is None:
        return FrameEmbeddings(
            _check_contract(backend.embed_images(arrays), backend.descriptor, len(arrays)),
            backend.descriptor,
        )

    keys = [cache_key(image_content(a)) for a in arrays]
    vectors: list[np.ndarray | None] = [cache.get(k) for k in keys]
    miss_idx = [i for i, v in enumerate(vectors) if v is None]
    if miss_idx:
        fresh = _check_contract(
            backend.embed_images([arrays[i] for i in miss_idx]),
            backend.descriptor,
            len(miss_idx),
        )
        for row, i in enumerate(miss_idx):
            vectors[i] = fresh[row]
            cache.put(keys[i], fresh[row])
        cache.save()
    stacked = _check_contract(np.stack(vectors), backend.descriptor, len(arrays))
    return FrameEmbeddings(stacked, backend.descriptor)
