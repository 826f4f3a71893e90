"""Similarity primitives shared by selection and merging.

Embedding vectors are 1-D float arrays in a shared text/image space.
Similarity between a text vector t and a frame vector v is plain cosine:

    sim(t, v) = (t . v) / (||t|| ||v||)

on the raw (unnormalized) vectors, accumulated in double precision.
Per-frame saliency is the maximum similarity over all text prompts.
Results are clamped to [-1, 1] to absorb rounding, so downstream
weights stay well-defined.

All functions here are pure and deterministic: identical inputs give
bit-identical outputs.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DegenerateVectorError, DimensionError


def as_embedding(v, name: str = "vector") -> np.ndarray:
    """Coerce to a float64 1-D array and enforce embedding invariants.

    Rejects empty, multi-dimensional, and non-finite input. Zero-norm
    vectors are rejected by the cosine operations, not here, so callers
    can hold vectors they never compare.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionError(f"{name}: expected a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DegenerateVectorError(f"{name}: contains NaN or Inf")
    return arr


def cosine_similarity(a, b) -> float:
    """Cosine similarity of two embedding vectors, clamped to [-1, 1].

    Symmetric and scale-invariant: cosine(c*a, b) == cosine(a, b) for c > 0.
    Raises DimensionError on length mismatch and DegenerateVectorError for
    zero-norm input; a zero vector signals a broken embedding backend and
    must not silently rank as similarity 0.
    """
    av = as_embedding(a, "a")
    bv = as_embedding(b, "b")
    if av.shape[0] != bv.shape[0]:
        raise DimensionError(f"dimension mismatch: {av.shape[0]} vs {bv.shape[0]}")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0:
        raise DegenerateVectorError("a: zero-norm vector")
    if nb == 0.0:
        raise DegenerateVectorError("b: zero-norm vector")
    return float(np.clip(np.dot(av, bv) / (na * nb), -1.0, 1.0))


def _stack_validated(vectors: Sequence, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Stack vectors row-wise, validating each; returns (matrix, norms).

    Error messages carry the offending index so a broken backend output
    can be traced to a specific prompt or frame.
    """
    if len(vectors) < 1:
        raise DimensionError(f"{name}: need at least one vector")
    rows = []
    dim = None
    for i, v in enumerate(vectors):
        row = as_embedding(v, f"{name}[{i}]")
        if dim is None:
            dim = row.shape[0]
        elif row.shape[0] != dim:
            raise DimensionError(f"{name}[{i}]: dimension {row.shape[0]} != {dim}")
        rows.append(row)
    mat = np.stack(rows)
    norms = np.linalg.norm(mat, axis=1)
    for i in np.flatnonzero(norms == 0.0):
        raise DegenerateVectorError(f"{name}[{int(i)}]: zero-norm vector")
    return mat, norms


def similarity_matrix(texts: Sequence, frames: Sequence) -> np.ndarray:
    """K x N cosine similarity matrix between text and frame embeddings.

    entries[i][j] == cosine_similarity(texts[i], frames[j]); computed as a
    single double-precision matrix product, which is deterministic and
    matches the entrywise definition to well below 1e-9.
    """
    t_mat, t_norms = _stack_validated(texts, "texts")
    f_mat, f_norms = _stack_validated(frames, "frames")
    if t_mat.shape[1] != f_mat.shape[1]:
        raise DimensionError(
            f"texts dim {t_mat.shape[1]} != frames dim {f_mat.shape[1]}"
        )
    sims = (t_mat @ f_mat.T) / np.outer(t_norms, f_norms)
    return np.clip(sims, -1.0, 1.0)


def saliency(sim: np.ndarray) -> np.ndarray:
    """Per-frame saliency: columnwise maximum of a K x N similarity matrix."""
    mat = np.asarray(sim, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise DimensionError(f"expected a K x N matrix with K,N >= 1, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise DegenerateVectorError("similarity matrix contains NaN or Inf")
    return mat.max(axis=0)
