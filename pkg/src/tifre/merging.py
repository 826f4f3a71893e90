"""Frame matching and merging.

Each non-key frame is assigned to the key frame it is most similar to
(cosine over frame embeddings; ties go to the temporally nearer key,
then the lower key index). Each key frame is then replaced by a weighted
average of its group, where a member's weight is its similarity to the
matched key frame.

Two merge modes:

- "normalized" (default): the key frame participates with weight 1 and
  negative member weights are clamped to 0, so the result is a convex
  combination of the group:  (I_k + sum w+ * I_n) / (1 + sum w+).
- "paper-literal": the average excludes the key frame and divides by the
  member count rather than the weight sum:  (1/|S|) * sum w_n * I_n.
  Weights below 1 darken the output; kept for formula fidelity.

In both modes a key frame with no assigned members passes through
byte-for-byte. Pixel arithmetic runs in float64 with a fixed summation
order (ascending member index) and is quantized to 8-bit at the end,
rounding half away from zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .embedding import FrameEmbeddings
from .errors import MergeDimensionError
from .selection import Selection
from .similarity import similarity_matrix

MERGE_MODES = ("normalized", "paper-literal")


@dataclass(frozen=True, eq=False)
class MatchAssignment:
    """Non-key -> key assignment with similarity weights.

    pairs maps every non-key index to (key index, weight); groups is the
    exact inverse, mapping each key index to its sorted member tuple.
    """

    pairs: Mapping[int, tuple[int, float]]
    groups: Mapping[int, tuple[int, ...]]

    def __post_init__(self):
        inverse: dict[int, list[int]] = {k: [] for k in self.groups}
        for n, (k, _w) in self.pairs.items():
            if k not in inverse:
                raise ValueError(f"pair target {k} is not a key index")
            inverse[k].append(n)
        for k, members in self.groups.items():
            if tuple(sorted(inverse[k])) != tuple(members):
                raise ValueError(f"groups[{k}] is not the inverse of pairs")


def match_frames(frame_embs: FrameEmbeddings, sel: Selection) -> MatchAssignment:
    """Assign every non-key frame to its most similar key frame.

    Similarity is cosine between frame embeddings. Exact float
    comparisons; ties prefer the temporally nearer key frame, then the
    lower key index. The stored weight is the cosine to the matched key.
    """
    vectors = np.asarray(frame_embs.vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != sel.n:
        raise ValueError(f"embeddings shape {vectors.shape} does not cover {sel.n} frames")
    keys = list(sel.key_indices)
    groups: dict[int, list[int]] = {k: [] for k in keys}
    pairs: dict[int, tuple[int, float]] = {}
    if sel.non_key_indices:
        sims = similarity_matrix(
            [vectors[n] for n in sel.non_key_indices],
            [vectors[k] for k in keys],
        )
        for row, n in enumerate(sel.non_key_indices):
            best_col = min(
                range(len(keys)),
                key=lambda c: (-sims[row, c], abs(keys[c] - n), keys[c]),
            )
            k = keys[best_col]
            pairs[n] = (k, float(sims[row, best_col]))
            groups[k].append(n)
    return MatchAssignment(
        pairs=pairs,
        groups={k: tuple(sorted(members)) for k, members in groups.items()},
    )


def quantize_u8(pixels_float: np.ndarray) -> np.ndarray:
    """Float pixels -> uint8, rounding half away from zero, clipped to [0, 255]."""
    return np.clip(np.floor(pixels_float + 0.5), 0.0, 255.0).astype(np.uint8)


def merge_group_float(
    key_pixels: np.ndarray,
    member_pixels: Sequence[np.ndarray],
    weights: Sequence[float],
    mode: str,
) -> np.ndarray:
    """Merged pixels for one key frame, in float64 before quantization.

    Members must already be in ascending index order; the summation order
    is fixed for determinism. Only called with at least one member.
    """
    key_f = np.asarray(key_pixels, dtype=np.float64)
    if mode == "paper-literal":
        acc = np.zeros_like(key_f)
        for pixels, w in zip(member_pixels, weights):
            acc += w * np.asarray(pixels, dtype=np.float64)
        return acc / len(member_pixels)
    if mode == "normalized":
        acc = key_f.copy()
        total = 1.0
        for pixels, w in zip(member_pixels, weights):
            w_pos = max(w, 0.0)
            acc += w_pos * np.asarray(pixels, dtype=np.float64)
            total += w_pos
        return acc / total
    raise ValueError(f"unknown merge mode {mode!r}")


@dataclass(frozen=True, eq=False)
class MergedFrame:
    """One output frame plus its provenance."""

    key_index: int
    pixels: np.ndarray
    contributors: tuple[tuple[int, float], ...]
    mode: str


@dataclass(frozen=True, eq=False)
class MergedFrameSet:
    """Final merged key frames in temporal order."""

    frames: tuple[MergedFrame, ...]
    mode: str

    def __len__(self) -> int:
        return len(self.frames)


def merge_frames(
    frames: Sequence,
    sel: Selection,
    asg: MatchAssignment,
    mode: str = "normalized",
) -> MergedFrameSet:
    """Produce one merged frame per key frame, in temporal order.

    All frames must share pixel dimensions (enforced at ingestion; checked
    again here). Deterministic: identical inputs yield bit-identical output.
    """
    if mode not in MERGE_MODES:
        raise ValueError(f"unknown merge mode {mode!r}; expected one of {MERGE_MODES}")
    shape = frames[sel.key_indices[0]].pixels.shape
    for i, f in enumerate(frames):
        if f.pixels.shape != shape:
            raise MergeDimensionError(
                f"frame {i} has shape {f.pixels.shape}, expected {shape}"
            )
    merged = []
    for k in sel.key_indices:
        members = asg.groups.get(k, ())
        if not members:
            out = frames[k].pixels.copy()
            contributors: tuple[tuple[int, float], ...] = ()
        else:
            weights = [asg.pairs[n][1] for n in members]
            out = quantize_u8(
                merge_group_float(
                    frames[k].pixels,
                    [frames[n].pixels for n in members],
                    weights,
                    mode,
                )
            )
            contributors = tuple(zip(members, weights))
        merged.append(MergedFrame(key_index=k, pixels=out, contributors=contributors, mode=mode))
    return MergedFrameSet(frames=tuple(merged), mode=mode)
