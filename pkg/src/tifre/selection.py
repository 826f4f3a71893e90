"""Key-frame selection: saliency top-k and the fixed-rate baseline.

select_top_k keeps the k highest-saliency frames (k is a hard cap; an
optional relative threshold drops weak frames inside the top k, so the
actual count can be lower). fixed_fps_select is the content-independent
baseline of evenly spaced indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError


@dataclass(frozen=True, eq=False)
class Selection:
    """Partition of frame indices into key and non-key sets.

    key_indices and non_key_indices are sorted ascending (temporal order)
    and together cover 0..n-1 exactly once.
    """

    n: int
    key_indices: tuple[int, ...]
    non_key_indices: tuple[int, ...]
    scores: np.ndarray

    def __post_init__(self):
        key = set(self.key_indices)
        non_key = set(self.non_key_indices)
        if len(key) != len(self.key_indices) or len(non_key) != len(self.non_key_indices):
            raise ValueError("duplicate indices in selection")
        if key | non_key != set(range(self.n)) or key & non_key:
            raise ValueError("key/non-key sets do not partition the frame range")
        if not 1 <= len(key) <= self.n:
            raise ValueError(f"need 1..{self.n} key frames, got {len(key)}")
        if np.asarray(self.scores).shape != (self.n,):
            raise ValueError("scores length does not match frame count")

    @property
    def num_key(self) -> int:
        return len(self.key_indices)


def _partition(n: int, key: list[int], scores: np.ndarray) -> Selection:
    key_sorted = tuple(sorted(key))
    key_set = set(key_sorted)
    non_key = tuple(i for i in range(n) if i not in key_set)
    return Selection(n, key_sorted, non_key, np.asarray(scores, dtype=np.float64))


def select_top_k(scores, k: int, threshold: float | None = None) -> Selection:
    """Select up to k frames with the highest saliency scores.

    Ties break toward the lower frame index. With a relative threshold
    t in (0, 1], frames scoring below t * max(scores) are dropped even
    inside the top k, but the single best frame is always kept.
    t = None or 0 disables thresholding (pure top-k). Returned key
    indices are in ascending (temporal) order.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise EmptyInputError("empty or non-1-D score vector")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = s.size
    # lexsort: primary key -score, secondary key index (both ascending)
    order = np.lexsort((np.arange(n), -s))
    top = [int(i) for i in order[: min(k, n)]]
    if threshold is not None and threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    if threshold:
        cutoff = threshold * float(s.max())
        kept = [i for i in top if s[i] >= cutoff]
        top = kept if kept else [int(order[0])]
    return _partition(n, top, s)


def fixed_fps_select(n: int, m: int) -> Selection:
    """Baseline: m evenly spaced frame indices, floor(t * n / m) for t < m.

    Independent of frame content; scores are recorded as zeros. m larger
    than n is clamped to n.
    """
    if n < 1:
        raise EmptyInputError("no frames to select from")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    m = min(m, n)
    indices = sorted({t * n // m for t in range(m)})
    return _partition(n, indices, np.zeros(n))
