import numpy as np
import pytest

from conftest import make_frames
from tifre.embedding import BackendDescriptor, FrameEmbeddings
from tifre.errors import MergeDimensionError
from tifre.merging import (
    MatchAssignment,
    match_frames,
    merge_frames,
    merge_group_float,
    quantize_u8,
)
from tifre.selection import Selection, select_top_k
from tifre.similarity import cosine_similarity


def embs(vectors) -> FrameEmbeddings:
    # descriptor dim has a floor of 8; matching only reads the vectors
    vectors = np.asarray(vectors, dtype=np.float64)
    return FrameEmbeddings(
        vectors, BackendDescriptor(kind="mock", dim=max(8, vectors.shape[1]), identity="t")
    )


def selection_for(n, keys):
    keys = tuple(sorted(keys))
    return Selection(
        n=n,
        key_indices=keys,
        non_key_indices=tuple(i for i in range(n) if i not in set(keys)),
        scores=np.zeros(n),
    )


def brute_force_match(vectors, keys, non_keys):
    """Reference: per non-key argmax of cosine; ties by |key-n| then key."""
    out = {}
    for n in non_keys:
        best = min(
            keys,
            key=lambda k: (-cosine_similarity(vectors[n], vectors[k]), abs(k - n), k),
        )
        out[n] = best
    return out


def test_match_assigns_to_most_similar_key():
    vectors = np.array(
        [
            [1.0, 0.0],   # key 0
            [0.0, 1.0],   # key 1
            [0.9, 0.1],   # near key 0
            [0.1, 0.9],   # near key 1
        ]
    )
    sel = selection_for(4, (0, 1))
    asg = match_frames(embs(vectors), sel)
    assert asg.pairs[2][0] == 0
    assert asg.pairs[3][0] == 1
    assert asg.groups == {0: (2,), 1: (3,)}


def test_match_tie_prefers_temporally_nearer_key():
    # frame 3 is equidistant in similarity to keys 0 and 4 (identical vectors),
    # temporal distance decides: |4-3| < |0-3|
    v = np.array([1.0, 1.0])
    vectors = np.stack([v, [1.0, 0.0], [0.0, 1.0], v * 2, v])
    sel = selection_for(5, (0, 1, 2, 4))
    asg = match_frames(embs(vectors), sel)
    assert asg.pairs[3][0] == 4
    assert asg.pairs[3][1] == pytest.approx(1.0)


def test_match_tie_at_equal_distance_prefers_lower_key():
    v = np.array([1.0, 1.0])
    vectors = np.stack([v, v * 3, v])  # keys 0 and 2, non-key 1 exactly between
    sel = selection_for(3, (0, 2))
    asg = match_frames(embs(vectors), sel)
    assert asg.pairs[1][0] == 0


def test_match_weight_is_cosine_to_matched_key():
    vectors = np.array([[1.0, 0.0], [1.0, 1.0]])
    sel = selection_for(2, (0,))
    asg = match_frames(embs(vectors), sel)
    assert asg.pairs[1][1] == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_match_all_keys_yields_empty_pairs():
    vectors = np.eye(3)
    sel = selection_for(3, (0, 1, 2))
    asg = match_frames(embs(vectors), sel)
    assert asg.pairs == {}
    assert asg.groups == {0: (), 1: (), 2: ()}


def test_match_oracle_on_random_instances():
    rng = np.random.default_rng(23)
    for _ in range(200):
        n = int(rng.integers(2, 65))
        m = int(rng.integers(1, min(8, n) + 1))
        vectors = rng.standard_normal((n, 12))
        keys = tuple(sorted(rng.choice(n, size=m, replace=False).tolist()))
        sel = selection_for(n, keys)
        asg = match_frames(embs(vectors), sel)
        expected = brute_force_match(vectors, keys, sel.non_key_indices)
        assert {n_: k for n_, (k, _) in asg.pairs.items()} == expected


def test_assignment_partition_invariant():
    rng = np.random.default_rng(5)
    vectors = rng.standard_normal((20, 8))
    sel = selection_for(20, (2, 9, 15))
    asg = match_frames(embs(vectors), sel)
    members = [n for group in asg.groups.values() for n in group]
    assert sorted(members) == list(sel.non_key_indices)
    assert set(asg.pairs) == set(sel.non_key_indices)


def test_assignment_inverse_validated():
    with pytest.raises(ValueError):
        MatchAssignment(pairs={1: (0, 0.5)}, groups={0: ()})
    with pytest.raises(ValueError):
        MatchAssignment(pairs={1: (9, 0.5)}, groups={0: (1,)})


def test_quantize_rounds_half_away_from_zero():
    assert quantize_u8(np.array([127.5])).tolist() == [128]
    assert quantize_u8(np.array([0.4999, 0.5, 254.5, 255.7, -3.0])).tolist() == [
        0,
        1,
        255,
        255,
        0,
    ]


def test_normalized_merge_black_white_half():
    black = np.zeros((2, 2, 3), dtype=np.uint8)
    white = np.full((2, 2, 3), 255, dtype=np.uint8)
    out = merge_group_float(black, [white], [1.0], "normalized")
    assert np.allclose(out, 127.5)
    assert quantize_u8(out).tolist() == np.full((2, 2, 3), 128).tolist()


def test_paper_literal_known_value():
    key = np.full((1, 1, 3), 10.0)
    member = np.full((1, 1, 3), 100, dtype=np.uint8)
    out = merge_group_float(key, [member], [0.5], "paper-literal")
    assert np.allclose(out, 50.0)


def test_normalized_clamps_negative_weights():
    key = np.full((1, 1, 3), 100, dtype=np.uint8)
    member = np.full((1, 1, 3), 200, dtype=np.uint8)
    out = merge_group_float(key, [member], [-0.7], "normalized")
    assert np.allclose(out, 100.0)


def test_merge_empty_group_copies_key_exactly():
    frames = make_frames(3, seed=1)
    sel = selection_for(3, (0, 1, 2))
    asg = match_frames(embs(np.eye(3)), sel)
    merged = merge_frames(frames, sel, asg)
    for mf, k in zip(merged.frames, (0, 1, 2)):
        assert np.array_equal(mf.pixels, frames[k].pixels)
        assert mf.contributors == ()


def test_merge_identical_frames_idempotent():
    base = make_frames(1, seed=3)[0].pixels
    frames = []
    from tifre.video_io import Frame

    for i in range(4):
        frames.append(Frame(index=i, timestamp_sec=float(i), pixels=base.copy(), source_id="t"))
    vectors = np.tile(np.array([1.0, 2.0, 3.0]), (4, 1))
    sel = selection_for(4, (0,))
    asg = match_frames(embs(vectors), sel)
    merged = merge_frames(frames, sel, asg, mode="normalized")
    assert np.array_equal(merged.frames[0].pixels, base)


def test_normalized_merge_stays_in_convex_hull():
    rng = np.random.default_rng(7)
    frames = make_frames(5, side=4, seed=9)
    vectors = rng.standard_normal((5, 8))
    sel = selection_for(5, (1, 3))
    asg = match_frames(embs(vectors), sel)
    merged = merge_frames(frames, sel, asg, mode="normalized")
    for mf in merged.frames:
        group = [mf.key_index] + [n for n, _ in mf.contributors]
        stack = np.stack([frames[i].pixels for i in group]).astype(np.float64)
        lo, hi = stack.min(axis=0), stack.max(axis=0)
        px = mf.pixels.astype(np.float64)
        assert np.all(px >= np.floor(lo)) and np.all(px <= np.ceil(hi))


def test_merge_temporal_order_and_modes_recorded():
    frames = make_frames(6, seed=4)
    vectors = np.random.default_rng(2).standard_normal((6, 8))
    sel = selection_for(6, (4, 0))
    asg = match_frames(embs(vectors), sel)
    merged = merge_frames(frames, sel, asg, mode="paper-literal")
    assert [mf.key_index for mf in merged.frames] == [0, 4]
    assert merged.mode == "paper-literal"
    assert all(mf.mode == "paper-literal" for mf in merged.frames)


def test_merge_rejects_mixed_dimensions():
    from tifre.video_io import Frame

    frames = make_frames(2, side=4, seed=1)
    odd = Frame(
        index=2,
        timestamp_sec=2.0,
        pixels=np.zeros((5, 4, 3), dtype=np.uint8),
        source_id="t",
    )
    frames.append(odd)
    vectors = np.random.default_rng(1).standard_normal((3, 8))
    sel = selection_for(3, (0,))
    asg = match_frames(embs(vectors), sel)
    with pytest.raises(MergeDimensionError):
        merge_frames(frames, sel, asg)


def test_merge_unknown_mode_rejected():
    frames = make_frames(2, seed=1)
    sel = selection_for(2, (0,))
    asg = match_frames(embs(np.eye(2)), sel)
    with pytest.raises(ValueError):
        merge_frames(frames, sel, asg, mode="other")


def eq8_reference(member_pixels, weights):
    """Independent weighted-average reimplementation (sum w*I / |S|)."""
    total = np.zeros(member_pixels[0].shape, dtype=np.float64)
    count = 0
    for px, w in zip(member_pixels, weights):
        total = total + np.asarray(px, dtype=np.float64) * float(w)
        count += 1
    return total / count


def test_paper_literal_matches_independent_reference():
    rng = np.random.default_rng(31)
    for _ in range(100):
        m = int(rng.integers(1, 6))
        members = [rng.integers(0, 256, (4, 4, 3), dtype=np.uint8) for _ in range(m)]
        weights = rng.uniform(-1, 1, size=m).tolist()
        key = rng.integers(0, 256, (4, 4, 3), dtype=np.uint8)
        ours = merge_group_float(key, members, weights, "paper-literal")
        ref = eq8_reference(members, weights)
        assert np.max(np.abs(ours - ref)) < 1e-6


def test_end_to_end_with_selection():
    rng = np.random.default_rng(17)
    frames = make_frames(10, seed=8)
    scores = rng.uniform(0, 1, 10)
    sel = select_top_k(scores, k=3)
    vectors = rng.standard_normal((10, 16))
    asg = match_frames(embs(vectors), sel)
    merged = merge_frames(frames, sel, asg)
    assert len(merged) == 3
    assert [mf.key_index for mf in merged.frames] == sorted(sel.key_indices)
