import pytest
from hypothesis import given
from hypothesis import strategies as st

from storyalign.core import (
    Alignment,
    ClipRecord,
    GroundedAlignment,
    SentenceRecord,
    TimeInterval,
    ValidationError,
    check_clips,
    ground_alignment,
    interval_intersection,
    interval_iou,
    normalize_language,
)

iv = TimeInterval


def clips_from(bounds, video_id="v"):
    return [ClipRecord(k, iv(s, e), video_id) for k, (s, e) in enumerate(bounds)]


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (iv(0, 4), iv(2, 6), 2.0),
        (iv(0, 4), iv(0, 4), 4.0),
        (iv(0, 2), iv(2, 5), 0.0),
        (iv(0, 1), iv(3, 5), 0.0),
        (iv(1, 9), iv(2, 3), 1.0),
    ],
)
def test_interval_intersection(a, b, expected):
    assert interval_intersection(a, b) == expected


def test_interval_rejects_bad_bounds():
    with pytest.raises(ValidationError):
        iv(5.0, 4.0)
    with pytest.raises(ValidationError):
        iv(-1.0, 2.0)
    with pytest.raises(ValidationError):
        iv(0.0, float("inf"))
    assert iv(3.0, 3.0).duration == 0.0


interval_st = st.tuples(
    st.floats(0, 100, allow_nan=False), st.floats(0, 50, allow_nan=False)
).map(lambda p: iv(p[0], p[0] + p[1]))


@given(interval_st, interval_st)
def test_intersection_symmetric_and_bounded(a, b):
    x = interval_intersection(a, b)
    assert x == interval_intersection(b, a)
    assert 0.0 <= x <= min(a.duration, b.duration)


def test_iou_unmatched_conventions():
    assert interval_iou(None, None) == 1.0
    assert interval_iou(None, iv(0, 3)) == 0.0
    assert interval_iou(iv(0, 3), None) == 0.0
    assert interval_iou(iv(2, 2), iv(2, 2)) == 0.0


def test_ground_alignment_adjacent_clips():
    clips = clips_from([(0, 2), (2, 5)])
    a = Alignment(((0, 0), (0, 1)), frozenset({1}))
    g = ground_alignment(a, clips)
    assert g.spans == (iv(0, 5), None)


def test_ground_alignment_spans_gap():
    clips = clips_from([(0, 2), (2, 6), (6, 8)])
    a = Alignment(((0, 0), (0, 2)), dropped_clips=frozenset({1}))
    assert ground_alignment(a, clips).spans == (iv(0, 8),)


def test_ground_alignment_unknown_clip():
    clips = clips_from([(0, 2)])
    with pytest.raises(ValidationError):
        ground_alignment(Alignment(((0, 0), (0, 1))), clips)


def test_ground_alignment_deterministic():
    clips = clips_from([(0, 1), (1, 3), (3, 4)])
    a = Alignment(((0, 0), (1, 1), (1, 2)))
    assert ground_alignment(a, clips) == ground_alignment(a, clips)
    assert isinstance(ground_alignment(a, clips), GroundedAlignment)


def test_alignment_rejects_crossing_pairs():
    with pytest.raises(ValidationError):
        Alignment(((0, 1), (1, 0)))


def test_alignment_rejects_item_both_used_and_dropped():
    with pytest.raises(ValidationError):
        Alignment(((0, 0),), dropped_sentences=frozenset({0}))


def test_alignment_rejects_missing_index():
    # sentence 1 neither assigned nor dropped
    with pytest.raises(ValidationError):
        Alignment(((0, 0), (2, 1)))


def test_alignment_mapping():
    a = Alignment(((0, 0), (0, 1), (2, 2)), frozenset({1}), frozenset({3}))
    assert a.mapping() == [(0, 1), None, (2,)]
    assert a.clips_of(1) is None
    assert a.n_clips == 4 and a.n_sentences == 3


def test_check_clips_detects_overlap():
    with pytest.raises(ValidationError):
        check_clips(clips_from([(0, 3), (2, 5)]))
    check_clips(clips_from([(0, 2), (2, 5)]))


def test_normalize_language():
    assert normalize_language(" EN ") == "en"
    assert normalize_language("ch") == "zh"
    assert normalize_language("other") == "other"
    with pytest.raises(ValidationError):
        normalize_language("klingon")


def test_sentence_record_unmatched():
    assert SentenceRecord(0, "x", None).unmatched
    assert not SentenceRecord(0, "x", iv(0, 1)).unmatched
