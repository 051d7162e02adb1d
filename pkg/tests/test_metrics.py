import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcfnet.metrics import (
    MetricReport,
    boundary_points,
    dsc,
    evaluate_case,
    hd95,
    recall_precision,
)

mask_pairs = st.tuples(
    arrays(bool, (12, 12), elements=st.booleans()),
    arrays(bool, (12, 12), elements=st.booleans()),
)


def brute_confusion(pred, gt):
    """Pixel-by-pixel confusion counts, independent of array ops."""
    tp = fp = fn = 0
    for p, g in zip(np.asarray(pred).ravel().tolist(), np.asarray(gt).ravel().tolist()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
    return tp, fp, fn


def brute_hd95(pred, gt, spacing=(1.0, 1.0)):
    """All-pairs boundary distances, pooled both ways, 95th percentile."""
    pa = boundary_points(pred).astype(np.float64) * np.asarray(spacing)
    pb = boundary_points(gt).astype(np.float64) * np.asarray(spacing)
    d_ab = [np.sqrt(((pb - p) ** 2).sum(axis=1)).min() for p in pa]
    d_ba = [np.sqrt(((pa - p) ** 2).sum(axis=1)).min() for p in pb]
    return float(np.percentile(np.array(d_ab + d_ba), 95))


# ---------------------------------------------------------------------------
# dsc
# ---------------------------------------------------------------------------

def test_identical_masks_score_100():
    m = np.zeros((8, 8), dtype=bool)
    m[2:5, 2:5] = True
    assert dsc(m, m) == 100.0


def test_disjoint_masks_score_0():
    a = np.zeros((8, 8), dtype=bool)
    b = np.zeros((8, 8), dtype=bool)
    a[0, 0] = True
    b[7, 7] = True
    assert dsc(a, b) == 0.0


def test_half_overlap_scores_50():
    a = np.zeros((2, 2), dtype=bool)
    b = np.zeros((2, 2), dtype=bool)
    a[0, 0] = a[0, 1] = True
    b[0, 1] = b[1, 1] = True
    assert dsc(a, b) == 50.0


def test_both_empty_score_100():
    e = np.zeros((4, 4), dtype=bool)
    assert dsc(e, e) == 100.0


@given(pair=mask_pairs)
@settings(max_examples=100, deadline=None)
def test_dsc_is_symmetric(pair):
    a, b = pair
    assert dsc(a, b) == dsc(b, a)


@given(pair=mask_pairs)
@settings(max_examples=100, deadline=None)
def test_dsc_is_harmonic_mean_of_recall_precision(pair):
    a, b = pair
    r, p = recall_precision(a, b)
    if r + p > 0:
        assert abs(dsc(a, b) - 2 * p * r / (p + r)) < 1e-9


# ---------------------------------------------------------------------------
# recall / precision
# ---------------------------------------------------------------------------

def test_identical_masks_give_100_100():
    m = np.zeros((4, 4), dtype=bool)
    m[1:3, 1:3] = True
    assert recall_precision(m, m) == (100.0, 100.0)


def test_strict_superset_prediction():
    gt = np.zeros((4, 4), dtype=bool)
    gt[0, :4] = True  # 4 pixels
    pred = gt.copy()
    pred[1, :4] = True  # 4 extra
    assert recall_precision(pred, gt) == (100.0, 50.0)


def test_empty_prediction_with_nonempty_gt():
    gt = np.zeros((4, 4), dtype=bool)
    gt[0, 0] = True
    assert recall_precision(np.zeros((4, 4), dtype=bool), gt) == (0.0, 0.0)


@given(pair=mask_pairs)
@settings(max_examples=100, deadline=None)
def test_recall_precision_duality(pair):
    a, b = pair
    r_ab, p_ab = recall_precision(a, b)
    r_ba, p_ba = recall_precision(b, a)
    assert r_ab == p_ba and p_ab == r_ba


@given(pair=mask_pairs)
@settings(max_examples=60, deadline=None)
def test_confusion_counts_match_brute_force(pair):
    a, b = pair
    tp, fp, fn = brute_confusion(a, b)
    r, p = recall_precision(a, b)
    expected_r = 100.0 * tp / (tp + fn) if tp + fn else (100.0 if tp + fp == 0 else 0.0)
    expected_p = 100.0 * tp / (tp + fp) if tp + fp else (100.0 if tp + fn == 0 else 0.0)
    assert r == expected_r and p == expected_p


# ---------------------------------------------------------------------------
# hd95
# ---------------------------------------------------------------------------

def test_identical_masks_have_zero_distance():
    m = np.zeros((16, 16), dtype=bool)
    m[4:9, 4:9] = True
    assert hd95(m, m).value == 0.0


def test_single_pixels_three_apart():
    a = np.zeros((8, 8), dtype=bool)
    b = np.zeros((8, 8), dtype=bool)
    a[4, 1] = True
    b[4, 4] = True
    result = hd95(a, b)
    assert result.value == 3.0
    assert not result.empty_penalty


def test_empty_prediction_returns_diagonal_penalty():
    gt = np.zeros((10, 20), dtype=bool)
    gt[3, 3] = True
    result = hd95(np.zeros_like(gt), gt)
    assert result.empty_penalty
    assert abs(result.value - np.sqrt(9**2 + 19**2)) < 1e-12


def test_both_empty_is_zero_unflagged():
    e = np.zeros((5, 5), dtype=bool)
    assert hd95(e, e) == (0.0, False)


def test_spacing_scales_distances():
    a = np.zeros((8, 8), dtype=bool)
    b = np.zeros((8, 8), dtype=bool)
    a[4, 1] = True
    b[4, 4] = True
    assert hd95(a, b, spacing=(1.0, 2.5)).value == 7.5


def test_hd95_symmetric_under_pooled_definition():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.random((20, 20)) < 0.3
        b = rng.random((20, 20)) < 0.3
        if not a.any() or not b.any():
            continue
        assert hd95(a, b).value == hd95(b, a).value


def test_hd95_matches_brute_force_oracle():
    rng = np.random.default_rng(1)
    for _ in range(15):
        a = rng.random((24, 24)) < rng.uniform(0.05, 0.6)
        b = rng.random((24, 24)) < rng.uniform(0.05, 0.6)
        if not a.any() or not b.any():
            continue
        assert hd95(a, b).value == brute_hd95(a, b)


def test_boundary_excludes_interior_and_includes_border():
    m = np.ones((5, 5), dtype=bool)
    pts = {tuple(p) for p in boundary_points(m)}
    assert (0, 0) in pts and (2, 0) in pts
    assert (2, 2) not in pts  # fully interior
    assert len(pts) == 16


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

def test_evaluate_case_and_report_text():
    pred = np.zeros((2, 8, 8), dtype=np.int64)
    gt = np.zeros((2, 8, 8), dtype=np.int64)
    pred[:, 2:4, 2:4] = 1
    gt[:, 2:4, 2:4] = 1
    gt[:, 6, 6] = 2  # class 2 missed entirely
    report = MetricReport(rows=evaluate_case("case_0", pred, gt, n_classes=3))
    assert len(report.rows) == 2
    assert report.rows[0].dsc == 100.0
    assert report.rows[1].dsc == 0.0
    assert report.rows[1].empty_flag

    text = report.to_text()
    assert text.splitlines()[0].startswith("case\tclass")
    assert "dsc_mean=50.000000" in text
    assert "dsc_class_1=100.000000" in text
    # deterministic serialization
    assert text == MetricReport(rows=report.rows).to_text()


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        dsc(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        hd95(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        recall_precision(np.zeros((2, 2)), np.zeros((3, 3)))
