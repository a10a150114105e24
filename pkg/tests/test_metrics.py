import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.ndimage import binary_dilation

from lfdepth.lightfield import LabelGrid
from lfdepth.metrics import (
    badpix,
    border_margin,
    border_mask,
    boundary_pr,
    evaluate,
    gradient_magnitude,
    gt_boundary,
    interpolated_precision,
    write_pr_csv,
)


def _step_gt(h=20, w=20, col=10, near=1.0, far=0.0):
    gt = np.full((h, w), far)
    gt[:, :col] = near
    return gt


def test_badpix_examples():
    gt = np.random.default_rng(0).uniform(size=(9, 9))
    assert badpix(gt, gt) == 0.0
    assert badpix(gt + 0.2, gt) == 1.0
    est = gt.copy()
    est[0, :3] += 0.5
    assert badpix(est, gt) == pytest.approx(3 / 81)


def test_badpix_threshold_is_strict():
    gt = np.zeros((1, 2))
    # 0.1 exactly is not an error, anything measurably above it is
    assert badpix(np.array([[0.1, 0.1000001]]), gt) == 0.5


def test_badpix_mask_and_nonfinite():
    gt = np.zeros((4, 4))
    gt[0, 0] = np.nan
    est = np.ones((4, 4))
    m = border_mask((4, 4), 1)
    assert m.sum() == 4
    assert badpix(est, gt, mask=m) == 1.0
    with pytest.raises(ValueError):
        badpix(est, gt, mask=np.zeros((4, 4), dtype=bool))
    with pytest.raises(ValueError):
        badpix(est[:3], gt)


def test_border_margin_uses_max_label():
    assert border_margin(LabelGrid(-2.0, 1.0, 4), 4) == 8
    assert border_margin(LabelGrid(-0.6, 1.35, 14), 4) == 6


def test_gt_boundary_of_step():
    edges = gt_boundary(_step_gt(), 0.2)
    assert np.array_equal(np.flatnonzero(edges.any(axis=0)), [9, 10])


def test_identical_estimate_has_precision_one():
    gt = _step_gt()
    curve = boundary_pr(gt, gt, 0.2)
    assert curve
    assert all(pt.precision == 1.0 for pt in curve)


def test_constant_estimate_gives_empty_curve():
    assert boundary_pr(np.full((20, 20), 0.3), _step_gt(), 0.2) == []


def test_empty_gt_boundary_raises():
    with pytest.raises(ValueError):
        boundary_pr(_step_gt(), np.zeros((20, 20)), 0.2)


def test_tolerance_band_is_one_pixel():
    gt = _step_gt()
    est = np.zeros_like(gt)
    est[:, :8] = 1.0  # edge moved two columns: gradient at 7, 8
    pts = boundary_pr(est, gt, 0.2, thresholds=[0.4])
    # column 8 is within one pixel of gt column 9, column 7 is not
    assert pts[0].precision == pytest.approx(0.5)
    pts = boundary_pr(est, gt, 0.2, thresholds=[0.4], tolerance=2)
    assert pts[0].precision == 1.0


@given(st.integers(0, 10_000))
def test_pr_invariants(seed):
    rng = np.random.default_rng(seed)
    gt = _step_gt(16, 16, int(rng.integers(4, 12)))
    est = gt + rng.normal(0, 0.15, size=gt.shape)
    curve = boundary_pr(est, gt, 0.2)
    rec = [pt.recall for pt in curve]
    assert all(a >= b for a, b in zip(rec, rec[1:]))
    near_count = int(binary_dilation(gt_boundary(gt, 0.2), np.ones((3, 3), bool)).sum())
    for pt in curve:
        assert 0 <= pt.precision <= 1 and 0 <= pt.recall <= 1
        assert 0 <= pt.t_p <= min(pt.c_p, near_count)
        assert pt.precision == pytest.approx(pt.t_p / pt.c_p)
        assert pt.recall == pytest.approx(pt.c_p / pt.g_p)


def test_interpolated_precision():
    gt = _step_gt()
    curve = boundary_pr(gt, gt, 0.2)
    out = interpolated_precision(curve, [0.2, 0.5, 5.0])
    assert out[0] == 1.0 and out[1] == 1.0 and np.isnan(out[2])


def test_gradient_magnitude_needs_two_pixels():
    with pytest.raises(ValueError):
        gradient_magnitude(np.zeros((1, 5)))


def test_evaluate_and_csv(tmp_path):
    gt = _step_gt()
    res = evaluate(gt + 0.05, gt, 0.2)
    assert res.badpix_0_1 == 0.0 and res.pr_curve
    write_pr_csv(tmp_path / "pr.csv", res.pr_curve)
    lines = (tmp_path / "pr.csv").read_text().splitlines()
    assert lines[0] == "threshold,precision,recall,C_p,T_p,G_p"
    assert len(lines) == len(res.pr_curve) + 1
