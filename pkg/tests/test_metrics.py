import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from omseg.errors import ValidationError
from omseg.events import GroundTruthMask
from omseg.metrics import (
    format_table,
    iou,
    majority_size_class,
    mean_iou,
    object_size_class,
)
from omseg.oms import OmsConfig, OmsFrame


def test_identical_masks():
    a = np.zeros((4, 4), bool)
    a[1, 1:3] = True
    assert iou(a, a) == 1.0


def test_disjoint_masks():
    a = np.zeros((4, 4), bool)
    b = np.zeros((4, 4), bool)
    a[0, 0] = b[3, 3] = True
    assert iou(a, b) == 0.0


def test_one_third():
    pred = np.array([True, True, False])
    gt = np.array([False, True, True])
    assert iou(pred, gt) == pytest.approx(1 / 3)


def test_both_empty_policies():
    z = np.zeros((3, 3), bool)
    assert math.isnan(iou(z, z, "skip"))
    assert iou(z, z, "count_as_one") == 1.0
    with pytest.raises(ValidationError):
        iou(z, z, "ignore")


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        iou(np.zeros((3, 3)), np.zeros((3, 4)))


def test_mean_of_two_frames():
    gt = np.zeros((2, 2), bool)
    gt[0, :] = True
    half = np.zeros((2, 2), bool)
    half[0, 0] = True
    report = mean_iou([(gt, gt), (half, gt)])
    assert report.per_frame == [1.0, 0.5]
    assert report.mean_iou == 0.75
    assert report.frames_evaluated == 2


def test_skipped_frame_leaves_mean_undefined():
    z = np.zeros((3, 3), bool)
    report = mean_iou([(z, z)])
    assert report.frames_evaluated == 0 and report.skipped == 1
    assert not report.defined and math.isnan(report.mean_iou)
    assert report.to_dict()["mean_iou"] is None
    assert mean_iou([(z, z)], "count_as_one").mean_iou == 1.0


def test_empty_sequence():
    report = mean_iou([])
    assert report.frames_evaluated == 0 and not report.defined


def test_report_json_round_trip():
    a = np.ones((2, 2), bool)
    data = json.loads(mean_iou([(a, a)]).to_json())
    assert data["mean_iou"] == 1.0 and data["size_classes"] == ["large"]


def test_strided_prediction_is_upsampled():
    cfg = OmsConfig(center_side=2, surround_side=4, stride=4, kernel_kind="uniform")
    pred = OmsFrame(np.array([[True, False], [False, False]]), cfg, (8, 8))
    gt = np.zeros((8, 8), bool)
    gt[:4, :4] = True
    report = mean_iou([(pred, GroundTruthMask(gt, 0.0))])
    assert report.per_frame == [1.0]


def test_size_classes():
    assert object_size_class(np.zeros((10, 10), bool)) == "small"
    exactly = np.zeros((10, 10), bool)
    exactly.flat[:20] = True
    assert object_size_class(exactly) == "large"
    just_below = np.zeros((10, 10), bool)
    just_below.flat[:19] = True
    assert object_size_class(just_below) == "small"


def test_dataset_sized_object_is_small():
    gt = np.zeros((260, 346), bool)
    gt[50:150, 100:200] = True
    assert 10_000 / 89_960 == pytest.approx(0.11116, abs=1e-5)
    assert object_size_class(GroundTruthMask(gt, 0.0)) == "small"


def test_majority_class_ties_go_small():
    big = np.ones((4, 4), bool)
    small = np.zeros((4, 4), bool)
    assert majority_size_class([big, small]) == "small"
    assert majority_size_class([big, big, small]) == "large"


def test_class_means():
    big = np.ones((4, 4), bool)
    small = np.zeros((4, 4), bool)
    small[0, 0] = True
    report = mean_iou([(big, big), (np.zeros((4, 4), bool), small)])
    assert report.class_mean("large") == 1.0
    assert report.class_mean("small") == 0.0


def test_format_table():
    text = format_table(["Stride", "mIoU(%)"], [[1, 86.126], [8, math.nan]], "Stride assessment")
    lines = text.splitlines()
    assert lines[0] == "Stride assessment"
    assert lines[1] == "Stride  mIoU(%)"
    assert lines[3] == "     1    86.13"
    assert lines[4] == "     8      n/a"


masks = st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda hw: st.tuples(arrays(np.bool_, hw), arrays(np.bool_, hw), arrays(np.bool_, hw))
)


@given(masks)
def test_iou_symmetric_and_bounded(abc):
    a, b, _ = abc
    x, y = iou(a, b, "count_as_one"), iou(b, a, "count_as_one")
    assert x == y
    assert 0.0 <= x <= 1.0


@given(masks)
def test_self_iou_is_one(abc):
    a = abc[0]
    if a.any():
        assert iou(a, a) == 1.0


@given(masks)
def test_monotone_containment(abc):
    gt, r1, r2 = abc
    pred2 = gt & r1
    pred1 = pred2 & r2
    if gt.any():
        assert iou(pred1, gt) <= iou(pred2, gt)
