"""Tests for thinning, NMS, correspondence matching and the ODS/OIS benchmark."""

import functools

import numpy as np
import pytest
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from autodiff import Grid
from evaluation import (
    EvalConfig,
    correspond,
    evaluate,
    format_pr_csv,
    match_radius,
    non_max_suppression,
    postprocess,
    summarize,
    summarize_trials,
    thin,
    write_pr_csv,
)
from evaluation.bench import PR_CSV_COLUMNS, prf
from evaluation.matching import build_adjacency, disk_offsets
from evaluation.thinning import break_blocks
from losses import derive_label


def has_block(mask: np.ndarray) -> bool:
    return bool((mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]).any())


def max_matching_oracle(pred: np.ndarray, gt: np.ndarray, radius: int) -> int:
    """Maximum matching size via a 0/1-cost assignment problem."""
    p = np.argwhere(pred)
    g = np.argwhere(gt)
    if len(p) == 0 or len(g) == 0:
        return 0
    d2 = ((p[:, None, :] - g[None, :, :]) ** 2).sum(axis=2)
    cost = (d2 > radius * radius).astype(np.float64)
    rows, cols = linear_sum_assignment(cost)
    return int((cost[rows, cols] == 0).sum())


def exhaustive_matching(pred: np.ndarray, gt: np.ndarray, radius: int) -> int:
    """Largest one-to-one pairing by trying every assignment."""
    p = [tuple(x) for x in np.argwhere(pred)]
    g = [tuple(x) for x in np.argwhere(gt)]

    @functools.lru_cache(maxsize=None)
    def search(i: int, used: frozenset) -> int:
        if i == len(p):
            return 0
        best = search(i + 1, used)
        for j, (gr, gc) in enumerate(g):
            if j not in used and (p[i][0] - gr) ** 2 + (p[i][1] - gc) ** 2 <= radius * radius:
                best = max(best, 1 + search(i + 1, used | {j}))
        return best

    return search(0, frozenset())


def line_label(size: int = 21, col: int = 10):
    gt = np.zeros((size, size))
    gt[:, col] = 1.0
    return gt, derive_label(Grid(gt), 0.3, 3)


class TestThinning:
    """Tests for Zhang-Suen thinning and block breaking."""

    def test_thin_line_unchanged(self):
        mask = np.zeros((7, 9), dtype=bool)
        mask[3, 1:8] = True
        np.testing.assert_array_equal(thin(mask), mask)

    def test_bar_becomes_one_pixel(self):
        mask = np.zeros((9, 15), dtype=bool)
        mask[3:6, 2:13] = True
        out = thin(mask)
        assert out.any()
        assert not has_block(out)
        assert (out & ~mask).sum() == 0
        assert out.sum() < mask.sum()

    @pytest.mark.parametrize("seed", range(5))
    def test_random_mask_thinned_within_support(self, seed):
        rng = np.random.default_rng(seed)
        mask = ndimage.binary_dilation(rng.random((24, 24)) > 0.93, iterations=2)
        out = thin(mask)
        assert not (out & ~mask).any()
        assert not has_block(out)
        assert out.any()

    def test_break_blocks(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[1:3, 1:3] = True
        out = break_blocks(mask)
        assert out.sum() == 3
        assert not has_block(out)

    def test_empty(self):
        assert not thin(np.zeros((5, 5), dtype=bool)).any()


class TestPostprocess:
    """Tests for non-maximum suppression and the standard-protocol pipeline."""

    def test_plateau_keeps_center_column(self):
        values = np.zeros((7, 7))
        values[:, 2] = 0.5
        values[:, 3] = 1.0
        values[:, 4] = 0.5
        out = postprocess(Grid(values)).plane()
        expected = np.zeros((7, 7))
        expected[:, 3] = 1.0
        np.testing.assert_array_equal(out, expected)

    def test_thin_ridge_survives(self):
        values = np.zeros((7, 9))
        values[3, 1:8] = 0.8
        out = postprocess(Grid(values)).plane()
        assert not (out[values == 0] != 0).any()
        assert (out[3, 2:7] == 0.8).all()

    def test_zero_map(self):
        out = postprocess(Grid.zeros(6, 6))
        assert not out.data.any()

    def test_nms_peak(self):
        values = np.zeros((9, 9))
        values[:, 4] = 1.0
        values[:, 3] = values[:, 5] = 0.6
        survive = non_max_suppression(values, 1.0)
        assert survive[:, 4].all()
        assert not survive[:, 3].any() and not survive[:, 5].any()

    def test_values_preserved(self):
        rng = np.random.default_rng(3)
        values = ndimage.gaussian_filter(rng.random((16, 16)), 1.5)
        values /= values.max()
        out = postprocess(Grid(values)).plane()
        kept = out > 0
        np.testing.assert_array_equal(out[kept], values[kept])
        assert not has_block(kept)


class TestCorrespond:
    """Tests for tolerance-limited one-to-one matching."""

    def test_identical(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[2, 1:7] = True
        c = correspond(gt, gt, 1)
        assert (c.tp, c.fp, c.fn) == (6, 0, 0)

    def test_shift_within_radius(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[4, 2:8] = True
        pred = np.roll(gt, 1, axis=0)
        c = correspond(pred, gt, 2)
        assert (c.tp, c.fp, c.fn) == (6, 0, 0)

    def test_shift_beyond_radius(self):
        gt = np.zeros((12, 12), dtype=bool)
        gt[2, 2:8] = True
        pred = np.roll(gt, 5, axis=0)
        c = correspond(pred, gt, 2)
        assert (c.tp, c.fp, c.fn) == (0, 6, 6)
        p, r, f = prf(c.tp, c.fp, c.fn)
        assert (p, r, f) == (0.0, 0.0, 0.0)

    def test_one_to_one(self):
        gt = np.zeros((5, 5), dtype=bool)
        gt[2, 2] = True
        pred = np.zeros((5, 5), dtype=bool)
        pred[2, 1:4] = True
        c = correspond(pred, gt, 1)
        assert (c.tp, c.fp, c.fn) == (1, 2, 0)

    def test_matching_pairs_within_radius(self):
        rng = np.random.default_rng(5)
        pred = rng.random((12, 12)) > 0.7
        gt = rng.random((12, 12)) > 0.7
        c = correspond(pred, gt, 2)
        assert len({p for p, _ in c.matching}) == c.tp
        assert len({g for _, g in c.matching}) == c.tp
        for (pr, pc), (gr, gc) in c.matching:
            assert (pr - gr) ** 2 + (pc - gc) ** 2 <= 4

    def test_against_exhaustive_search(self):
        rng = np.random.default_rng(7)
        for _ in range(150):
            pred = np.zeros((8, 8), dtype=bool)
            gt = np.zeros((8, 8), dtype=bool)
            for mask in (pred, gt):
                flat = rng.choice(64, size=int(rng.integers(0, 9)), replace=False)
                mask.flat[flat] = True
            radius = int(rng.integers(1, 4))
            assert correspond(pred, gt, radius).tp == exhaustive_matching(pred, gt, radius)

    def test_against_assignment_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            density = rng.uniform(0.05, 0.5)
            pred = rng.random((12, 12)) < density
            gt = rng.random((12, 12)) < density
            radius = int(rng.integers(1, 4))
            c = correspond(pred, gt, radius)
            assert c.tp == max_matching_oracle(pred, gt, radius)
            assert c.tp + c.fp == pred.sum()
            assert c.tp + c.fn == gt.sum()

    def test_empty_sides(self):
        empty = np.zeros((4, 4), dtype=bool)
        full = np.ones((4, 4), dtype=bool)
        assert (correspond(empty, full, 1).fn, correspond(full, empty, 1).fp) == (16, 16)

    def test_errors(self):
        with pytest.raises(ValueError, match="shape"):
            correspond(np.zeros((3, 3)), np.zeros((3, 4)), 1)
        with pytest.raises(ValueError, match="radius"):
            correspond(np.zeros((3, 3)), np.zeros((3, 3)), 0)

    def test_disk_offsets(self):
        offsets = disk_offsets(1)
        assert offsets[0] == (0, 0)
        assert sorted(offsets) == [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]

    def test_adjacency_graph(self):
        pred = np.zeros((5, 5), dtype=bool)
        pred[2, 1:4] = True
        gt = np.zeros((5, 5), dtype=bool)
        gt[2, 2] = True
        gt[4, 4] = True
        pred_pts, gt_pts, graph = build_adjacency(pred, gt, 1)
        assert graph.shape == (3, 2)
        # every predicted pixel reaches (2, 2); none reaches (4, 4)
        assert graph.toarray().tolist() == [[1, 0], [1, 0], [1, 0]]
        assert gt_pts.tolist() == [[2, 2], [4, 4]]

    def test_large_dense_instance(self):
        rng = np.random.default_rng(21)
        pred = rng.random((48, 48)) < 0.3
        gt = rng.random((48, 48)) < 0.3
        c = correspond(pred, gt, 2)
        assert c.tp == max_matching_oracle(pred, gt, 2)


class TestScores:
    """Tests for precision/recall conventions and the match radius."""

    def test_prf_conventions(self):
        assert prf(0, 0, 5) == (1.0, 0.0, 0.0)
        assert prf(0, 3, 0) == (0.0, 1.0, 0.0)
        assert prf(0, 0, 0) == (1.0, 1.0, 1.0)
        p, r, f = prf(3, 1, 1)
        assert (p, r, f) == (0.75, 0.75, pytest.approx(0.75))

    @pytest.mark.parametrize(
        "h, w, tol, radius",
        [(321, 481, 0.0075, 4), (321, 481, 0.011, 6), (10, 10, 0.0075, 1), (64, 64, 0.011, 1)],
    )
    def test_match_radius(self, h, w, tol, radius):
        assert match_radius(h, w, tol) == radius

    def test_threshold_values(self):
        values = EvalConfig().threshold_values()
        assert len(values) == 99
        assert values[0] == pytest.approx(0.01)
        assert values[-1] == pytest.approx(0.99)
        assert EvalConfig(thresholds=1).threshold_values().tolist() == [0.5]

    @pytest.mark.parametrize("kwargs", [{"tolerance": 0.0}, {"thresholds": 0}, {"protocol": "loose"}])
    def test_config_rejects(self, kwargs):
        with pytest.raises(ValueError):
            EvalConfig(**kwargs)


class TestSummarize:
    """Tests for ODS/OIS aggregation from per-image counts."""

    def test_hand_counts(self):
        per_image = np.array(
            [
                [[2, 0, 0], [1, 0, 1]],
                [[1, 1, 1], [2, 0, 0]],
            ]
        )
        result = summarize(per_image, np.array([0.3, 0.6]))
        assert result.f[0] == pytest.approx(0.75)
        assert result.f[1] == pytest.approx(6 / 7)
        assert result.ods.threshold == 0.6
        assert (result.ods.precision, result.ods.recall) == (1.0, 0.75)
        assert result.ods.f == pytest.approx(6 / 7)
        assert (result.ois.precision, result.ois.recall, result.ois.f) == (1.0, 1.0, 1.0)
        assert result.best_thresholds.tolist() == [0.3, 0.6]
        assert result.ois.f >= result.ods.f

    def test_ties_pick_lower_threshold(self):
        per_image = np.array([[[3, 1, 0], [3, 1, 0], [3, 1, 0]]])
        result = summarize(per_image, np.array([0.25, 0.5, 0.75]))
        assert result.ods.threshold == 0.25
        assert result.best_thresholds.tolist() == [0.25]

    def test_needs_images(self):
        with pytest.raises(ValueError):
            summarize(np.zeros((0, 3, 3)), np.array([0.25, 0.5, 0.75]))


class TestEvaluate:
    """Tests for the end-to-end benchmark."""

    def test_perfect_binary_prediction(self):
        gt, label = line_label()
        result = evaluate([Grid(gt)], [label], EvalConfig(protocol="crisp"))
        assert result.ods.f == 1.0
        assert result.ois.f == 1.0
        assert (result.f == 1.0).all()

    def test_perfect_under_standard(self):
        gt, label = line_label()
        result = evaluate([Grid(gt)], [label], EvalConfig(protocol="standard"))
        assert result.ods.f == 1.0

    def test_blur_costs_more_under_crisp(self):
        gt, label = line_label()
        blurred = ndimage.gaussian_filter(gt, 4.0)
        blurred /= blurred.max()
        cfg = {"thresholds": 9}
        standard = evaluate([Grid(blurred)], [label], EvalConfig(protocol="standard", **cfg))
        crisp = evaluate([Grid(blurred)], [label], EvalConfig(protocol="crisp", **cfg))
        assert crisp.ods.f < standard.ods.f
        assert standard.ods.f == pytest.approx(1.0)

    def test_counts_shape(self):
        gt, label = line_label(12, 4)
        result = evaluate([Grid(gt), Grid(np.zeros((12, 12)))], [label, label], EvalConfig(thresholds=5))
        assert result.counts.shape == (5, 3)
        assert result.per_image.shape == (2, 5, 3)
        assert result.counts[0].tolist() == [12, 0, 12]

    def test_jobs_match_serial(self):
        rng = np.random.default_rng(2)
        preds, labels = [], []
        for i in range(3):
            gt, label = line_label(14, 3 + 3 * i)
            preds.append(Grid(ndimage.gaussian_filter(gt + 0.3 * rng.random(gt.shape), 1.0).clip(0, 1)))
            labels.append(label)
        cfg = EvalConfig(thresholds=9)
        serial = evaluate(preds, labels, cfg, jobs=1)
        parallel = evaluate(preds, labels, cfg, jobs=2)
        np.testing.assert_array_equal(serial.per_image, parallel.per_image)
        assert serial.ods == parallel.ods

    def test_errors(self):
        gt, label = line_label(8, 2)
        with pytest.raises(ValueError, match="empty"):
            evaluate([], [], EvalConfig())
        with pytest.raises(ValueError, match="labels"):
            evaluate([Grid(gt)], [label, label], EvalConfig())
        with pytest.raises(ValueError, match="prediction"):
            evaluate([Grid(np.zeros((9, 8)))], [label], EvalConfig())


class TestReports:
    """Tests for the PR curve CSV and multi-trial summaries."""

    @pytest.fixture
    def result(self):
        per_image = np.array([[[2, 0, 0], [1, 0, 1]], [[1, 1, 1], [2, 0, 0]]])
        return summarize(per_image, np.array([0.3, 0.6]))

    def test_pr_csv(self, result):
        lines = format_pr_csv(result).splitlines()
        assert lines[0] == ",".join(PR_CSV_COLUMNS)
        assert lines[1] == "0.3000,3,1,1,0.750000,0.750000,0.750000"
        assert lines[2] == "0.6000,3,0,1,1.000000,0.750000,0.857143"
        assert lines[3] == "ODS,0.6000,,,1.000000,0.750000,0.857143"
        assert lines[4] == "OIS,,,,1.000000,1.000000,1.000000"

    def test_write_pr_csv(self, result, tmp_path):
        path = tmp_path / "eval" / "pr.csv"
        write_pr_csv(path, result)
        assert path.read_text() == format_pr_csv(result)

    def test_trials(self, result):
        other = summarize(np.array([[[1, 1, 1], [1, 1, 1]]]), np.array([0.3, 0.6]))
        summary = summarize_trials([result, other])
        assert summary.trials == 2
        assert summary.ods_mean == pytest.approx((6 / 7 + 0.5) / 2)
        assert summary.ods_std == pytest.approx(abs(6 / 7 - 0.5) / 2)
        assert summary.ois_mean == pytest.approx(0.75)

    def test_trials_empty(self):
        with pytest.raises(ValueError):
            summarize_trials([])
