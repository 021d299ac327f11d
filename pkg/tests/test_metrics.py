import math

import numpy as np
import pytest

from actinfer.actionmap import EmbeddingTable
from actinfer.errors import DataError
from actinfer.metrics import (
    MetricReport,
    Metric,
    accuracy,
    average_precision,
    class_map,
    mean_nbws,
    word_level_accuracy,
)


class TestAccuracy:
    def test_all_match(self):
        preds = {"c1": "knife", "c2": "bowl"}
        assert accuracy(preds, dict(preds)).value == 1.0

    def test_none_match(self):
        assert accuracy({"c1": "knife"}, {"c1": "bowl"}).value == 0.0

    def test_three_of_four(self):
        preds = {"c1": "a", "c2": "b", "c3": "c", "c4": "d"}
        gt = {"c1": "a", "c2": "b", "c3": "c", "c4": "x"}
        m = accuracy(preds, gt)
        assert m.value == 0.75
        assert m.support == 4

    def test_clip_mismatch_lists_missing(self):
        with pytest.raises(DataError, match="c2"):
            accuracy({"c1": "a"}, {"c1": "a", "c2": "b"})


class TestWordLevelAccuracy:
    def test_half_match(self):
        preds = {"c1": ("cut", "tomato")}
        gt = {"c1": ("cut", "cucumber")}
        assert word_level_accuracy(preds, gt).value == 0.5

    def test_full_match(self):
        preds = {"c1": ("cut", "tomato")}
        assert word_level_accuracy(preds, dict(preds)).value == 1.0

    def test_mean_over_clips(self):
        preds = {"c1": ("cut", "tomato"), "c2": ("pour", "cup")}
        gt = {"c1": ("cut", "tomato"), "c2": ("stir", "bowl")}
        assert word_level_accuracy(preds, gt).value == 0.5

    def test_equals_accuracy_when_words_agree_together(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 15))
            preds, gt, joint = {}, {}, {}
            for i in range(n):
                ok = bool(rng.integers(2))
                gt[f"c{i}"] = ("v", "n")
                preds[f"c{i}"] = ("v", "n") if ok else ("x", "y")
                joint[f"c{i}"] = "vn" if ok else "xy"
            gt_joint = {c: "vn" for c in gt}
            assert word_level_accuracy(preds, gt).value == accuracy(joint, gt_joint).value


class TestMeanNbws:
    def orth_table(self):
        return EmbeddingTable(
            {
                "cut": np.array([1.0, 0.0, 0.0]),
                "pour": np.array([0.0, 1.0, 0.0]),
                "stir": np.array([0.0, 0.0, 1.0]),
            }
        )

    def test_exact_match_is_one(self):
        emb = self.orth_table()
        m = mean_nbws({"c1": "cut"}, {"c1": "cut"}, emb)
        assert m.value == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_is_zero(self):
        emb = self.orth_table()
        m = mean_nbws({"c1": "cut"}, {"c1": "pour"}, emb)
        assert m.value == pytest.approx(0.0, abs=1e-12)

    def test_mean_and_support(self):
        emb = self.orth_table()
        preds = {"c1": "cut", "c2": "cut"}
        gt = {"c1": "cut", "c2": "pour"}
        m = mean_nbws(preds, gt, emb)
        assert m.value == pytest.approx(0.5, abs=1e-12)
        assert m.support == 2

    def test_missing_embedding_skipped(self, caplog):
        emb = self.orth_table()
        preds = {"c1": "cut", "c2": "juggle"}
        gt = {"c1": "cut", "c2": "pour"}
        with caplog.at_level("WARNING"):
            m = mean_nbws(preds, gt, emb)
        assert m.support == 1
        assert m.value == pytest.approx(1.0, abs=1e-12)

    def test_all_skipped_is_error(self):
        emb = self.orth_table()
        with pytest.raises(DataError):
            mean_nbws({"c1": "juggle"}, {"c1": "woggle"}, emb)


class TestClassMap:
    def test_perfect_ranking(self):
        scores = {"c1": {"L": 0.9}, "c2": {"L": 0.8}, "c3": {"L": 0.1}}
        gt = {"c1": {"L"}, "c2": {"L"}, "c3": set()}
        assert class_map(scores, gt).value == 1.0

    def test_hand_ap_half(self):
        # Single positive ranked 2nd of 2 -> AP = 0.5.
        scores = {"c1": {"L": 0.9}, "c2": {"L": 0.5}}
        gt = {"c1": set(), "c2": {"L"}}
        assert class_map(scores, gt).value == 0.5

    def test_label_without_positives_excluded(self):
        scores = {"c1": {"L1": 0.9, "L2": 0.4}, "c2": {"L1": 0.1, "L2": 0.6}}
        gt = {"c1": {"L1"}, "c2": set()}
        m = class_map(scores, gt)
        assert m.support == 1
        assert m.value == 1.0

    def test_no_positives_anywhere_is_error(self):
        scores = {"c1": {"L1": 0.9}}
        gt = {"c1": set()}
        with pytest.raises(DataError):
            class_map(scores, gt)

    def test_missing_label_score_is_error(self):
        scores = {"c1": {"L1": 0.9, "L2": 0.1}, "c2": {"L1": 0.2}}
        gt = {"c1": {"L1"}, "c2": {"L2"}}
        with pytest.raises(DataError, match="c2"):
            class_map(scores, gt)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        clips = [f"c{i}" for i in range(12)]
        labels = [f"L{j}" for j in range(4)]
        scores = {c: {l: float(rng.uniform()) for l in labels} for c in clips}
        gt = {c: {l for l in labels if rng.uniform() < 0.3} for c in clips}
        if not any(gt.values()):
            gt[clips[0]] = {labels[0]}
        base = class_map(scores, gt).value
        squashed = {c: {l: math.tanh(3.0 * v) for l, v in row.items()} for c, row in scores.items()}
        assert class_map(squashed, gt).value == pytest.approx(base, abs=1e-12)

    def test_average_precision_requires_positive(self):
        with pytest.raises(DataError):
            average_precision([False, False])


def brute_force_ap(ranked_flags):
    hits, out = 0, []
    for rank, flag in enumerate(ranked_flags, 1):
        if flag:
            hits += 1
            out.append(hits / rank)
    return sum(out) / len(out)


class TestBruteForceEquivalence:
    def test_random_instances(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            n_clips = int(rng.integers(1, 20))
            n_labels = int(rng.integers(1, 10))
            clips = [f"c{i:02d}" for i in range(n_clips)]
            labels = [f"L{j}" for j in range(n_labels)]
            verbs = ["cut", "pour", "stir"]
            nouns = ["bowl", "cup"]
            emb = EmbeddingTable(
                {w: rng.normal(size=8) for w in verbs + nouns}
            )
            preds = {c: (verbs[int(rng.integers(3))], nouns[int(rng.integers(2))]) for c in clips}
            gt = {c: (verbs[int(rng.integers(3))], nouns[int(rng.integers(2))]) for c in clips}

            # accuracy (verbs)
            acc = accuracy({c: preds[c][0] for c in clips}, {c: gt[c][0] for c in clips})
            assert acc.value == sum(preds[c][0] == gt[c][0] for c in clips) / n_clips

            # word-level
            wl = word_level_accuracy(preds, gt)
            expected = (
                sum(
                    (float(preds[c][0] == gt[c][0]) + float(preds[c][1] == gt[c][1])) / 2
                    for c in clips
                )
                / n_clips
            )
            assert wl.value == pytest.approx(expected, abs=1e-12)

            # NB-WS
            def cos(a, b):
                va, vb = emb[a], emb[b]
                return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))

            nb = mean_nbws({c: preds[c][0] for c in clips}, {c: gt[c][0] for c in clips}, emb)
            assert nb.value == pytest.approx(
                sum(cos(preds[c][0], gt[c][0]) for c in clips) / n_clips, abs=1e-12
            )

            # mAP
            scores = {c: {l: float(rng.uniform()) for l in labels} for c in clips}
            zs_gt = {c: {l for l in labels if rng.uniform() < 0.4} for c in clips}
            if not any(zs_gt.values()):
                zs_gt[clips[0]] = {labels[0]}
            aps = []
            for l in labels:
                pos = {c for c in clips if l in zs_gt[c]}
                if not pos:
                    continue
                ranked = sorted(clips, key=lambda c: (-scores[c][l], c))
                aps.append(brute_force_ap([c in pos for c in ranked]))
            mine = class_map(scores, zs_gt)
            assert mine.value == pytest.approx(sum(aps) / len(aps), abs=1e-12)
            assert mine.support == len(aps)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        clips = [f"c{i}" for i in range(10)]
        preds = {c: ("cut", "bowl") if rng.uniform() < 0.5 else ("pour", "cup") for c in clips}
        gt = {c: ("cut", "bowl") for c in clips}
        base = word_level_accuracy(preds, gt).value
        shuffled_preds = dict(sorted(preds.items(), key=lambda kv: kv[1]))
        assert word_level_accuracy(shuffled_preds, gt).value == base


class TestReport:
    def test_json_and_text(self):
        report = MetricReport(
            object_accuracy=Metric(0.5, 4),
            action_accuracy=Metric(0.25, 4),
            activity_word_accuracy=Metric(0.375, 4),
        )
        data = report.to_dict()
        assert data["object_accuracy"] == {"value": 0.5, "support": 4}
        assert "class_mean_ap" not in data
        text = report.to_text()
        assert "object_accuracy" in text
        assert "0.500000" in text
