import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actinfer.errors import DataError
from actinfer.grounding import (
    LikelihoodTable,
    SearchSpace,
    evidence_sum,
    ground_frame,
    load_likelihoods,
    load_search_space,
)
from actinfer.kgraph import load_graph


def write_likelihoods(tmp_path, rows):
    path = tmp_path / "lik.csv"
    lines = ["frame_id,concept,probability"] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestLikelihoodTable:
    def test_load_single_row(self, tmp_path):
        table = load_likelihoods(write_likelihoods(tmp_path, [("f1", "knife", 0.9)]))
        assert table.frames == ["f1"]
        assert table.prob("f1", "knife") == 0.9

    def test_duplicate_rejected(self, tmp_path):
        path = write_likelihoods(tmp_path, [("f1", "knife", 0.9), ("f1", "knife", 0.8)])
        with pytest.raises(DataError, match="duplicate"):
            load_likelihoods(path)

    def test_out_of_range_reports_row(self, tmp_path):
        path = write_likelihoods(tmp_path, [("f1", "knife", 0.9), ("f1", "fork", 1.5)])
        with pytest.raises(DataError, match=":3"):
            load_likelihoods(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "lik.csv"
        path.write_text("frame,concept,p\nf1,knife,0.9\n")
        with pytest.raises(DataError, match="header"):
            load_likelihoods(path)

    def test_frames_ordered_by_first_appearance(self, tmp_path):
        rows = [("f2", "a", 0.1), ("f1", "a", 0.2), ("f2", "b", 0.3)]
        table = load_likelihoods(write_likelihoods(tmp_path, rows))
        assert table.frames == ["f2", "f1"]


class TestSearchSpace:
    def test_empty_rejected(self):
        with pytest.raises(DataError):
            SearchSpace(objects=[], actions=["cut"])

    def test_duplicates_rejected(self):
        with pytest.raises(DataError):
            SearchSpace(objects=["knife", "knife"], actions=["cut"])

    def test_resolve_drops_unknown(self, caplog):
        g = load_graph([("knife", "IsA", "tool", 1.0), ("cut", "UsedFor", "knife", 1.0)])
        space = SearchSpace(objects=["knife", "ghost"], actions=["cut"])
        with caplog.at_level("WARNING"):
            resolved = space.resolve(g)
        assert resolved.objects == ["knife"]
        assert "ghost" in caplog.text

    def test_load_from_files(self, tmp_path):
        (tmp_path / "objects.txt").write_text("knife\n# comment\nbowl\n")
        (tmp_path / "actions.txt").write_text("cut\n")
        space = load_search_space(tmp_path / "objects.txt", tmp_path / "actions.txt")
        assert space.objects == ["knife", "bowl"]
        assert space.actions == ["cut"]


def _evidence_setup():
    g = load_graph(
        [
            ("knife", "IsA", "tool", 0.8),
            ("knife", "UsedFor", "cutting", 0.4),
        ]
    )
    table = LikelihoodTable(
        [("f1", "tool", 0.6), ("f1", "cutting", 0.3), ("f1", "knife", 0.9)]
    )
    return g, table


class TestEvidenceSum:
    def test_hand_computed(self):
        g, table = _evidence_setup()
        ego = g.ego_graph("knife")
        assert evidence_sum("knife", ego, "f1", table) == pytest.approx(
            0.8 * 0.6 + 0.4 * 0.3, abs=1e-12
        )

    def test_empty_ego_is_zero(self):
        g = load_graph([("knife", "RelatedTo", "fork", 1.0)])
        table = LikelihoodTable([("f1", "knife", 0.9)])
        assert evidence_sum("knife", g.ego_graph("knife"), "f1", table) == 0.0

    def test_missing_evidence_contributes_zero(self, caplog):
        g, _ = _evidence_setup()
        table = LikelihoodTable([("f1", "tool", 0.6)])  # no 'cutting'
        with caplog.at_level("WARNING"):
            total = evidence_sum("knife", g.ego_graph("knife"), "f1", table)
        assert total == pytest.approx(0.8 * 0.6, abs=1e-12)
        assert "cutting" in caplog.text

    def test_center_mismatch_rejected(self):
        g, table = _evidence_setup()
        with pytest.raises(DataError):
            evidence_sum("fork", g.ego_graph("knife"), "f1", table)


def _two_object_setup():
    # Object o1 has evidence e1 (weight 1.0), o2 has e2 (weight 1.0);
    # likelihoods give evidence sums 0.6 and 0.2.
    g = load_graph(
        [
            ("o1", "IsA", "e1", 1.0),
            ("o2", "IsA", "e2", 1.0),
            ("act", "UsedFor", "o1", 1.0),
            ("act", "UsedFor", "o2", 1.0),
        ]
    )
    table = LikelihoodTable(
        [
            ("f1", "o1", 0.5),
            ("f1", "o2", 0.4),
            ("f1", "e1", 0.6),
            ("f1", "e2", 0.2),
        ]
    )
    space = SearchSpace(objects=["o1", "o2"], actions=["act"])
    return g, table, space


class TestGroundFrame:
    def test_hand_computed_scores(self):
        g, table, space = _two_object_setup()
        scores = ground_frame(space, "f1", table, g)
        assert scores["o1"].normalized_evidence == pytest.approx(0.75, abs=1e-12)
        assert scores["o2"].normalized_evidence == pytest.approx(0.25, abs=1e-12)
        assert scores["o1"].score == pytest.approx(0.375, abs=1e-9)
        assert scores["o2"].score == pytest.approx(0.100, abs=1e-9)

    def test_singleton_space_uses_oracle_likelihood(self):
        g, table, _ = _two_object_setup()
        space = SearchSpace(objects=["o1"], actions=["act"])
        scores = ground_frame(space, "f1", table, g)
        assert scores["o1"].normalized_evidence == 1.0
        assert scores["o1"].score == pytest.approx(0.5, abs=1e-12)

    def test_all_zero_evidence_uniform(self):
        g = load_graph(
            [
                ("o1", "RelatedTo", "x", 1.0),
                ("o2", "RelatedTo", "x", 1.0),
                ("o3", "RelatedTo", "x", 1.0),
                ("o4", "RelatedTo", "x", 1.0),
                ("act", "UsedFor", "o1", 1.0),
            ]
        )
        table = LikelihoodTable([("f1", c, 0.5) for c in ("o1", "o2", "o3", "o4")])
        space = SearchSpace(objects=["o1", "o2", "o3", "o4"], actions=["act"])
        scores = ground_frame(space, "f1", table, g)
        for obj in space.objects:
            assert scores[obj].normalized_evidence == pytest.approx(0.25, abs=1e-12)

    def test_unknown_frame_rejected(self):
        g, table, space = _two_object_setup()
        with pytest.raises(DataError, match="f9"):
            ground_frame(space, "f9", table, g)

    def test_missing_object_likelihood_is_zero(self, caplog):
        g, _, space = _two_object_setup()
        table = LikelihoodTable([("f1", "e1", 0.6), ("f1", "e2", 0.2), ("f1", "o2", 0.4)])
        with caplog.at_level("WARNING"):
            scores = ground_frame(space, "f1", table, g)
        assert scores["o1"].score == 0.0
        assert scores["o1"].oracle_likelihood == 0.0

    def test_score_bounded(self):
        g, table, space = _two_object_setup()
        for gs in ground_frame(space, "f1", table, g).values():
            assert 0.0 <= gs.score <= 1.0

    def test_edge_weight_scaling_invariance(self):
        _, table, space = _two_object_setup()
        for c in (0.5, 2.0, 17.0):
            g_scaled = load_graph(
                [
                    ("o1", "IsA", "e1", c),
                    ("o2", "IsA", "e2", c),
                    ("act", "UsedFor", "o1", 1.0),
                    ("act", "UsedFor", "o2", 1.0),
                ]
            )
            scores = ground_frame(space, "f1", table, g_scaled)
            assert scores["o1"].normalized_evidence == pytest.approx(0.75, abs=1e-12)
            assert scores["o2"].normalized_evidence == pytest.approx(0.25, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_normalized_evidence_sums_to_one(self, seed):
        rng = np.random.default_rng(seed)
        n_obj = int(rng.integers(2, 6))
        objects = [f"o{i}" for i in range(n_obj)]
        rows = []
        lik = []
        for i, obj in enumerate(objects):
            for j in range(int(rng.integers(1, 4))):
                ev = f"e{i}_{j}"
                rows.append((obj, "IsA", ev, float(np.round(rng.uniform(0.1, 2.0), 3))))
                lik.append(("f1", ev, float(np.round(rng.uniform(0.0, 1.0), 6))))
            lik.append(("f1", obj, float(np.round(rng.uniform(0.0, 1.0), 6))))
        rows.append(("act", "UsedFor", objects[0], 1.0))
        g = load_graph(rows)
        table = LikelihoodTable(lik)
        space = SearchSpace(objects=objects, actions=["act"])
        scores = ground_frame(space, "f1", table, g)
        total = sum(gs.normalized_evidence for gs in scores.values())
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_matches_bruteforce_recomputation(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            n_obj = int(rng.integers(2, 5))
            objects = [f"o{i}" for i in range(n_obj)]
            rows = [("act", "UsedFor", o, 1.0) for o in objects]
            lik = []
            weights: dict[str, list[tuple[str, float]]] = {o: [] for o in objects}
            for i, obj in enumerate(objects):
                lik.append(("f1", obj, float(np.round(rng.uniform(0, 1), 6))))
                for j in range(int(rng.integers(0, 3))):
                    ev = f"e{i}_{j}"
                    w = float(np.round(rng.uniform(0.1, 2.0), 3))
                    rows.append((obj, "UsedFor", ev, w))
                    weights[obj].append((ev, w))
                    lik.append(("f1", ev, float(np.round(rng.uniform(0, 1), 6))))
            g = load_graph(rows)
            table = LikelihoodTable(lik)
            space = SearchSpace(objects=objects, actions=["act"])
            scores = ground_frame(space, "f1", table, g)

            # Independent recomputation straight from the raw tables.
            sums = {
                o: sum(w * (table.prob("f1", ev) or 0.0) for ev, w in weights[o])
                for o in objects
            }
            denom = sum(sums.values())
            for o in objects:
                norm = sums[o] / denom if denom > 0 else 1.0 / len(objects)
                expected = (table.prob("f1", o) or 0.0) * norm
                assert scores[o].score == pytest.approx(expected, abs=1e-12)
