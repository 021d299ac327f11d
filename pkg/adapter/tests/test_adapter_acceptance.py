"""Adapter acceptance: schema conformance against the engine's loaders.

Requires the engine package (actinfer) to be installed in the same
environment; the adapter itself never imports it at runtime.
"""

import logging

import numpy as np
import pytest

from egoadapter.cli import main
from egoadapter.roi import GazeRecord, roi_crop

actinfer_grounding = pytest.importorskip("actinfer.grounding")
actinfer_actionmap = pytest.importorskip("actinfer.actionmap")


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {name}: {status}{suffix}")
    assert ok, f"{name} failed{suffix}"


def test_adapter_schema_conformance(tmp_path, caplog):
    gaze = tmp_path / "gaze.csv"
    gaze.write_text(
        "frame_id,x,y\n" + "\n".join(f"f{i:03d},{i * 3},{i * 2}" for i in range(8)) + "\n"
    )
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("knife\nbowl\ncutting\ntool\n")
    clips = tmp_path / "clips.txt"
    clips.write_text("clip00\nclip01\nclip02\n")

    lik_a, lik_b = tmp_path / "lik_a.csv", tmp_path / "lik_b.csv"
    feat_a, feat_b = tmp_path / "feat_a.csv", tmp_path / "feat_b.csv"
    for out in (lik_a, lik_b):
        assert (
            main(
                ["likelihoods", "--gaze", str(gaze), "--vocab", str(vocab), "--mode", "stub", "--seed", "11", "--out", str(out)]
            )
            == 0
        )
    for out in (feat_a, feat_b):
        assert (
            main(
                ["features", "--clips", str(clips), "--mode", "stub", "--seed", "11", "--dim", "48", "--out", str(out)]
            )
            == 0
        )

    identical = (
        lik_a.read_bytes() == lik_b.read_bytes() and feat_a.read_bytes() == feat_b.read_bytes()
    )

    # Engine loaders must accept the files without a single warning.
    with caplog.at_level(logging.WARNING):
        table = actinfer_grounding.load_likelihoods(lik_a)
        feats = actinfer_actionmap.load_features(feat_a)
    zero_warnings = len(caplog.records) == 0
    loads = len(table) == 8 * 4 and len(feats) == 3 and feats.dim == 48

    # roi_crop worked examples: center span, corner clamp, absent fallback.
    frame = np.arange(400 * 400).reshape(400, 400)
    center = roi_crop(frame, GazeRecord("f", 200.0, 200.0))
    origin = roi_crop(frame, GazeRecord("f", 0.0, 0.0))
    absent = roi_crop(frame, GazeRecord("f", None, None))
    crops_ok = (
        center[0, 0] == frame[100, 100]
        and center[-1, -1] == frame[299, 299]
        and origin[0, 0] == frame[0, 0]
        and origin[-1, -1] == frame[199, 199]
        and np.array_equal(absent, center)
    )

    report(
        "adapter-schema-conformance",
        identical and zero_warnings and loads and crops_ok,
        "stub files load with zero warnings, reruns byte-identical, ROI examples exact",
    )
