"""Bundled synthetic dataset generator.

Emits a small kitchen-themed corpus (5 objects x 4 actions, 20 clips)
with everything the pipeline consumes: knowledge graph, per-frame oracle
likelihoods, concept embeddings, clip features, search spaces, clip map,
ground truth, zero-shot labels, and a ready-to-run config.

Profiles:
  clean       unambiguous likelihoods and dominant correct-action
              affinities; the pipeline should reach 100% activity
              accuracy from iteration 0.
  confusable  the same structure, but for two objects a distractor
              action carries slightly higher affinity, so initial
              inference errs on those clips; the planted action-separable
              clip features let the refinement loop recover them.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import UsageError
from .seeding import substream

OBJECTS = ["bowl", "bread", "cup", "knife", "pan"]
ACTIONS = ["chop", "pour", "stir", "wipe"]

# Per object: ground-truth action and one affinity-supported distractor.
GT_ACTION = {
    "bowl": "pour",
    "bread": "chop",
    "cup": "pour",
    "knife": "chop",
    "pan": "stir",
}
DISTRACTOR = {
    "bowl": "stir",
    "bread": "wipe",
    "cup": "wipe",
    "knife": "stir",
    "pan": "wipe",
}
# Objects whose distractor out-weighs the ground truth in the confusable profile.
CONFUSED_OBJECTS = ("bowl", "bread")

EVIDENCE = {
    "bowl": [("IsA", "dish", 1.5), ("HasProperty", "round", 1.0)],
    "bread": [("IsA", "food", 1.5), ("HasProperty", "soft", 1.0)],
    "cup": [("IsA", "container", 1.5), ("HasProperty", "hollow", 1.0)],
    "knife": [("IsA", "tool", 1.5), ("HasProperty", "sharp", 1.0)],
    "pan": [("IsA", "cookware", 1.5), ("HasProperty", "flat", 1.0)],
}

UNSEEN_ACTIONS = ["wipe"]

N_CLIPS = 20
FRAMES_PER_CLIP = 6
FEATURE_DIM = 16
FEATURE_SCALE = 8.0
FEATURE_NOISE = 0.05
EMBEDDING_DIM = 300


def _graph_rows(profile: str) -> list[tuple[str, str, str, str]]:
    rows: list[tuple[str, str, str, str]] = []
    for obj in OBJECTS:
        gt, d = GT_ACTION[obj], DISTRACTOR[obj]
        if profile == "clean":
            w_gt, w_d = 3.0, 1.0
        else:
            w_gt = 3.0 if obj in CONFUSED_OBJECTS else 3.3
            w_d = 3.3 if obj in CONFUSED_OBJECTS else 3.0
        rows.append((obj, "UsedFor", gt, repr(w_gt)))
        rows.append((obj, "UsedFor", d, repr(w_d)))
        for rel, evidence, weight in EVIDENCE[obj]:
            rows.append((obj, rel, evidence, repr(weight)))
    # Inert generic assertions; filtered out by both compositional sets.
    rows.append(("bread", "RelatedTo", "butter", "1.0"))
    rows.append(("knife", "RelatedTo", "fork", "1.0"))
    return rows


def _clip_ids() -> list[str]:
    return [f"clip{i:02d}" for i in range(N_CLIPS)]


def _clip_object(i: int) -> str:
    return OBJECTS[i % len(OBJECTS)]


def _frame_ids(clip_id: str) -> list[str]:
    return [f"{clip_id}_t{t:02d}" for t in range(FRAMES_PER_CLIP)]


def _likelihood_rows(seed: int) -> list[tuple[str, str, str]]:
    # The oracle vocabulary covers objects plus every ego-graph evidence
    # concept; UsedFor edges make the action concepts evidence too.
    evidence_names = {obj: [ev for _, ev, _ in EVIDENCE[obj]] for obj in OBJECTS}
    rows = []
    for i, clip_id in enumerate(_clip_ids()):
        obj_true = _clip_object(i)
        act_true = GT_ACTION[obj_true]
        for t, frame_id in enumerate(_frame_ids(clip_id)):
            rng = np.random.default_rng(substream(seed, "likelihood", clip_id, t))

            def jittered(level: float) -> str:
                value = level + float(rng.uniform(-0.02, 0.02))
                return repr(round(min(max(value, 0.01), 0.99), 6))

            for obj in OBJECTS:
                rows.append((frame_id, obj, "0.95" if obj == obj_true else "0.03"))
                strong = obj == obj_true
                for ev, base in zip(evidence_names[obj], (0.85, 0.70)):
                    rows.append((frame_id, ev, jittered(base if strong else 0.08)))
            for action in ACTIONS:
                rows.append((frame_id, action, jittered(0.55 if action == act_true else 0.05)))
    return rows


def _embedding_vectors(seed: int) -> dict[str, np.ndarray]:
    concepts = sorted(
        set(OBJECTS)
        | set(ACTIONS)
        | {ev for evs in EVIDENCE.values() for _, ev, _ in evs}
        | {"butter", "fork"}
    )
    vectors = {}
    for concept in concepts:
        rng = np.random.default_rng(substream(seed, "embedding", concept))
        v = rng.normal(size=EMBEDDING_DIM)
        vectors[concept] = v / np.linalg.norm(v)
    return vectors


def _feature_vectors(seed: int) -> dict[str, np.ndarray]:
    bases = {}
    for action in ACTIONS:
        rng = np.random.default_rng(substream(seed, "feature_base", action))
        v = rng.normal(size=FEATURE_DIM)
        bases[action] = FEATURE_SCALE * v / np.linalg.norm(v)
    feats = {}
    for i, clip_id in enumerate(_clip_ids()):
        action = GT_ACTION[_clip_object(i)]
        rng = np.random.default_rng(substream(seed, "feature", clip_id))
        feats[clip_id] = bases[action] + FEATURE_NOISE * rng.normal(size=FEATURE_DIM)
    return feats


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def generate_toy(out_dir: str | Path, seed: int = 7, profile: str = "clean") -> Path:
    """Write the bundled synthetic dataset; returns the config path."""
    if profile not in ("clean", "confusable"):
        raise UsageError(f"unknown toy profile {profile!r} (use clean or confusable)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "graph.tsv", "w", encoding="utf-8") as fh:
        fh.write("# synthetic kitchen knowledge graph\n")
        for row in _graph_rows(profile):
            fh.write("\t".join(row) + "\n")

    _write_csv(out / "likelihoods.csv", ["frame_id", "concept", "probability"], _likelihood_rows(seed))

    with open(out / "objects.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(OBJECTS) + "\n")
    with open(out / "actions.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(ACTIONS) + "\n")
    with open(out / "unseen_actions.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(UNSEEN_ACTIONS) + "\n")

    with open(out / "embeddings.txt", "w", encoding="utf-8") as fh:
        for concept, vec in sorted(_embedding_vectors(seed).items()):
            fh.write(concept + " " + " ".join(repr(float(v)) for v in vec) + "\n")

    feats = _feature_vectors(seed)
    _write_csv(
        out / "features.csv",
        ["clip_id"] + [f"v{i + 1}" for i in range(FEATURE_DIM)],
        [[cid] + [repr(float(v)) for v in vec] for cid, vec in sorted(feats.items())],
    )

    _write_csv(
        out / "clips.csv",
        ["frame_id", "clip_id"],
        [
            (frame_id, clip_id)
            for clip_id in _clip_ids()
            for frame_id in _frame_ids(clip_id)
        ],
    )

    _write_csv(
        out / "groundtruth.csv",
        ["clip_id", "verb", "noun"],
        [
            (clip_id, GT_ACTION[_clip_object(i)], _clip_object(i))
            for i, clip_id in enumerate(_clip_ids())
        ],
    )

    activities = sorted({(GT_ACTION[o], o) for o in OBJECTS})
    _write_csv(
        out / "labels.csv",
        ["label_id", "verb", "noun"],
        [(f"{verb}_{noun}", verb, noun) for verb, noun in activities],
    )
    _write_csv(
        out / "zs_groundtruth.csv",
        ["clip_id", "label_id"],
        [
            (clip_id, f"{GT_ACTION[_clip_object(i)]}_{_clip_object(i)}")
            for i, clip_id in enumerate(_clip_ids())
        ],
    )

    config_path = out / "config.yaml"
    config_path.write_text(
        "\n".join(
            [
                f"# toy dataset config (profile: {profile})",
                f"seed: {seed}",
                "paths:",
                "  graph: graph.tsv",
                "  likelihoods: likelihoods.csv",
                "  embeddings: embeddings.txt",
                "  features: features.csv",
                "  objects: objects.txt",
                "  actions: actions.txt",
                "  clips: clips.csv",
                "  ground_truth: groundtruth.csv",
                "  labels: labels.csv",
                "  zeroshot_ground_truth: zs_groundtruth.csv",
                "  unseen_actions: unseen_actions.txt",
                "  out_dir: out",
                "affinity:",
                "  decay_lambda: 1.0",
                "  max_hops: 1",
                "energy:",
                "  epsilon: 1.0e-6",
                "anneal:",
                "  t0: 1.0",
                "  alpha: 0.95",
                "  iterations: 2000",
                "train:",
                "  epochs: 80",
                "  batch_size: 256",
                "  learning_rate: 1.0",
                "refine:",
                "  max_iterations: 3",
                "  saturation_delta: 0.005",
                "inference:",
                "  mode: exhaustive",
                "  top_k: 10",
                "smoothing:",
                "  top_m: 2",
                "  per_frame_a: 5",
                "predict:",
                "  temperature: 0.25",
                "threads: 1",
                "",
            ]
        ),
        encoding="utf-8",
    )
    return config_path
