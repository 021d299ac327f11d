"""Command-line surface for the inference pipeline.

Subcommands: ground, infer, smooth, train-map, refine, zeroshot, eval,
gen-toy, vocab-dump.  Configuration comes from a YAML file (--config)
with flag overrides; all randomness flows from one root seed through
named substreams.  Exit codes: 0 success, 1 usage, 2 data error, 3
internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from .actionmap import (
    ClipActionTargets,
    ActionTarget,
    ClipInterpretation,
    EmbeddingTable,
    FeatureTable,
    LinearMap,
    TrainConfig,
    clip_interpretations,
    load_embeddings,
    load_features,
    make_training_set,
    temporal_smooth,
    train_map,
)
from .errors import ActInferError, DataError, UsageError
from .grounding import (
    LikelihoodTable,
    SearchSpace,
    ground_frame,
    load_concept_list,
    load_likelihoods,
    load_search_space,
)
from .inference import (
    ActionPriorTable,
    AnnealSchedule,
    EnergyTransform,
    Interpretation,
    infer_exhaustive,
    infer_mcmc,
)
from .kgraph import AffinityParams, KnowledgeGraph, load_graph_file
from .metrics import (
    Metric,
    MetricReport,
    accuracy,
    class_map,
    load_ground_truth,
    load_zeroshot_ground_truth,
    mean_nbws,
    word_level_accuracy,
)
from .refine import (
    ClipData,
    IterationReport,
    IterationState,
    RefinementConfig,
    load_labels,
    refine_loop,
    zero_shot_map,
    zero_shot_scores,
)
from .seeding import substream
from .toydata import generate_toy

log = logging.getLogger(__name__)

PATH_KEYS = (
    "graph",
    "likelihoods",
    "embeddings",
    "features",
    "objects",
    "actions",
    "clips",
    "ground_truth",
    "labels",
    "zeroshot_ground_truth",
    "unseen_actions",
    "out_dir",
)


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    mode: str = "exhaustive"
    top_k: int = 10
    top_m: int = 10
    per_frame_a: int = 5
    temperature: float = 0.1
    paths: dict[str, Path] = field(default_factory=dict)
    affinity: AffinityParams = field(default_factory=AffinityParams)
    energy: EnergyTransform = field(default_factory=EnergyTransform)
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    train: TrainConfig = field(default_factory=TrainConfig)
    refine_max_iterations: int = 3
    refine_saturation_delta: float = 0.005

    def path(self, key: str, required: bool = True) -> Path | None:
        p = self.paths.get(key)
        if p is None and required:
            raise UsageError(f"no {key!r} path configured (config file or flag)")
        return p

    def input_path(self, key: str, required: bool = True) -> Path | None:
        p = self.path(key, required)
        if p is not None and not p.exists():
            raise DataError(f"{key} file not found: {p}")
        return p

    def out_dir(self) -> Path:
        out = self.path("out_dir")
        out.mkdir(parents=True, exist_ok=True)
        return out


def _as_mapping(node, where: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise DataError(f"config section {where!r} must be a mapping")
    return node


def load_config(config_path: Path | None, overrides: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    base = Path.cwd()
    if config_path is not None:
        if not config_path.exists():
            raise DataError(f"config file not found: {config_path}")
        with open(config_path, "r", encoding="utf-8") as fh:
            try:
                raw = yaml.safe_load(fh) or {}
            except yaml.YAMLError as err:
                raise DataError(f"{config_path}: invalid YAML: {err}") from None
        if not isinstance(raw, dict):
            raise DataError(f"{config_path}: config root must be a mapping")
        base = config_path.parent

    cfg = RunConfig()
    cfg.seed = int(raw.get("seed", cfg.seed))
    cfg.threads = int(raw.get("threads", cfg.threads))

    paths = _as_mapping(raw.get("paths"), "paths")
    for key, value in paths.items():
        if key not in PATH_KEYS:
            raise DataError(f"unknown path key {key!r} in config (known: {', '.join(PATH_KEYS)})")
        cfg.paths[key] = (base / str(value)).resolve()

    aff = _as_mapping(raw.get("affinity"), "affinity")
    cfg.affinity = AffinityParams(
        decay_lambda=float(aff.get("decay_lambda", 1.0)),
        max_hops=int(aff.get("max_hops", 3)),
    )
    en = _as_mapping(raw.get("energy"), "energy")
    cfg.energy = EnergyTransform(epsilon=float(en.get("epsilon", 1e-6)))
    an = _as_mapping(raw.get("anneal"), "anneal")
    cfg.anneal = AnnealSchedule(
        t0=float(an.get("t0", 1.0)),
        alpha=float(an.get("alpha", 0.95)),
        iterations=int(an.get("iterations", 2000)),
        seed=0,
    )
    tr = _as_mapping(raw.get("train"), "train")
    cfg.train = TrainConfig(
        epochs=int(tr.get("epochs", 100)),
        batch_size=int(tr.get("batch_size", 256)),
        learning_rate=float(tr.get("learning_rate", 1e-3)),
        seed=0,
    )
    rf = _as_mapping(raw.get("refine"), "refine")
    cfg.refine_max_iterations = int(rf.get("max_iterations", 3))
    cfg.refine_saturation_delta = float(rf.get("saturation_delta", 0.005))
    inf = _as_mapping(raw.get("inference"), "inference")
    cfg.mode = str(inf.get("mode", "exhaustive"))
    cfg.top_k = int(inf.get("top_k", 10))
    sm = _as_mapping(raw.get("smoothing"), "smoothing")
    cfg.top_m = int(sm.get("top_m", 10))
    cfg.per_frame_a = int(sm.get("per_frame_a", 5))
    pr = _as_mapping(raw.get("predict"), "predict")
    cfg.temperature = float(pr.get("temperature", 0.1))

    # Flags win over the config file.
    for key in PATH_KEYS:
        flag = getattr(overrides, key.replace("-", "_"), None)
        if flag is not None:
            cfg.paths[key] = Path(flag).resolve()
    for attr in ("seed", "threads", "mode", "top_k", "top_m", "per_frame_a", "temperature"):
        value = getattr(overrides, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(overrides, "max_hops", None) is not None or getattr(overrides, "decay_lambda", None) is not None:
        cfg.affinity = AffinityParams(
            decay_lambda=getattr(overrides, "decay_lambda", None) or cfg.affinity.decay_lambda,
            max_hops=getattr(overrides, "max_hops", None) or cfg.affinity.max_hops,
        )
    if getattr(overrides, "iterations", None) is not None:
        cfg.anneal = AnnealSchedule(
            t0=cfg.anneal.t0, alpha=cfg.anneal.alpha, iterations=overrides.iterations, seed=0
        )
    if getattr(overrides, "max_iterations", None) is not None:
        cfg.refine_max_iterations = overrides.max_iterations
    if getattr(overrides, "saturation_delta", None) is not None:
        cfg.refine_saturation_delta = overrides.saturation_delta

    if cfg.mode not in ("exhaustive", "mcmc"):
        raise UsageError(f"unknown inference mode {cfg.mode!r} (use exhaustive or mcmc)")
    if cfg.top_k < 1:
        raise UsageError(f"top_k must be >= 1, got {cfg.top_k}")
    if cfg.threads < 1:
        raise UsageError(f"threads must be >= 1, got {cfg.threads}")
    return cfg


# -- shared pipeline steps ---------------------------------------------------


def _load_graph_and_space(cfg: RunConfig) -> tuple[KnowledgeGraph, SearchSpace]:
    graph = load_graph_file(cfg.input_path("graph"))
    space = load_search_space(cfg.input_path("objects"), cfg.input_path("actions"))
    return graph, space.resolve(graph)


def _load_clip_map(cfg: RunConfig, required: bool = False) -> dict[str, str] | None:
    path = cfg.paths.get("clips")
    if path is None:
        if required:
            raise UsageError("no 'clips' path configured (frame -> clip map is required here)")
        return None
    if not path.exists():
        raise DataError(f"clips file not found: {path}")
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["frame_id", "clip_id"]:
            raise DataError(f"{path}: expected header 'frame_id,clip_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields")
            if row[0] in out:
                raise DataError(f"{path}:{lineno}: duplicate frame {row[0]!r}")
            out[row[0]] = row[1]
    return out


def _ground_all(
    cfg: RunConfig,
    space: SearchSpace,
    table: LikelihoodTable,
    graph: KnowledgeGraph,
) -> dict[str, dict]:
    frames = table.frames

    def one(frame: str):
        return ground_frame(space, frame, table, graph)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one, frames))
    else:
        results = [one(f) for f in frames]
    return dict(zip(frames, results))


def _infer_all(
    cfg: RunConfig,
    space: SearchSpace,
    grounded: dict[str, dict],
    graph: KnowledgeGraph,
    priors: ActionPriorTable,
    clip_map: dict[str, str] | None,
    frames: Sequence[str],
) -> list[list[Interpretation]]:
    affinities = graph.affinity_matrix(space.actions, space.objects, cfg.affinity)

    def one(index_frame: tuple[int, str]) -> list[Interpretation]:
        index, frame = index_frame
        scope = clip_map.get(frame, frame) if clip_map else frame
        if cfg.mode == "exhaustive":
            return infer_exhaustive(
                space, frame, grounded[frame], graph, priors, cfg.affinity,
                cfg.top_k, cfg.energy, affinities, prior_scope=scope,
            )
        schedule = AnnealSchedule(
            t0=cfg.anneal.t0,
            alpha=cfg.anneal.alpha,
            iterations=cfg.anneal.iterations,
            seed=substream(cfg.seed, "infer", index),
        )
        return infer_mcmc(
            space, frame, grounded[frame], graph, priors, schedule, cfg.affinity,
            cfg.top_k, cfg.energy, affinities, prior_scope=scope,
        )

    items = list(enumerate(frames))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(one, items))
    return [one(item) for item in items]


def _write_interpretations(
    path: Path,
    cfg: RunConfig,
    frames: Sequence[str],
    per_frame: Sequence[Sequence[Interpretation]],
    clip_map: dict[str, str] | None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"mode": cfg.mode, "top_k": cfg.top_k, "seed": cfg.seed}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for frame, interps in zip(frames, per_frame):
            record = {
                "frame_id": frame,
                "clip_id": clip_map.get(frame) if clip_map else None,
                "interpretations": [it.to_record() for it in interps],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_interpretations(path: Path) -> list[tuple[str, str | None, list[Interpretation]]]:
    """Read an interpretations JSONL file: (frame, clip, ranked list) rows."""
    if not path.exists():
        raise DataError(f"interpretations file not found: {path}")
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                raise DataError(f"{path}:{lineno}: invalid JSON") from None
            if "frame_id" not in record:
                continue  # header record
            interps = [
                Interpretation(
                    frame=record["frame_id"],
                    action=r["action"],
                    object=r["object"],
                    energy=float(r["energy"]),
                    grounded_score=float(r["grounded_score"]),
                    affinity=float(r["affinity"]),
                    affinity_norm=float(r.get("affinity_norm", 1.0)),
                    action_prior=float(r["action_prior"]),
                )
                for r in record["interpretations"]
            ]
            out.append((record["frame_id"], record.get("clip_id"), interps))
    if not out:
        raise DataError(f"{path}: no frame records")
    return out


def _group_by_clip(
    rows: list[tuple[str, str | None, list[Interpretation]]],
    clip_map: dict[str, str] | None,
) -> dict[str, list[list[Interpretation]]]:
    grouped: dict[str, list[list[Interpretation]]] = {}
    for frame, clip, interps in rows:
        clip_id = clip
        if clip_id is None and clip_map:
            clip_id = clip_map.get(frame)
        if clip_id is None:
            clip_id = frame
        grouped.setdefault(clip_id, []).append(interps)
    return grouped


def _write_clip_rankings(path: Path, rankings: dict[str, list[ClipInterpretation]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for clip_id in sorted(rankings):
            record = {
                "clip_id": clip_id,
                "ranking": [
                    {
                        "action": ci.action,
                        "object": ci.object,
                        "frames": ci.frames,
                        "energy": ci.energy,
                    }
                    for ci in rankings[clip_id]
                ],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_clip_rankings(path: Path) -> dict[str, list[ClipInterpretation]]:
    if not path.exists():
        raise DataError(f"clip rankings file not found: {path}")
    out: dict[str, list[ClipInterpretation]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            out[record["clip_id"]] = [
                ClipInterpretation(
                    action=r["action"],
                    object=r["object"],
                    frames=int(r["frames"]),
                    energy=float(r["energy"]),
                )
                for r in record["ranking"]
            ]
    if not out:
        raise DataError(f"{path}: no clip records")
    return out


def _write_targets(path: Path, targets: Sequence[ClipActionTargets]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in sorted(targets, key=lambda t: t.clip_id):
            record = {
                "clip_id": t.clip_id,
                "top_actions": [
                    {"action": at.action, "energy": at.energy, "frames": at.frames}
                    for at in t.top_actions
                ],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_targets(path: Path) -> list[ClipActionTargets]:
    if not path.exists():
        raise DataError(f"clip targets file not found: {path}")
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            out.append(
                ClipActionTargets(
                    clip_id=record["clip_id"],
                    top_actions=tuple(
                        ActionTarget(
                            action=r["action"],
                            energy=float(r["energy"]),
                            frames=int(r["frames"]),
                        )
                        for r in record["top_actions"]
                    ),
                )
            )
    if not out:
        raise DataError(f"{path}: no clip target records")
    return out


def _write_predictions(path: Path, rankings: dict[str, list[ClipInterpretation]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "verb", "noun"])
        for clip_id in sorted(rankings):
            best = rankings[clip_id][0]
            writer.writerow([clip_id, best.action, best.object])


def _load_unseen(cfg: RunConfig) -> tuple[str, ...]:
    path = cfg.paths.get("unseen_actions")
    if path is None:
        return ()
    if not path.exists():
        raise DataError(f"unseen_actions file not found: {path}")
    return tuple(load_concept_list(path))


# -- subcommands --------------------------------------------------------------


def cmd_ground(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    graph, space = _load_graph_and_space(cfg)
    table = load_likelihoods(cfg.input_path("likelihoods"))
    grounded = _ground_all(cfg, space, table, graph)
    out = cfg.out_dir()
    with open(out / "grounded.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["frame_id", "object", "score", "oracle_likelihood", "evidence_sum", "normalized_evidence"]
        )
        for frame in table.frames:
            for obj in space.objects:
                gs = grounded[frame][obj]
                writer.writerow(
                    [
                        frame,
                        obj,
                        repr(gs.score),
                        repr(gs.oracle_likelihood),
                        repr(gs.evidence_sum),
                        repr(gs.normalized_evidence),
                    ]
                )
    sidecar = {
        frame: {
            obj: [
                {
                    "evidence": t.evidence,
                    "relation": t.relation,
                    "prior_weight": t.prior_weight,
                    "likelihood": t.likelihood,
                    "contribution": t.contribution,
                }
                for t in grounded[frame][obj].evidence_breakdown
            ]
            for obj in space.objects
        }
        for frame in table.frames
    }
    (out / "grounded_evidence.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"grounded {len(table.frames)} frames x {len(space.objects)} objects -> {out / 'grounded.csv'}")
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    graph, space = _load_graph_and_space(cfg)
    table = load_likelihoods(cfg.input_path("likelihoods"))
    clip_map = _load_clip_map(cfg)
    grounded = _ground_all(cfg, space, table, graph)
    per_frame = _infer_all(cfg, space, grounded, graph, ActionPriorTable(), clip_map, table.frames)
    out = cfg.out_dir()
    _write_interpretations(out / "interpretations.jsonl", cfg, table.frames, per_frame, clip_map)
    print(f"inferred {len(table.frames)} frames ({cfg.mode}) -> {out / 'interpretations.jsonl'}")
    return 0


def cmd_smooth(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    clip_map = _load_clip_map(cfg)
    interp_path = Path(args.interpretations) if args.interpretations else cfg.out_dir() / "interpretations.jsonl"
    rows = _read_interpretations(interp_path)
    grouped = _group_by_clip(rows, clip_map)
    out = cfg.out_dir()
    targets = [
        temporal_smooth(clip_id, frames, cfg.top_m, cfg.per_frame_a)
        for clip_id, frames in sorted(grouped.items())
    ]
    rankings = {
        clip_id: clip_interpretations(frames, cfg.top_m)
        for clip_id, frames in sorted(grouped.items())
    }
    _write_targets(out / "clip_targets.jsonl", targets)
    _write_clip_rankings(out / "clip_rankings.jsonl", rankings)
    _write_predictions(out / "predictions.csv", rankings)
    print(f"smoothed {len(grouped)} clips -> {out / 'clip_targets.jsonl'}")
    return 0


def cmd_train_map(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    emb = load_embeddings(cfg.input_path("embeddings"))
    feats = load_features(cfg.input_path("features"))
    targets_path = Path(args.targets) if args.targets else cfg.out_dir() / "clip_targets.jsonl"
    targets = _read_targets(targets_path)
    unseen = set(_load_unseen(cfg))
    samples = make_training_set(targets, feats, emb)
    train_samples = [s for s in samples if s.action not in unseen]
    heldout_samples = [s for s in samples if s.action in unseen]
    if not train_samples:
        raise DataError("every training target is in the unseen-action list")
    train_cfg = TrainConfig(
        epochs=cfg.train.epochs,
        batch_size=cfg.train.batch_size,
        learning_rate=cfg.train.learning_rate,
        seed=substream(cfg.seed, "train", 0),
    )
    linmap, stats = train_map(train_samples, train_cfg, heldout_samples)
    out = cfg.out_dir()
    linmap.save(out / "map.txt")
    report = {
        "train_samples": len(train_samples),
        "heldout_samples": len(heldout_samples),
        "epochs": [
            {
                "epoch": s.epoch,
                "train_mse": s.train_mse,
                "heldout_mse": None if math.isnan(s.heldout_mse) else s.heldout_mse,
            }
            for s in stats
        ],
    }
    (out / "train_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"trained map on {len(train_samples)} samples -> {out / 'map.txt'}")
    return 0


def _persist_iteration(out: Path, cfg: RunConfig, state: IterationState) -> None:
    it_dir = out / f"iter{state.index}"
    it_dir.mkdir(parents=True, exist_ok=True)
    frames = []
    per_frame = []
    clip_of = {}
    for clip_id, interp_lists in sorted(state.frame_interps.items()):
        for interps in interp_lists:
            frame = interps[0].frame if interps else None
            frames.append(frame)
            per_frame.append(interps)
            clip_of[frame] = clip_id
    _write_interpretations(it_dir / "interpretations.jsonl", cfg, frames, per_frame, clip_of)
    _write_clip_rankings(it_dir / "clip_rankings.jsonl", state.clip_rankings)
    _write_targets(it_dir / "clip_targets.jsonl", state.targets)
    state.priors_after.save(it_dir / "priors.csv")
    if state.linmap is not None:
        state.linmap.save(it_dir / "map.txt")
    (it_dir / "report.json").write_text(
        json.dumps(state.report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_refine(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    graph, space = _load_graph_and_space(cfg)
    table = load_likelihoods(cfg.input_path("likelihoods"))
    clip_map = _load_clip_map(cfg, required=True)
    emb = load_embeddings(cfg.input_path("embeddings"))
    feats = load_features(cfg.input_path("features"))
    unseen = _load_unseen(cfg)
    refine_cfg = RefinementConfig(
        max_iterations=cfg.refine_max_iterations,
        saturation_delta=cfg.refine_saturation_delta,
        unseen_actions=unseen,
    )

    clips: dict[str, ClipData] = {}
    for frame in table.frames:
        clip_id = clip_map.get(frame)
        if clip_id is None:
            raise DataError(f"frame {frame!r} missing from the clips map")
        clips.setdefault(clip_id, ClipData(clip_id=clip_id, frames=[])).frames.append(frame)
    clip_list = [clips[c] for c in sorted(clips)]

    grounded = _ground_all(cfg, space, table, graph)
    out = cfg.out_dir()
    refine_dir = out / "refine"
    refine_dir.mkdir(parents=True, exist_ok=True)

    start_iteration = 0
    initial_priors = None
    history: list[IterationReport] = []
    prev_top1 = None
    if args.resume_from is not None:
        resume = int(args.resume_from)
        for i in range(resume + 1):
            it_dir = refine_dir / f"iter{i}"
            report_path = it_dir / "report.json"
            if not report_path.exists():
                raise DataError(f"cannot resume from iteration {resume}: missing {report_path}")
            rec = json.loads(report_path.read_text(encoding="utf-8"))
            history.append(
                IterationReport(
                    index=int(rec["index"]),
                    heldout_mse=math.nan if rec["heldout_mse"] is None else float(rec["heldout_mse"]),
                    agreement=math.nan if rec["agreement"] is None else float(rec["agreement"]),
                )
            )
        initial_priors = ActionPriorTable.load(refine_dir / f"iter{resume}" / "priors.csv")
        prev_rankings = _read_clip_rankings(refine_dir / f"iter{resume}" / "clip_rankings.jsonl")
        prev_top1 = {c: (r[0].action, r[0].object) for c, r in prev_rankings.items()}
        start_iteration = resume + 1

    result = refine_loop(
        clip_list,
        grounded,
        feats,
        space,
        emb,
        graph,
        refine_cfg,
        cfg.train,
        params=cfg.affinity,
        transform=cfg.energy,
        mode=cfg.mode,
        schedule=cfg.anneal,
        top_k=cfg.top_k,
        top_m=cfg.top_m,
        per_frame_a=cfg.per_frame_a,
        temperature=cfg.temperature,
        seed=cfg.seed,
        initial_priors=initial_priors,
        start_iteration=start_iteration,
        history=history,
        prev_top1=prev_top1,
        observer=lambda state: _persist_iteration(refine_dir, cfg, state),
    )

    all_reports = history + [s.report for s in result.iterations]
    report = {
        "iterations": [r.to_dict() for r in all_reports],
        "best_iteration": result.best_index,
        "snapshots": {str(r.index): str(refine_dir / f"iter{r.index}") for r in all_reports},
    }
    (refine_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    best_dir = refine_dir / f"iter{result.best_index}"
    for name, dest in (
        ("interpretations.jsonl", "final_interpretations.jsonl"),
        ("clip_rankings.jsonl", "final_rankings.jsonl"),
    ):
        (out / dest).write_bytes((best_dir / name).read_bytes())
    rankings = _read_clip_rankings(best_dir / "clip_rankings.jsonl")
    _write_predictions(out / "predictions.csv", rankings)
    print(
        f"refined {len(clip_list)} clips over {len(result.iterations)} iteration(s); "
        f"best iteration {result.best_index} -> {out / 'predictions.csv'}"
    )
    return 0


def cmd_zeroshot(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    emb = load_embeddings(cfg.input_path("embeddings"))
    labels = load_labels(cfg.input_path("labels"))
    rankings_path = Path(args.rankings) if args.rankings else cfg.out_dir() / "final_rankings.jsonl"
    rankings = _read_clip_rankings(rankings_path)
    out = cfg.out_dir()
    with open(out / "zeroshot_scores.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "label_id", "score"])
        for clip_id in sorted(rankings):
            scores = zero_shot_scores(rankings[clip_id][:10], labels, emb)
            for label_id in sorted(scores):
                writer.writerow([clip_id, label_id, repr(scores[label_id])])
    with open(out / "zeroshot_assignments.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "label_id", "distance"])
        for clip_id in sorted(rankings):
            label_id, distance = zero_shot_map(rankings[clip_id][:10], labels, emb)
            writer.writerow([clip_id, label_id, repr(distance)])
    print(f"zero-shot mapped {len(rankings)} clips -> {out / 'zeroshot_assignments.csv'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    gt = load_ground_truth(cfg.input_path("ground_truth"))
    preds_path = Path(args.predictions) if args.predictions else cfg.out_dir() / "predictions.csv"
    if not preds_path.exists():
        raise DataError(f"predictions file not found: {preds_path}")
    preds = load_ground_truth(preds_path)  # same clip_id,verb,noun schema

    pred_nouns = {c: vn[1] for c, vn in preds.items()}
    pred_verbs = {c: vn[0] for c, vn in preds.items()}
    gt_nouns = {c: vn[1] for c, vn in gt.items()}
    gt_verbs = {c: vn[0] for c, vn in gt.items()}

    object_acc = accuracy(pred_nouns, gt_nouns)
    action_acc = accuracy(pred_verbs, gt_verbs)
    word_acc = word_level_accuracy(preds, gt)

    nbws = None
    if cfg.paths.get("embeddings") is not None:
        emb = load_embeddings(cfg.input_path("embeddings"))
        nbws = mean_nbws(pred_verbs, gt_verbs, emb)

    cmap = None
    zs_gt_path = cfg.paths.get("zeroshot_ground_truth")
    zs_scores_path = Path(args.zeroshot_scores) if args.zeroshot_scores else cfg.out_dir() / "zeroshot_scores.csv"
    if zs_gt_path is not None and zs_scores_path.exists():
        zs_gt = load_zeroshot_ground_truth(zs_gt_path)
        scores: dict[str, dict[str, float]] = {}
        with open(zs_scores_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["clip_id", "label_id", "score"]:
                raise DataError(f"{zs_scores_path}: expected header 'clip_id,label_id,score'")
            for row in reader:
                if not row:
                    continue
                scores.setdefault(row[0], {})[row[1]] = float(row[2])
        cmap = class_map(scores, zs_gt)

    report = MetricReport(
        object_accuracy=object_acc,
        action_accuracy=action_acc,
        activity_word_accuracy=word_acc,
        mean_word_similarity=nbws,
        class_mean_ap=cmap,
    )
    out = cfg.out_dir()
    (out / "metrics.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out / "metrics.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    print(report.to_text())
    return 0


def cmd_gen_toy(args: argparse.Namespace) -> int:
    config_path = generate_toy(args.out, seed=args.seed if args.seed is not None else 7, profile=args.profile)
    print(f"toy dataset ({args.profile}) -> {config_path}")
    return 0


def cmd_vocab_dump(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    graph, space = _load_graph_and_space(cfg)
    vocab: set[str] = set(space.objects)
    for obj in space.objects:
        for nb in graph.ego_graph(obj).neighbors:
            vocab.add(nb.evidence)
    out_path = Path(args.out) if args.out else cfg.out_dir() / "vocab.txt"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(sorted(vocab)) + "\n", encoding="utf-8")
    print(f"dumped {len(vocab)} concepts -> {out_path}")
    return 0


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="YAML config file (flags override it)")
    p.add_argument("--seed", type=int, default=None, help="root random seed (default 0)")
    p.add_argument("--threads", type=int, default=None, help="max parallel frame workers (default 1)")
    p.add_argument("--out-dir", dest="out_dir", default=None, help="output directory")
    for key in PATH_KEYS:
        if key == "out_dir":
            continue
        p.add_argument(
            f"--{key.replace('_', '-')}",
            dest=key,
            default=None,
            help=f"path to the {key.replace('_', ' ')} file",
        )


def _add_inference_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--mode",
        choices=("exhaustive", "mcmc"),
        default=None,
        help="inference mode (default exhaustive)",
    )
    p.add_argument("--top-k", dest="top_k", type=int, default=None, help="interpretations kept per frame (default 10)")
    p.add_argument("--iterations", type=int, default=None, help="annealing iterations (default 2000)")
    p.add_argument("--max-hops", dest="max_hops", type=int, default=None, help="max path length for affinity (default 3)")
    p.add_argument(
        "--decay-lambda", dest="decay_lambda", type=float, default=None, help="path decay constant (default 1.0)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="actinfer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", parents=[], help="compute evidence-based grounded object scores")
    _add_common(p)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("infer", help="rank (action, object) interpretations per frame")
    _add_common(p)
    _add_inference_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("smooth", help="consolidate frame interpretations into clip targets")
    _add_common(p)
    p.add_argument("--interpretations", default=None, help="interpretations JSONL (default out_dir/interpretations.jsonl)")
    p.add_argument("--top-m", dest="top_m", type=int, default=None, help="interpretations per frame considered (default 10)")
    p.add_argument("--per-frame-a", dest="per_frame_a", type=int, default=None, help="actions kept per frame (default 5)")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("train-map", help="train the visual-semantic action map")
    _add_common(p)
    p.add_argument("--targets", default=None, help="clip targets JSONL (default out_dir/clip_targets.jsonl)")
    p.set_defaults(func=cmd_train_map)

    p = sub.add_parser("refine", help="run the posterior-based refinement loop")
    _add_common(p)
    _add_inference_flags(p)
    p.add_argument("--top-m", dest="top_m", type=int, default=None, help="interpretations per frame considered (default 10)")
    p.add_argument("--per-frame-a", dest="per_frame_a", type=int, default=None, help="actions kept per frame (default 5)")
    p.add_argument("--temperature", type=float, default=None, help="softmax temperature for priors (default 0.1)")
    p.add_argument(
        "--max-iterations", dest="max_iterations", type=int, default=None,
        help="refinement iteration cap (default 3)",
    )
    p.add_argument(
        "--saturation-delta", dest="saturation_delta", type=float, default=None,
        help="stop once held-out MSE improves by at most this (default 0.005)",
    )
    p.add_argument("--resume-from", dest="resume_from", type=int, default=None, help="resume after this persisted iteration")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("zeroshot", help="map clip interpretations onto a fixed label set")
    _add_common(p)
    p.add_argument("--rankings", default=None, help="clip rankings JSONL (default out_dir/final_rankings.jsonl)")
    p.set_defaults(func=cmd_zeroshot)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    _add_common(p)
    p.add_argument("--predictions", default=None, help="predictions CSV (default out_dir/predictions.csv)")
    p.add_argument("--zeroshot-scores", dest="zeroshot_scores", default=None, help="zero-shot score matrix CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-toy", help="emit the bundled synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="generator seed (default 7)")
    p.add_argument("--profile", choices=("clean", "confusable"), default="clean", help="dataset profile")
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("vocab-dump", help="dump objects + evidence concepts for the oracle adapter")
    _add_common(p)
    p.add_argument("--out", default=None, help="vocabulary output file (default out_dir/vocab.txt)")
    p.set_defaults(func=cmd_vocab_dump)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args) or 0
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except ActInferError as err:
        print(f"internal error: {err}", file=sys.stderr)
        return 3
    except Exception as err:  # noqa: BLE001 - CLI boundary
        log.exception("unexpected failure")
        print(f"internal error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
