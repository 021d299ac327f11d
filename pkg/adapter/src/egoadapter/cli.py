"""Adapter CLI: produce likelihood and feature files for the engine.

    adapter likelihoods --video V --gaze G --vocab VOCAB --mode stub|model --seed N --out OUT
    adapter features --clips C --mode stub|model --seed N --out OUT

Stub mode is deterministic from the seed and needs no models.  Exit codes:
0 success, 1 usage, 2 data error, 3 internal, 4 model unavailable.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import models, video
from .errors import AdapterError, DataError, ModelUnavailable, UsageError
from .roi import GazeRecord, load_gaze, roi_crop
from .stubs import stub_feature, stub_probability

log = logging.getLogger(__name__)


def load_vocabulary(path: str | Path) -> list[str]:
    vocab = []
    seen = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line in seen:
            raise DataError(f"{path}: duplicate concept {line!r}")
        seen.add(line)
        vocab.append(line)
    if not vocab:
        raise DataError(f"{path}: empty vocabulary")
    return vocab


def _write_likelihoods(out: Path, rows) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "concept", "probability"])
        writer.writerows(rows)


def cmd_likelihoods(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(args.vocab)
    gaze = load_gaze(args.gaze) if args.gaze else None

    if args.mode == "stub":
        if gaze is not None:
            frame_ids = [g.frame_id for g in gaze]
        elif args.video:
            frame_ids = [frame_id for frame_id, _ in video.iter_frames(args.video)]
        else:
            raise UsageError("stub mode needs --gaze or --video to enumerate frames")
        rows = [
            (frame_id, concept, repr(stub_probability(args.seed, frame_id, concept)))
            for frame_id in frame_ids
            for concept in vocab
        ]
        _write_likelihoods(Path(args.out), rows)
        print(f"stub likelihoods: {len(frame_ids)} frames x {len(vocab)} concepts -> {args.out}")
        return 0

    if not args.video:
        raise UsageError("model mode needs --video")
    bundle = models.load_image_text_model(args.model_name)
    prompts = models.render_prompts(vocab, args.prompt_template)
    gaze_by_frame = {g.frame_id: g for g in gaze} if gaze else {}
    rows = []
    n_frames = 0
    for frame_id, image in video.iter_frames(args.video):
        crop = roi_crop(image, gaze_by_frame.get(frame_id))
        logits = models.score_frame(bundle, crop, prompts)
        probs = models.vocabulary_softmax(logits)
        rows.extend(
            (frame_id, concept, repr(float(p))) for concept, p in zip(vocab, probs)
        )
        n_frames += 1
    if n_frames == 0:
        raise DataError(f"no decodable frames in {args.video}")
    _write_likelihoods(Path(args.out), rows)
    print(f"model likelihoods: {n_frames} frames x {len(vocab)} concepts -> {args.out}")
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    clips = video.list_clips(args.clips)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if args.mode == "stub":
        dim = args.dim
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["clip_id"] + [f"v{i + 1}" for i in range(dim)])
            for clip_id, _ in clips:
                vec = stub_feature(args.seed, clip_id, dim)
                writer.writerow([clip_id] + [repr(float(v)) for v in vec])
        print(f"stub features: {len(clips)} clips x {dim} dims -> {out}")
        return 0

    model = models.load_video_feature_model()
    rows = []
    dim = None
    for clip_id, source in clips:
        if source is None:
            raise DataError(f"model mode needs video sources; {clip_id!r} is a bare id")
        frames = [frame for _, frame in video.iter_frames(source)]
        if not frames:
            log.warning("clip %s has no decodable frames; skipped", clip_id)
            continue
        vec = models.extract_clip_feature(model, frames)
        if dim is None:
            dim = vec.size
        rows.append([clip_id] + [repr(float(v)) for v in vec])
    if not rows:
        raise DataError("no clips produced features")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id"] + [f"v{i + 1}" for i in range(dim)])
        writer.writerows(rows)
    print(f"model features: {len(rows)} clips x {dim} dims -> {out}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("likelihoods", help="emit a frame/concept likelihood CSV")
    p.add_argument("--video", default=None, help="video file or directory of frame images")
    p.add_argument("--gaze", default=None, help="gaze CSV frame_id,x,y (empty x,y = absent)")
    p.add_argument("--vocab", required=True, help="vocabulary file from the engine's vocab-dump")
    p.add_argument("--mode", choices=("stub", "model"), default="stub", help="oracle backend (default stub)")
    p.add_argument("--seed", type=int, default=0, help="stub seed (default 0)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument(
        "--prompt-template",
        default=models.DEFAULT_PROMPT,
        help=f"per-concept prompt (default {models.DEFAULT_PROMPT!r})",
    )
    p.add_argument("--model-name", default=models.CLIP_NAME, help=f"image-text model (default {models.CLIP_NAME})")
    p.set_defaults(func=cmd_likelihoods)

    p = sub.add_parser("features", help="emit a clip feature CSV")
    p.add_argument("--clips", required=True, help="directory of clip videos or a clip-id list file")
    p.add_argument("--mode", choices=("stub", "model"), default="stub", help="feature backend (default stub)")
    p.add_argument("--seed", type=int, default=0, help="stub seed (default 0)")
    p.add_argument("--dim", type=int, default=models.FEATURE_DIM, help=f"stub feature dimension (default {models.FEATURE_DIM})")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_features)

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
    except ModelUnavailable as err:
        print(f"model unavailable: {err}", file=sys.stderr)
        print("hint: rerun with --mode stub for deterministic model-free output", file=sys.stderr)
        return 4
    except AdapterError as err:
        print(f"internal error: {err}", file=sys.stderr)
        return 3
    except Exception as err:  # noqa: BLE001 - CLI boundary
        log.exception("unexpected failure")
        print(f"internal error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
