"""Frame and clip enumeration from videos, image directories, or lists."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .errors import DataError, ModelUnavailable

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}
VIDEO_SUFFIXES = {".mp4", ".avi", ".mov", ".mkv", ".webm"}


def iter_frames(video: str | Path):
    """Yield (frame_id, RGB array) from a video file or image directory.

    Undecodable frames are skipped with a warning.
    """
    path = Path(video)
    if not path.exists():
        raise DataError(f"video source not found: {path}")
    if path.is_dir():
        from PIL import Image, UnidentifiedImageError

        for img_path in sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
            try:
                with Image.open(img_path) as img:
                    yield img_path.stem, np.asarray(img.convert("RGB"))
            except (OSError, UnidentifiedImageError):
                log.warning("frame %s is undecodable; skipped", img_path)
        return
    try:
        import cv2
    except ImportError as err:
        raise ModelUnavailable(f"opencv is needed to decode video files: {err}") from None
    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise DataError(f"could not open video: {path}")
    index = 0
    while True:
        ok, frame = capture.read()
        if not ok:
            break
        yield f"{index:06d}", cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
        index += 1
    capture.release()


def list_clips(clips: str | Path) -> list[tuple[str, Path | None]]:
    """Resolve --clips: a directory of videos or a text file of clip ids.

    Returns (clip_id, source path or None) pairs; stub mode needs only ids.
    """
    path = Path(clips)
    if not path.exists():
        raise DataError(f"clips source not found: {path}")
    if path.is_dir():
        out = [
            (p.stem, p)
            for p in sorted(path.iterdir())
            if p.suffix.lower() in VIDEO_SUFFIXES or p.is_dir()
        ]
        if not out:
            raise DataError(f"no clips found under {path}")
        return out
    ids = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            ids.append((line, None))
    if not ids:
        raise DataError(f"{path}: no clip ids")
    return ids
