"""Gaze-driven region-of-interest cropping."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

ROI_SIZE = 200


@dataclass(frozen=True)
class GazeRecord:
    frame_id: str
    x: float | None  # None when the gaze sample is absent
    y: float | None


def load_gaze(path: str | Path) -> list[GazeRecord]:
    """Load a gaze CSV: frame_id,x,y with empty x,y meaning absent."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["frame_id", "x", "y"]:
            raise DataError(f"{path}: expected header 'frame_id,x,y'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            frame_id, xs, ys = (v.strip() for v in row)
            if not xs and not ys:
                records.append(GazeRecord(frame_id=frame_id, x=None, y=None))
                continue
            try:
                records.append(GazeRecord(frame_id=frame_id, x=float(xs), y=float(ys)))
            except ValueError:
                raise DataError(f"{path}:{lineno}: gaze coordinates must be numbers or empty") from None
    if not records:
        raise DataError(f"{path}: no gaze rows")
    return records


def roi_crop(image: np.ndarray, gaze: GazeRecord | None, size: int = ROI_SIZE) -> np.ndarray:
    """Fixed size x size crop centered on the gaze point, clamped at borders.

    Falls back to the frame center when the gaze is absent (center bias).
    """
    if image.ndim not in (2, 3):
        raise DataError(f"expected a HxW or HxWxC image, got shape {image.shape}")
    h, w = image.shape[:2]
    if h < size or w < size:
        raise DataError(f"frame {w}x{h} is smaller than the {size}x{size} ROI")
    if gaze is None or gaze.x is None or gaze.y is None:
        cx, cy = w / 2.0, h / 2.0
    else:
        cx, cy = gaze.x, gaze.y
    x0 = int(round(cx)) - size // 2
    y0 = int(round(cy)) - size // 2
    x0 = min(max(x0, 0), w - size)
    y0 = min(max(y0, 0), h - size)
    return image[y0 : y0 + size, x0 : x0 + size]
