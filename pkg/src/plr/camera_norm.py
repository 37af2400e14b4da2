"""Camera-guided feature normalization.

Embeddings extracted from unseen camera views carry a per-camera bias that
makes clustering group images by viewpoint instead of by person. This
module standardizes each embedding with the statistics of its own camera:

    normalized_row = (row - camera_mean) / camera_std

computed per component, with the population (divide-by-count) standard
deviation floored at STD_FLOOR so constant components stay defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .features import FeatureSet

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class CameraStats:
    camera: int
    count: int
    mean: np.ndarray  # float64, length D
    std: np.ndarray  # float64, length D, every component >= STD_FLOOR


def camera_statistics(fs: FeatureSet) -> list[CameraStats]:
    """Per-camera mean and floored population std, one entry per camera present.

    Accumulation is done in float64 over index-ascending rows, so results
    do not depend on how work would be split across cameras.
    """
    cams = np.asarray(fs.cameras)
    out: list[CameraStats] = []
    for cam in sorted(set(fs.cameras)):
        rows = fs.matrix[cams == cam].astype(np.float64)
        mean = rows.mean(axis=0)
        std = np.sqrt(np.mean((rows - mean) ** 2, axis=0))
        out.append(
            CameraStats(
                camera=cam,
                count=rows.shape[0],
                mean=mean,
                std=np.maximum(std, STD_FLOOR),
            )
        )
    return out


def camera_normalize(fs: FeatureSet) -> FeatureSet:
    """Standardize every row with its own camera's statistics.

    Ids, cameras and persons are carried over unchanged. Within each
    camera of >=2 samples the output has per-component mean 0 and
    population std 1 (on components whose raw std exceeded the floor).
    """
    stats = {s.camera: s for s in camera_statistics(fs)}
    cams = np.asarray(fs.cameras)
    out = np.empty(fs.matrix.shape, dtype=np.float64)
    for cam, s in stats.items():
        mask = cams == cam
        out[mask] = (fs.matrix[mask].astype(np.float64) - s.mean) / s.std
    return fs.with_matrix(out.astype(np.float32))


def write_stats_csv(stats: list[CameraStats], path) -> None:
    """One row per camera: camera,count,mean_norm,std_min,std_max."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["camera", "count", "mean_norm", "std_min", "std_max"])
        for s in stats:
            w.writerow(
                [
                    s.camera,
                    s.count,
                    f"{float(np.linalg.norm(s.mean)):.6f}",
                    f"{float(s.std.min()):.6f}",
                    f"{float(s.std.max()):.6f}",
                ]
            )
