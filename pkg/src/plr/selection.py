"""Reliability-based cluster selection.

Clusters that are too small to fill a PK identity slot, or whose images
all come from one camera view, produce pseudo-labels that hurt more than
help. This module keeps exactly the non-noise clusters with size >=
min_size and camera diversity >= min_cameras, relabels the survivors to
contiguous pseudo person ids (ascending original cluster id), and reports
a dropped reason for every excluded sample.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .clustering import NOISE, ClusterAssignment
from .errors import DimensionMismatch, EmptySelection
from .features import FeatureSet, SampleRef

REASON_KEPT = "kept"
REASON_TOO_SMALL = "too_small"
REASON_SINGLE_CAMERA = "single_camera"
REASON_NOISE = "noise"


@dataclass(frozen=True)
class SelectionRules:
    min_size: int = 4
    min_cameras: int = 2

    def __post_init__(self):
        if self.min_size < 1:
            raise ValueError(f"min_size must be >= 1, got {self.min_size}")
        if self.min_cameras < 1:
            raise ValueError(f"min_cameras must be >= 1, got {self.min_cameras}")


@dataclass(frozen=True)
class ClusterRecord:
    cluster: int
    size: int
    n_cameras: int
    reason: str  # kept | too_small | single_camera
    pseudo_id: int | None  # set when kept


@dataclass(frozen=True)
class SelectionReport:
    n_input_samples: int
    n_clustered: int  # non-noise input samples
    n_selected_clusters: int
    n_selected_samples: int
    portion_selected: float  # percentage of input samples retained
    clusters: tuple[ClusterRecord, ...]
    sample_reasons: tuple[str, ...]  # per input sample: kept | too_small | ...


@dataclass(frozen=True)
class PseudoLabelDataset:
    samples: tuple[SampleRef, ...]
    pseudo_ids: tuple[int, ...]
    report: SelectionReport

    @property
    def n_identities(self) -> int:
        return self.report.n_selected_clusters

    def by_identity(self) -> dict[int, list[SampleRef]]:
        out: dict[int, list[SampleRef]] = {}
        for ref, pid in zip(self.samples, self.pseudo_ids):
            out.setdefault(pid, []).append(ref)
        return out


def select_clusters(
    fs: FeatureSet, ca: ClusterAssignment, rules: SelectionRules | None = None
) -> PseudoLabelDataset:
    """Apply the selection rules to one clustering run.

    Size is checked before camera diversity, so a cluster failing both
    reports ``too_small``. Raises EmptySelection when nothing survives,
    which callers treat as "relax eps or stop the loop".
    """
    rules = rules or SelectionRules()
    labels = np.asarray(ca.labels)
    if len(labels) != fs.n:
        raise DimensionMismatch(f"{len(labels)} labels for {fs.n} samples")

    cams = np.asarray(fs.cameras)
    records: list[ClusterRecord] = []
    sample_reasons = np.full(fs.n, REASON_NOISE, dtype=object)
    samples: list[SampleRef] = []
    pseudo_ids: list[int] = []
    next_pseudo = 0
    for cluster in sorted(int(c) for c in set(labels.tolist()) if c != NOISE):
        member_idx = np.nonzero(labels == cluster)[0]
        size = len(member_idx)
        n_cameras = len(set(cams[member_idx].tolist()))
        if size < rules.min_size:
            reason, pid = REASON_TOO_SMALL, None
        elif n_cameras < rules.min_cameras:
            reason, pid = REASON_SINGLE_CAMERA, None
        else:
            reason, pid = REASON_KEPT, next_pseudo
            next_pseudo += 1
            for i in member_idx:
                samples.append(fs.sample_ref(int(i)))
                pseudo_ids.append(pid)
        sample_reasons[member_idx] = reason
        records.append(
            ClusterRecord(
                cluster=cluster, size=size, n_cameras=n_cameras, reason=reason, pseudo_id=pid
            )
        )

    n_selected = len(samples)
    report = SelectionReport(
        n_input_samples=fs.n,
        n_clustered=int(np.sum(labels != NOISE)),
        n_selected_clusters=next_pseudo,
        n_selected_samples=n_selected,
        portion_selected=100.0 * n_selected / fs.n,
        clusters=tuple(records),
        sample_reasons=tuple(sample_reasons.tolist()),
    )
    if next_pseudo == 0:
        raise EmptySelection(
            f"no cluster satisfied min_size={rules.min_size}, min_cameras={rules.min_cameras}"
        )
    return PseudoLabelDataset(
        samples=tuple(samples), pseudo_ids=tuple(pseudo_ids), report=report
    )


def write_pseudo_csv(ds: PseudoLabelDataset, path) -> None:
    """One row per selected sample: id,camera,pseudo_id."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "camera", "pseudo_id"])
        for ref, pid in zip(ds.samples, ds.pseudo_ids):
            w.writerow([ref.id, ref.camera, pid])


def write_report_csv(report: SelectionReport, path) -> None:
    """One row per non-noise cluster: cluster,size,cameras,reason,pseudo_id."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["cluster", "size", "cameras", "reason", "pseudo_id"])
        for r in report.clusters:
            w.writerow([r.cluster, r.size, r.n_cameras, r.reason, "" if r.pseudo_id is None else r.pseudo_id])
