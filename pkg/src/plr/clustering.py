"""Cluster assignment over a FeatureSet: DBSCAN (primary) and k-means (baseline).

Distance convention: rows are L2-normalized first and Euclidean distance
is used, so thresholds live on a bounded scale (at most 2 between unit
vectors, monotone in cosine distance). The ``cosine`` option measures
1 - cosine similarity instead.

DBSCAN semantics, stated precisely because off-by-one choices change the
meaning of min_samples:
  * neighborhoods are closed balls (distance <= eps) and include the
    point itself;
  * a point is core iff its neighborhood holds >= min_samples points;
  * expansion scans seed points in ascending index order, grows one
    cluster breadth-first with neighbor lists visited in ascending index
    order, and a border point joins the cluster of the first core point
    that reaches it. This fixes the tie the textbook algorithm leaves
    open, so repeated runs are reproducible.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import HeuristicZero, InvalidK
from .features import FeatureSet, l2_normalize_rows
from .metrics import COSINE, EUCLIDEAN

NOISE = -1

KMEANS_MAX_ITER = 300
_BLOCK = 2048

DEFAULT_EPS = 0.42
DEFAULT_MIN_SAMPLES = 4


@dataclass(frozen=True)
class DbscanParams:
    eps: float = DEFAULT_EPS
    min_samples: int = DEFAULT_MIN_SAMPLES
    metric: str = EUCLIDEAN

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.min_samples < 1:
            raise ValueError(f"min_samples must be >= 1, got {self.min_samples}")
        if self.metric not in (EUCLIDEAN, COSINE):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-sample labels: >=0 is a cluster id, -1 the noise sentinel.

    Non-noise labels are contiguous 0..n_clusters-1.
    """

    labels: np.ndarray
    n_clusters: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)


def _neighbor_lists(x: np.ndarray, eps: float, metric: str) -> list[np.ndarray]:
    """Exact closed-ball neighborhoods from blocked full pairwise distances."""
    n = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    thresh = eps * eps if metric == EUCLIDEAN else eps
    lists: list[np.ndarray] = []
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        dots = x[lo:hi] @ x.T
        if metric == EUCLIDEAN:
            d = sq[lo:hi, None] + sq[None, :] - 2.0 * dots
            np.maximum(d, 0.0, out=d)
        else:
            d = 1.0 - dots
        for r in range(hi - lo):
            lists.append(np.nonzero(d[r] <= thresh)[0])
    return lists


def dbscan(fs: FeatureSet, p: DbscanParams | None = None) -> ClusterAssignment:
    """Density-based clustering with the deterministic expansion rule above."""
    p = p or DbscanParams()
    x = l2_normalize_rows(fs).features.matrix.astype(np.float64)
    neighbors = _neighbor_lists(x, p.eps, p.metric)
    n = fs.n
    core = np.fromiter((len(nb) >= p.min_samples for nb in neighbors), dtype=bool, count=n)

    labels = np.full(n, NOISE, dtype=np.int64)
    cid = 0
    for seed in range(n):
        if labels[seed] != NOISE or not core[seed]:
            continue
        labels[seed] = cid
        queue = deque([seed])
        while queue:
            q = queue.popleft()
            for j in neighbors[q]:  # ascending index order by construction
                if labels[j] == NOISE:
                    labels[j] = cid
                    if core[j]:
                        queue.append(int(j))
        cid += 1

    return ClusterAssignment(
        labels=labels,
        n_clusters=cid,
        params={
            "algo": "dbscan",
            "eps": p.eps,
            "min_samples": p.min_samples,
            "metric": p.metric,
        },
    )


def k_heuristic(n: int) -> int:
    """Cluster-count heuristic floor(n / 15); refuses to return 0."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    k = n // 15
    if k == 0:
        raise HeuristicZero(f"floor({n}/15) = 0; too few samples for the heuristic")
    return k


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Classic k-means++ seeding: next center sampled proportional to D^2."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    idx = int(rng.integers(n))
    centers[0] = x[idx]
    d2 = np.einsum("ij,ij->i", x - centers[0], x - centers[0])
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all remaining points coincide with centers
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = x[idx]
        nd = np.einsum("ij,ij->i", x - centers[c], x - centers[c])
        np.minimum(d2, nd, out=d2)
    return centers


def _assign(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels (ties -> lowest center index) and squared distances."""
    cn = np.einsum("ij,ij->i", centers, centers)
    d2 = cn[None, :] - 2.0 * (x @ centers.T)
    labels = np.argmin(d2, axis=1)
    best = d2[np.arange(x.shape[0]), labels] + np.einsum("ij,ij->i", x, x)
    return labels, np.maximum(best, 0.0)


def kmeans(fs: FeatureSet, k: int, seed: int) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ init, at most 300 iterations.

    Every sample is assigned (no noise); final labels are renumbered
    contiguously by first occurrence. Empty clusters are revived by
    relocating their center to the sample farthest from its own center.
    """
    if k < 1 or k > fs.n:
        raise InvalidK(f"k={k} outside 1..{fs.n}")
    x = l2_normalize_rows(fs).features.matrix.astype(np.float64)
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(x, k, rng)

    labels = np.full(fs.n, -1, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        new_labels, d2 = _assign(x, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c] > 0:
                centers[c] = x[labels == c].mean(axis=0)
        for c in np.nonzero(counts == 0)[0]:
            far = int(np.argmax(d2))
            centers[c] = x[far]
            d2[far] = 0.0  # keep later empties from grabbing the same sample

    # contiguous relabel by first occurrence
    remap: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        out[i] = remap.setdefault(int(lab), len(remap))
    return ClusterAssignment(
        labels=out,
        n_clusters=len(remap),
        params={"algo": "kmeans", "k": k, "seed": seed},
    )


def sweep_eps(
    fs: FeatureSet, eps_values, min_samples: int = DEFAULT_MIN_SAMPLES, metric: str = EUCLIDEAN
) -> list[dict]:
    """Cluster-count / noise-portion curve over a grid of eps values."""
    rows = []
    for eps in eps_values:
        ca = dbscan(fs, DbscanParams(eps=float(eps), min_samples=min_samples, metric=metric))
        n_noise = int(np.sum(ca.labels == NOISE))
        rows.append(
            {
                "eps": float(eps),
                "n_clusters": ca.n_clusters,
                "n_noise": n_noise,
                "noise_portion": 100.0 * n_noise / fs.n,
            }
        )
    return rows


def write_labels_csv(fs: FeatureSet, ca: ClusterAssignment, path) -> None:
    """One row per sample: id,camera,cluster (cluster -1 = noise)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "camera", "cluster"])
        for i in range(fs.n):
            w.writerow([fs.ids[i], fs.cameras[i], int(ca.labels[i])])


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["eps", "n_clusters", "n_noise", "noise_portion"])
        for r in rows:
            w.writerow(
                [f"{r['eps']:.6f}", r["n_clusters"], r["n_noise"], f"{r['noise_portion']:.6f}"]
            )
