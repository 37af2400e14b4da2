"""Dense pairwise-distance kernel and the standard re-id evaluation protocol.

Distances are accumulated in float64 over row blocks (identical to the
naive double loop within 1e-6) and stored as float32. Evaluation follows
the single-gallery-shot convention: for each query, gallery entries with
the same person AND the same camera are excluded, person id -1 is junk,
and ranking ties are broken by content (distance, person id, sample id)
so results never depend on input ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoValidQuery
from .features import FeatureSet, l2_normalize_rows

EUCLIDEAN = "euclidean"  # Euclidean distance measured on L2-normalized rows
COSINE = "cosine"  # 1 - cosine similarity
RERANKED = "reranked"

_BLOCK = 1024


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray  # Q x G float32
    metric: str

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EvalResult:
    cmc: np.ndarray  # cumulative match rate at ranks 1..max_rank
    map: float
    n_valid_queries: int

    def rank(self, r: int) -> float:
        return float(self.cmc[r - 1])


def _normalized64(fs: FeatureSet) -> np.ndarray:
    return l2_normalize_rows(fs).features.matrix.astype(np.float64)


def pairwise_distances(a: FeatureSet, b: FeatureSet, metric: str = EUCLIDEAN) -> DistanceMatrix:
    """Q x G distance block between two feature sets.

    ``euclidean`` first L2-normalizes rows (all-zero rows stay zero), then
    measures Euclidean distance; ``cosine`` returns 1 - cosine similarity
    with zero rows treated as similarity 0.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"feature dims differ: {a.dim} vs {b.dim}")
    if metric not in (EUCLIDEAN, COSINE):
        raise ValueError(f"unknown metric {metric!r}")
    xa = _normalized64(a)
    xb = _normalized64(b)
    # squared norms are 1 for normalized rows and 0 for all-zero rows
    na = np.einsum("ij,ij->i", xa, xa)
    nb = np.einsum("ij,ij->i", xb, xb)
    out = np.empty((a.n, b.n), dtype=np.float32)
    for lo in range(0, a.n, _BLOCK):
        hi = min(lo + _BLOCK, a.n)
        dots = xa[lo:hi] @ xb.T
        if metric == EUCLIDEAN:
            d2 = na[lo:hi, None] + nb[None, :] - 2.0 * dots
            np.maximum(d2, 0.0, out=d2)
            out[lo:hi] = np.sqrt(d2)
        else:
            out[lo:hi] = 1.0 - dots
    return DistanceMatrix(values=out, metric=metric)


def evaluate(
    dist: DistanceMatrix,
    q_persons,
    q_cams,
    g_persons,
    g_cams,
    max_rank: int = 10,
    g_ids=None,
) -> EvalResult:
    """CMC at ranks 1..max_rank and mAP under the protocol filter.

    Per query, the valid gallery drops junk entries (person -1) and
    same-person-same-camera entries; queries left with no correct match
    are excluded from both averages. AP is the mean of precision at each
    correct hit. ``g_ids`` feeds the content-based tie rule; when omitted,
    gallery positions stand in for sample ids.
    """
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    q_persons = np.asarray(q_persons, dtype=np.int64)
    q_cams = np.asarray(q_cams, dtype=np.int64)
    g_persons = np.asarray(g_persons, dtype=np.int64)
    g_cams = np.asarray(g_cams, dtype=np.int64)
    nq, ng = dist.values.shape
    if len(q_persons) != nq or len(q_cams) != nq:
        raise DimensionMismatch(f"query metadata length != {nq}")
    if len(g_persons) != ng or len(g_cams) != ng:
        raise DimensionMismatch(f"gallery metadata length != {ng}")
    if g_ids is None:
        g_ids = np.array([f"{j:09d}" for j in range(ng)])
    else:
        g_ids = np.asarray(g_ids, dtype=np.str_)
        if len(g_ids) != ng:
            raise DimensionMismatch(f"gallery ids length != {ng}")

    cmc_hits = np.zeros(max_rank, dtype=np.float64)
    ap_sum = 0.0
    n_valid = 0
    junk = g_persons == -1
    for i in range(nq):
        keep = ~(junk | ((g_persons == q_persons[i]) & (g_cams == q_cams[i])))
        if not keep.any():
            continue
        d = dist.values[i, keep].astype(np.float64)
        persons = g_persons[keep]
        ids = g_ids[keep]
        order = np.lexsort((ids, persons, d))
        matches = persons[order] == q_persons[i]
        n_correct = int(matches.sum())
        if n_correct == 0:
            continue
        n_valid += 1
        first = int(np.argmax(matches)) + 1  # 1-based position of first hit
        if first <= max_rank:
            cmc_hits[first - 1 :] += 1.0
        hit_positions = np.nonzero(matches)[0] + 1
        precision_at_hits = np.arange(1, n_correct + 1) / hit_positions
        ap_sum += float(precision_at_hits.mean())

    if n_valid == 0:
        raise NoValidQuery("every query was excluded by the protocol filter")
    return EvalResult(cmc=cmc_hits / n_valid, map=ap_sum / n_valid, n_valid_queries=n_valid)
