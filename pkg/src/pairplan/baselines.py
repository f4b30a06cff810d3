"""Reference pairing strategies: complete, one-reference, cosine, window."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

Pair = tuple[int, int]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    source_view: int


def complete_pairs(n: int) -> list[Pair]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def oneref_pairs(n: int, ref: int | None = None) -> list[Pair]:
    """Star pairing around ``ref`` (default: the middle view, n // 2)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if ref is None:
        ref = n // 2
    if not 0 <= ref < n:
        raise ValueError(f"reference view {ref} out of range for n={n}")
    pairs = []
    for j in range(n):
        if j != ref:
            pairs.append((ref, j))
            pairs.append((j, ref))
    return pairs


def window_pairs(n: int, window: int) -> list[Pair]:
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    pairs = []
    for i in range(n):
        for j in range(i + 1, min(n, i + window + 1)):
            pairs.append((i, j))
            pairs.append((j, i))
    return sorted(pairs)


def cosine_similarity_matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    mat = np.stack([np.asarray(f.values, dtype=np.float64).ravel() for f in features])
    if not np.all(np.isfinite(mat)):
        raise ValueError("feature vectors must be finite")
    norms = np.linalg.norm(mat, axis=1)
    zero = [features[k].source_view for k in np.flatnonzero(norms == 0)]
    if zero:
        raise ValueError(f"zero feature vector for view(s) {zero}: cosine similarity undefined")
    unit = mat / norms[:, None]
    return unit @ unit.T


def cosine_pairs(
    features: Sequence[FeatureVector], k_nearest: int = 2, sim_min: float = 0.0
) -> list[Pair]:
    """Link every view to its ``k_nearest`` most similar views above ``sim_min``.

    Neighbour lists are merged as undirected edges and returned in both
    directions, sorted. Equal similarities prefer the smaller view label.
    """
    if len(features) < 2:
        raise ValueError("cosine pairing needs at least 2 feature vectors")
    lengths = {np.asarray(f.values).size for f in features}
    if len(lengths) != 1:
        raise ValueError(f"feature vectors differ in length: {sorted(lengths)}")
    if k_nearest < 1:
        raise ValueError(f"k_nearest must be >= 1, got {k_nearest}")
    labels = [f.source_view for f in features]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate source_view labels")
    sim = cosine_similarity_matrix(features)
    edges = set()
    for a, la in enumerate(labels):
        ranked = sorted(
            (b for b in range(len(labels)) if b != a),
            key=lambda b: (-sim[a, b], labels[b]),
        )
        for b in ranked[:k_nearest]:
            if sim[a, b] >= sim_min:
                lb = labels[b]
                edges.add((min(la, lb), max(la, lb)))
    pairs = []
    for i, j in sorted(edges):
        pairs.append((i, j))
        pairs.append((j, i))
    return pairs


def estimate_inference_cost(pair_count: int, per_pair_mb: float = 100.0, base_mb: float = 2000.0) -> float:
    """Affine memory estimate in MB for running pairwise inference."""
    if pair_count < 0 or per_pair_mb < 0 or base_mb < 0:
        raise ValueError("cost inputs must be non-negative")
    return base_mb + per_pair_mb * pair_count
