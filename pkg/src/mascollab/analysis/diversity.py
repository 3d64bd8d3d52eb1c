"""Pairwise cosine similarity between agent outputs of one collaboration."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..backends import EmbeddingVector, Embedder
from .metrics import AnalysisError, CellKey

DECILES = tuple(range(10, 100, 10))


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def similarity_matrix(vectors: Sequence[EmbeddingVector] | np.ndarray) -> np.ndarray:
    m = np.array([v.values if isinstance(v, EmbeddingVector) else v for v in vectors], dtype=float)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0):
        raise ValueError("cosine similarity of a zero vector is undefined")
    unit = m / norms[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    sims = (sims + sims.T) / 2
    np.fill_diagonal(sims, 1.0)
    return sims


@dataclass(frozen=True)
class InstanceDiversity:
    instance_id: str
    cell: CellKey
    pairs: tuple[tuple[int, int, float], ...]  # 1-based agent indices

    @property
    def mean(self) -> float:
        return float(np.mean([s for _, _, s in self.pairs]))


@dataclass(frozen=True)
class DistributionSummary:
    count: int
    mean: float
    median: float
    deciles: tuple[float, ...]

    @classmethod
    def of(cls, values: Sequence[float]) -> DistributionSummary:
        arr = np.asarray(values, dtype=float)
        return cls(
            count=int(arr.size),
            mean=float(arr.mean()),
            median=float(np.median(arr)),
            deciles=tuple(float(x) for x in np.percentile(arr, DECILES)),
        )


@dataclass(frozen=True)
class DiversityReport:
    instances: tuple[InstanceDiversity, ...]
    # Two aggregations per configuration: every pair pooled, and one mean per instance.
    pooled_pairs: dict[CellKey, DistributionSummary]
    instance_means: dict[CellKey, DistributionSummary]
    skipped: int = 0


def instance_pairs(vectors: Sequence[EmbeddingVector]) -> tuple[tuple[int, int, float], ...]:
    sims = similarity_matrix(vectors)
    n = len(vectors)
    return tuple((i + 1, j + 1, float(sims[i, j])) for i in range(n) for j in range(i + 1, n))


def compute_diversity(records: Iterable, embedder: Embedder) -> DiversityReport:
    """Embed each turn's full output and compare every pair of agents.

    Records from failed runs or with fewer than two turns are skipped and
    counted in ``skipped``.
    """
    instances = []
    skipped = 0
    dim = None
    for record in records:
        turns = record.result.turns
        if record.result.failed or len(turns) < 2:
            skipped += 1
            continue
        vectors = embedder.embed([t.full_output for t in turns])
        if len(vectors) != len(turns):
            raise AnalysisError(f"embedder returned {len(vectors)} vectors for {len(turns)} texts")
        dims = {len(v) for v in vectors}
        if dim is None:
            dim = next(iter(dims))
        if dims != {dim}:
            raise AnalysisError(f"embedding dimension changed within the analysis: {sorted(dims)} vs {dim}")
        instances.append(InstanceDiversity(record.instance_id, record.cell, instance_pairs(vectors)))

    pooled, means = defaultdict(list), defaultdict(list)
    for item in instances:
        pooled[item.cell].extend(s for _, _, s in item.pairs)
        means[item.cell].append(item.mean)
    return DiversityReport(
        instances=tuple(instances),
        pooled_pairs={k: DistributionSummary.of(v) for k, v in pooled.items()},
        instance_means={k: DistributionSummary.of(v) for k, v in means.items()},
        skipped=skipped,
    )
