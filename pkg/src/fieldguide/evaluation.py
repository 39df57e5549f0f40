"""Retrieval metrics: macro-averaged top-1/top-5 accuracy and mean rank.

With a single relevant document per image, retrieval accuracy coincides
with classification accuracy. Metrics are computed per class and then
averaged with equal class weight (macro), including mean rank. This is the
only module allowed to read ground-truth class ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DataError


@dataclass(frozen=True)
class ClassMetrics:
    top1: float
    top5: float
    mean_rank: float
    image_count: int


@dataclass(frozen=True)
class EvalResult:
    top1: float  # percent
    top5: float  # percent
    mean_rank: float
    per_class: dict[str, ClassMetrics]


def evaluate(
    rankings: Mapping[str, Sequence[str]], truth: Mapping[str, str]
) -> EvalResult:
    """Macro metrics over per-image document rankings.

    ``rankings`` maps image_id to a ranked doc_id list; ``truth`` maps
    image_id to its target doc_id, which must appear in the ranking.
    """
    if not rankings:
        raise DataError("no rankings to evaluate")
    ranks_by_class: dict[str, list[int]] = {}
    for image_id, ranking in rankings.items():
        if image_id not in truth:
            raise DataError(f"image {image_id!r} has no ground-truth class")
        target = truth[image_id]
        try:
            rank = list(ranking).index(target) + 1
        except ValueError:
            raise DataError(
                f"target doc {target!r} missing from the ranking of image {image_id!r}"
            ) from None
        ranks_by_class.setdefault(target, []).append(rank)

    per_class = {}
    for doc_id, ranks in ranks_by_class.items():
        n = len(ranks)
        per_class[doc_id] = ClassMetrics(
            top1=100.0 * sum(r <= 1 for r in ranks) / n,
            top5=100.0 * sum(r <= 5 for r in ranks) / n,
            mean_rank=sum(ranks) / n,
            image_count=n,
        )
    k = len(per_class)
    return EvalResult(
        top1=sum(m.top1 for m in per_class.values()) / k,
        top5=sum(m.top5 for m in per_class.values()) / k,
        mean_rank=sum(m.mean_rank for m in per_class.values()) / k,
        per_class=per_class,
    )


def expected_random_metrics(
    corpus_size: int, n_list: Sequence[int] = (1, 5)
) -> tuple[dict[int, float], float]:
    """Analytic expectations under a uniformly random ranking:
    E[top-n] = 100*n/K (capped at 100) and E[mean rank] = (K+1)/2."""
    if corpus_size < 1:
        raise DataError("corpus size must be >= 1")
    top_n = {n: min(100.0, 100.0 * n / corpus_size) for n in n_list}
    return top_n, (corpus_size + 1) / 2.0


def format_report(rows: Sequence[tuple[str, EvalResult]]) -> str:
    """Plain-text comparison table: method, top-1, top-5, mean rank."""
    header = f"{'method':<24}{'top-1':>8}{'top-5':>8}{'MR':>8}"
    lines = [header, "-" * len(header)]
    for method, result in rows:
        lines.append(
            f"{method:<24}{result.top1:>8.1f}{result.top5:>8.1f}{result.mean_rank:>8.1f}"
        )
    return "\n".join(lines) + "\n"


def write_per_class(result: EvalResult, path: str | Path) -> None:
    """Line-delimited per-class breakdown."""
    with open(path, "w", encoding="utf-8") as f:
        for doc_id in sorted(result.per_class):
            m = result.per_class[doc_id]
            f.write(
                json.dumps(
                    {
                        "doc_id": doc_id,
                        "top1": m.top1,
                        "top5": m.top5,
                        "mean_rank": m.mean_rank,
                        "image_count": m.image_count,
                    }
                )
                + "\n"
            )
