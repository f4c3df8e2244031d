"""Evaluation rows and their CSV form (``method,image,psnr`` or ``method,sample,rmse``)."""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from collections.abc import Sequence
from pathlib import Path

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class EvaluationRow(BaseModel):
    """One evaluation of one method on one image or sample."""

    method: str = Field(description="Method name, e.g. Noisy, Gauss, Learned")
    sample: str = Field(description="Image or sample identifier")
    value: float = Field(description="Metric value")


def write_csv(
    path: str | Path, rows: Sequence[EvaluationRow], metric: str = "psnr", key: str = "image"
) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", key, metric])
        for row in rows:
            writer.writerow([row.method, row.sample, f"{row.value:.6f}"])
    logger.info("wrote %d rows to %s", len(rows), path)


def method_means(rows: Sequence[EvaluationRow]) -> dict[str, float]:
    """Mean metric per method, in first-appearance order."""
    grouped: dict[str, list[float]] = defaultdict(list)
    for row in rows:
        grouped[row.method].append(row.value)
    return {method: sum(v) / len(v) for method, v in grouped.items()}


def format_summary(rows: Sequence[EvaluationRow], metric: str = "psnr") -> str:
    means = method_means(rows)
    return "\n".join(f"{method:<10} {metric} {value:.4f}" for method, value in means.items())
