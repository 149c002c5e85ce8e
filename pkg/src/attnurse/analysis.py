"""Metric-vs-success correlation study over batches of trials."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .diffusion import TrialRecord
from .errors import DegenerateVariance, EmptyTrajectory
from .metrics import MetricRecord
from . import svg

METRIC_FIELDS = MetricRecord.names()
COLUMNS = ("Int", "Var", "IoU", "D_CoM", "D_KL", "CC", "success")
AGGREGATES = ("mean", "final", "min", "max")


@dataclass(frozen=True)
class TrajectorySummary:
    seed: int
    intensity: float
    variance: float
    iou: float
    com_distance: float
    sym_kl: float
    cc: float
    success: int

    def row(self) -> tuple[float, ...]:
        return (self.intensity, self.variance, self.iou, self.com_distance, self.sym_kl, self.cc, float(self.success))


def summarize_trajectory(rec: TrialRecord, aggregate: str = "mean") -> TrajectorySummary:
    """Collapse a trial's per-step metrics to one value each."""
    if not rec.metrics:
        raise EmptyTrajectory(f"trial {rec.seed} has no recorded steps")
    if aggregate not in AGGREGATES:
        raise ValueError(f"aggregate must be one of {AGGREGATES}, got {aggregate!r}")
    cols = np.array([[getattr(m, f) for f in METRIC_FIELDS] for m in rec.metrics])
    if aggregate == "mean":
        vals = [math.fsum(c) / len(c) for c in cols.T]
    elif aggregate == "final":
        vals = list(cols[-1])
    elif aggregate == "min":
        vals = list(cols.min(axis=0))
    else:
        vals = list(cols.max(axis=0))
    return TrajectorySummary(rec.seed, *(float(v) for v in vals), success=int(rec.success))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D sequences of equal length")
    if len(x) < 3:
        raise ValueError("pearson needs at least 3 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateVariance("a sequence has zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def correlation_matrix(summaries: Sequence[TrajectorySummary]) -> np.ndarray:
    """Symmetric 7x7 Pearson matrix over :data:`COLUMNS`.

    Trials are sorted by seed first, so the result does not depend on the
    order they were collected in.
    """
    if len(summaries) < 3:
        raise ValueError("need at least 3 trials")
    ordered = sorted(summaries, key=lambda s: s.seed)
    data = np.array([s.row() for s in ordered])
    k = data.shape[1]
    for j in range(k):
        if np.all(data[:, j] == data[0, j]):
            raise DegenerateVariance(f"column {COLUMNS[j]} is constant across trials")
    out = np.eye(k)
    for a in range(k):
        for b in range(a + 1, k):
            out[a, b] = out[b, a] = pearson(data[:, a], data[:, b])
    return out


def success_correlations(summaries: Sequence[TrajectorySummary]) -> dict[str, float]:
    corr = correlation_matrix(summaries)
    return {name: float(corr[i, -1]) for i, name in enumerate(COLUMNS[:-1])}


def write_summaries_csv(path, summaries: Sequence[TrajectorySummary]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("seed," + ",".join(METRIC_FIELDS) + ",success\n")
        for s in sorted(summaries, key=lambda s: s.seed):
            vals = ",".join(repr(v) for v in s.row()[:-1])
            fh.write(f"{s.seed},{vals},{s.success}\n")


def write_corr_csv(path, corr: np.ndarray) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("," + ",".join(COLUMNS) + "\n")
        for name, row in zip(COLUMNS, corr):
            fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")


def run_analysis(records: Sequence[TrialRecord], out_dir, aggregate: str = "mean") -> np.ndarray:
    """Write summaries.csv, corr.csv and corr.svg under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = [summarize_trajectory(r, aggregate) for r in records]
    write_summaries_csv(out / "summaries.csv", summaries)
    corr = correlation_matrix(summaries)
    write_corr_csv(out / "corr.csv", corr)
    (out / "corr.svg").write_text(svg.correlation_heatmap(corr, COLUMNS, title=f"Pearson correlation ({aggregate} over steps)"))
    return corr
