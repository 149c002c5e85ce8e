"""Intensity, spread and overlap metrics over entity attention maps.

Every function takes either a sequence of ``(H, W)`` maps or an
``(H, W, E)`` array with one channel per entity.  ``intensity`` consumes raw
attention maps; the rest consume spatially normalized maps.  Pairwise
metrics (IoU, symmetric KL) average over all unordered entity pairs;
``cc`` takes the per-cell maximum over all entities; ``com_distance`` is the
squared CoM distance for two entities and the CoM-polygon area for more.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from itertools import combinations

import numpy as np

from .attention import EPS_FLOOR, centers_of_mass, grid_coords, normalize_stack
from .errors import DimMismatch, FewerThanTwoMaps, NonPositiveEntry

CSV_HEADER = ("step", "intensity", "variance", "iou", "com_distance", "sym_kl", "cc")


def as_stack(maps) -> np.ndarray:
    """Coerce maps to an ``(H, W, E)`` float64 array."""
    if isinstance(maps, np.ndarray) and maps.ndim == 3:
        return maps.astype(np.float64, copy=False)
    arrays = [np.asarray(m, dtype=np.float64) for m in maps]
    if not arrays:
        raise FewerThanTwoMaps("at least one map is required")
    shape = arrays[0].shape
    if len(shape) != 2:
        raise DimMismatch(f"maps must be 2-D, got shape {shape}")
    for a in arrays[1:]:
        if a.shape != shape:
            raise DimMismatch(f"map shapes differ: {shape} vs {a.shape}")
    return np.stack(arrays, axis=-1)


def _need_pairs(stack: np.ndarray) -> None:
    if stack.shape[2] < 2:
        raise FewerThanTwoMaps(f"overlap metrics need at least 2 maps, got {stack.shape[2]}")


def intensity(maps) -> float:
    """Minimum over entities of the mean raw attention score."""
    stack = as_stack(maps)
    return float(stack.mean(axis=(0, 1)).min())


def map_variances(probs: np.ndarray) -> np.ndarray:
    rows, cols = grid_coords(probs.shape[0], probs.shape[1])
    com = centers_of_mass(probs)
    d2 = (rows[..., None] - com[:, 0]) ** 2 + (cols[..., None] - com[:, 1]) ** 2
    return (probs * d2).sum(axis=(0, 1))


def variance(maps) -> float:
    """Mean over entities of the spread around each map's center of mass."""
    return float(map_variances(as_stack(maps)).mean())


def _pair_iou(p: np.ndarray, q: np.ndarray) -> float:
    s = p + q
    prod = p * q
    terms = np.divide(prod, s, out=np.zeros_like(prod), where=s > 0)
    return float(terms.sum())


def iou(maps) -> float:
    stack = as_stack(maps)
    _need_pairs(stack)
    pairs = list(combinations(range(stack.shape[2]), 2))
    return math.fsum(_pair_iou(stack[..., a], stack[..., b]) for a, b in pairs) / len(pairs)


def _pair_sym_kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * ((p - q) * (np.log(p) - np.log(q))).sum())


def sym_kl(maps) -> float:
    stack = as_stack(maps)
    _need_pairs(stack)
    if np.any(stack <= 0):
        raise NonPositiveEntry("symmetric KL needs strictly positive maps (epsilon floor disabled?)")
    pairs = list(combinations(range(stack.shape[2]), 2))
    return math.fsum(_pair_sym_kl(stack[..., a], stack[..., b]) for a, b in pairs) / len(pairs)


def cc(maps) -> float:
    """Clustering compactness: mean over cells of the max normalized score."""
    stack = as_stack(maps)
    _need_pairs(stack)
    return float(stack.max(axis=2).mean())


def polygon_order(points: np.ndarray) -> np.ndarray:
    """Indices ordering vertices by angle about their centroid, ties by radius."""
    center = points.mean(axis=0)
    d = points - center
    angle = np.arctan2(d[:, 1], d[:, 0])
    radius = np.hypot(d[:, 0], d[:, 1])
    return np.lexsort((np.arange(len(points)), radius, angle))


def shoelace(points: np.ndarray) -> float:
    """Signed shoelace area of the polygon with vertices in the given order."""
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float((x * np.roll(y, -1) - np.roll(x, -1) * y).sum())


def polygon_area(points) -> float:
    points = np.asarray(points, dtype=np.float64)
    return abs(shoelace(points[polygon_order(points)]))


def com_distance(maps) -> float:
    stack = as_stack(maps)
    _need_pairs(stack)
    com = centers_of_mass(stack)
    if len(com) == 2:
        d = com[0] - com[1]
        return float(d @ d)
    return polygon_area(com)


@dataclass(frozen=True)
class MetricRecord:
    step: int
    intensity: float
    variance: float
    iou: float
    com_distance: float
    sym_kl: float
    cc: float

    def csv_row(self) -> str:
        return ",".join([str(self.step)] + [repr(float(v)) for v in astuple(self)[1:]])

    @classmethod
    def from_csv_row(cls, row: str) -> "MetricRecord":
        parts = row.strip().split(",")
        if len(parts) != len(CSV_HEADER):
            raise ValueError(f"expected {len(CSV_HEADER)} fields, got {len(parts)}")
        return cls(int(parts[0]), *(float(p) for p in parts[1:]))

    @staticmethod
    def names() -> tuple[str, ...]:
        return tuple(f.name for f in fields(MetricRecord))[1:]


def record_metrics(stack, entities, step: int = 0, eps: float = EPS_FLOOR) -> MetricRecord:
    """All six metrics for the chosen entity channels of an attention stack."""
    stack = np.asarray(stack, dtype=np.float64)
    raw = stack[..., list(entities)]
    probs = normalize_stack(raw, eps)
    return MetricRecord(
        step=step,
        intensity=intensity(raw),
        variance=variance(probs),
        iou=iou(probs),
        com_distance=com_distance(probs),
        sym_kl=sym_kl(probs),
        cc=cc(probs),
    )


def write_csv(path, records) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def read_csv(path) -> list[MetricRecord]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ",".join(CSV_HEADER):
            raise ValueError(f"unexpected metrics header {header!r}")
        return [MetricRecord.from_csv_row(line) for line in fh if line.strip()]
