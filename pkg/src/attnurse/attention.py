"""Attention grids: spatial normalization, center of mass, softmax cross-attention.

Shapes used throughout the package:

* attention map: ``(H, W)`` nonnegative array
* attention stack: ``(H, W, N)`` array, one channel per text token
* latent grid: ``(H, W, D)`` array

Coordinates are 0-based cell indices ``(row, col)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import AllZeroMap, DimMismatch

EPS_FLOOR = 1e-12


class GridDims(NamedTuple):
    height: int
    width: int
    tokens: int = 1


@dataclass(frozen=True)
class TokenEmbeddings:
    """Toy stand-in for the projected text embeddings (keys and values).

    Query projection is the identity, so a latent cell attends to token ``n``
    with logit ``<z[i, j], keys[n]> / scale``.
    """

    keys: np.ndarray
    values: np.ndarray
    scale: float

    @classmethod
    def from_arrays(cls, keys, values) -> "TokenEmbeddings":
        keys = np.asarray(keys, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if keys.ndim != 2 or keys.shape != values.shape:
            raise DimMismatch(f"keys {keys.shape} and values {values.shape} must be equal N x D")
        keys = keys / np.linalg.norm(keys, axis=1, keepdims=True)
        return cls(keys=keys, values=values, scale=float(np.sqrt(keys.shape[1])))

    @property
    def n_tokens(self) -> int:
        return self.keys.shape[0]

    @property
    def dim(self) -> int:
        return self.keys.shape[1]


def normalize_map(a, eps: float = EPS_FLOOR) -> np.ndarray:
    """Return ``(a + eps) / sum(a + eps)`` for a single ``(H, W)`` map."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimMismatch(f"expected an (H, W) map, got shape {a.shape}")
    shifted = a + eps
    total = shifted.sum()
    if not total > 0:
        raise AllZeroMap("attention map has no positive mass; enable the epsilon floor")
    return shifted / total


def normalize_stack(stack, eps: float = EPS_FLOOR) -> np.ndarray:
    """Spatially normalize every channel of an ``(H, W, E)`` stack."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise DimMismatch(f"expected an (H, W, E) stack, got shape {stack.shape}")
    shifted = stack + eps
    totals = shifted.sum(axis=(0, 1))
    if not np.all(totals > 0):
        raise AllZeroMap("attention map has no positive mass; enable the epsilon floor")
    return shifted / totals


def grid_coords(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.meshgrid(
        np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij"
    )
    return rows, cols


def center_of_mass(p) -> tuple[float, float]:
    """Probability-weighted mean ``(row, col)`` of a normalized map."""
    p = np.asarray(p, dtype=np.float64)
    rows, cols = grid_coords(*p.shape)
    return float((p * rows).sum()), float((p * cols).sum())


def centers_of_mass(probs) -> np.ndarray:
    """``(E, 2)`` array of centers for an ``(H, W, E)`` normalized stack."""
    probs = np.asarray(probs, dtype=np.float64)
    rows, cols = grid_coords(probs.shape[0], probs.shape[1])
    r = np.einsum("ije,ij->e", probs, rows)
    c = np.einsum("ije,ij->e", probs, cols)
    return np.stack([r, c], axis=1)


def softmax(logits, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def attention_logits(z, tok: TokenEmbeddings) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 3 or z.shape[2] != tok.dim:
        raise DimMismatch(f"latent shape {z.shape} does not match key dimension {tok.dim}")
    return (z @ tok.keys.T) / tok.scale


def compute_attention(z, tok: TokenEmbeddings) -> np.ndarray:
    """Per-cell softmax over tokens of ``<z, key> / scale``; shape ``(H, W, N)``."""
    return softmax(attention_logits(z, tok), axis=-1)


def smooth_map(a, sigma: float) -> np.ndarray:
    """Gaussian blur with half-sample reflect padding; ``sigma=0`` is a no-op.

    The kernel is truncated at ``4 * sigma`` and normalized, so total mass is
    preserved.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    a = np.asarray(a, dtype=np.float64)
    if sigma == 0:
        return a
    return ndimage.gaussian_filter(a, sigma=sigma, mode="reflect", truncate=4.0)


def smooth_stack(stack, sigma: float) -> np.ndarray:
    """Blur each token channel of an ``(H, W, N)`` stack independently."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    stack = np.asarray(stack, dtype=np.float64)
    if sigma == 0:
        return stack
    return ndimage.gaussian_filter(stack, sigma=(sigma, sigma, 0.0), mode="reflect", truncate=4.0)
