"""Guidance losses over attention stacks, with exact analytic gradients.

Overlap losses (``iou``, ``com``, ``kl``, ``cc``) act on spatially
normalized entity maps and are signed so that minimizing them reduces
overlap.  The baseline losses (``ae``, ``db``, ``pd``) act on the raw
softmax maps.  Gradients are taken with respect to the raw stack, so the
overlap kinds include the Jacobian of the spatial normalization.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .attention import (
    EPS_FLOOR,
    TokenEmbeddings,
    centers_of_mass,
    compute_attention,
    grid_coords,
    normalize_stack,
)
from .errors import DimMismatch, FewerThanTwoEntities, ProbabilityOverflow
from . import metrics

OVERLAP_KINDS = ("iou", "com", "kl", "cc")
BASELINE_KINDS = ("ae", "db", "pd")
EXTRA_TERMS = ("int", "var")
PD_CLAMP = 1.0 - 1e-9

_COMBINED = re.compile(r"^(iou|com|kl|cc)\+(int|var):([+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)$")


@dataclass(frozen=True)
class LossKind:
    """A guidance loss; ``extra``/``weight`` describe an optional auxiliary term."""

    name: str
    extra: str | None = None
    weight: float = 1.0

    def __post_init__(self):
        if self.name not in OVERLAP_KINDS + BASELINE_KINDS:
            raise ValueError(f"unknown loss kind {self.name!r}")
        if self.extra is not None:
            if self.extra not in EXTRA_TERMS:
                raise ValueError(f"unknown auxiliary term {self.extra!r}")
            if self.name not in OVERLAP_KINDS:
                raise ValueError("auxiliary terms combine only with overlap losses")
            if not self.weight >= 0:
                raise ValueError("combined-loss weight must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "LossKind":
        text = text.strip().lower()
        if text in OVERLAP_KINDS + BASELINE_KINDS:
            return cls(text)
        m = _COMBINED.match(text)
        if m is None:
            raise ValueError(
                f"cannot parse loss {text!r}; expected one of "
                f"{', '.join(OVERLAP_KINDS + BASELINE_KINDS)} or '<overlap>+int:λ' / '<overlap>+var:λ'"
            )
        return cls(m.group(1), m.group(2), float(m.group(3)))

    @property
    def is_overlap(self) -> bool:
        return self.name in OVERLAP_KINDS

    @property
    def min_entities(self) -> int:
        return 2 if self.is_overlap else 1

    def __str__(self) -> str:
        if self.extra is None:
            return self.name
        return f"{self.name}+{self.extra}:{self.weight!r}"


ALL_KINDS = tuple(LossKind(k) for k in OVERLAP_KINDS + BASELINE_KINDS) + (
    LossKind("com", "int", 1.0),
    LossKind("iou", "var", 1.0),
)


def _check_entities(kind: LossKind, stack: np.ndarray, entities: Sequence[int]) -> list[int]:
    ents = [int(e) for e in entities]
    n = stack.shape[2]
    if len(set(ents)) != len(ents):
        raise ValueError(f"entity indices must be distinct, got {ents}")
    for e in ents:
        if not 0 <= e < n:
            raise DimMismatch(f"entity index {e} outside 0..{n - 1}")
    if len(ents) < kind.min_entities:
        if kind.is_overlap:
            raise FewerThanTwoEntities(f"{kind} needs at least 2 entities, got {len(ents)}")
        raise ValueError(f"{kind} needs at least one entity")
    return ents


# --- gradients with respect to normalized maps -----------------------------


def _iou_p(probs):
    e = probs.shape[2]
    pairs = list(combinations(range(e), 2))
    g = np.zeros_like(probs)
    total = 0.0
    for a, b in pairs:
        p, q = probs[..., a], probs[..., b]
        s = p + q
        safe = s > 0
        ss = np.where(safe, s, 1.0)
        total += float(np.where(safe, p * q / ss, 0.0).sum())
        g[..., a] += np.where(safe, (q / ss) ** 2, 0.0)
        g[..., b] += np.where(safe, (p / ss) ** 2, 0.0)
    return total / len(pairs), g / len(pairs)


def _com_p(probs):
    """Value and gradient of the (positive) CoM distance / polygon area."""
    rows, cols = grid_coords(probs.shape[0], probs.shape[1])
    com = centers_of_mass(probs)
    e = len(com)
    if e == 2:
        d = com[0] - com[1]
        gcom = np.stack([2 * d, -2 * d])
        value = float(d @ d)
    else:
        order = metrics.polygon_order(com)
        pts = com[order]
        signed = metrics.shoelace(pts)
        sign = np.sign(signed)
        x, y = pts[:, 0], pts[:, 1]
        gx = 0.5 * (np.roll(y, -1) - np.roll(y, 1))
        gy = 0.5 * (np.roll(x, 1) - np.roll(x, -1))
        gcom = np.empty_like(com)
        gcom[order, 0] = sign * gx
        gcom[order, 1] = sign * gy
        value = abs(signed)
    g = rows[..., None] * gcom[:, 0] + cols[..., None] * gcom[:, 1]
    return value, g


def _kl_p(probs):
    e = probs.shape[2]
    pairs = list(combinations(range(e), 2))
    logs = np.log(probs)
    g = np.zeros_like(probs)
    total = 0.0
    for a, b in pairs:
        p, q = probs[..., a], probs[..., b]
        dlog = logs[..., a] - logs[..., b]
        total += float(0.5 * ((p - q) * dlog).sum())
        g[..., a] += 0.5 * (dlog + 1.0 - q / p)
        g[..., b] += 0.5 * (-dlog + 1.0 - p / q)
    return total / len(pairs), g / len(pairs)


def _cc_p(probs):
    h, w, e = probs.shape
    winner = probs.argmax(axis=2)
    g = np.zeros_like(probs)
    np.put_along_axis(g, winner[..., None], 1.0 / (h * w), axis=2)
    return float(probs.max(axis=2).mean()), g


def _var_p(probs):
    rows, cols = grid_coords(probs.shape[0], probs.shape[1])
    com = centers_of_mass(probs)
    d2 = (rows[..., None] - com[:, 0]) ** 2 + (cols[..., None] - com[:, 1]) ** 2
    e = probs.shape[2]
    return float((probs * d2).sum(axis=(0, 1)).mean()), d2 / e


def _normalize_backward(g_probs, probs, totals):
    inner = (g_probs * probs).sum(axis=(0, 1))
    return (g_probs - inner) / totals


# --- gradients with respect to raw maps ------------------------------------


def _int_raw(raw):
    h, w, _ = raw.shape
    means = raw.mean(axis=(0, 1))
    k = int(np.argmin(means))
    g = np.zeros_like(raw)
    g[..., k] = 1.0 / (h * w)
    return float(means[k]), g


def _attend_excite(raw):
    h, w, e = raw.shape
    flat = raw.reshape(h * w, e)
    peaks = flat.max(axis=0)
    k = int(np.argmin(peaks))  # entity with the weakest peak, lowest index on ties
    cell = int(np.argmax(flat[:, k]))  # first cell in row-major order on ties
    g = np.zeros_like(raw)
    g[cell // w, cell % w, k] = -1.0
    return float(1.0 - peaks[k]), g


def _total_variation(a):
    dv = a[:-1, :] - a[1:, :]
    dh = a[:, :-1] - a[:, 1:]
    tv = float(np.abs(dv).sum() + np.abs(dh).sum())
    g = np.zeros_like(a)
    sv, sh = np.sign(dv), np.sign(dh)
    g[:-1, :] += sv
    g[1:, :] -= sv
    g[:, :-1] += sh
    g[:, 1:] -= sh
    return tv, g


def _divide_bind(raw):
    tvs = [_total_variation(raw[..., e]) for e in range(raw.shape[2])]
    k = int(np.argmin([tv for tv, _ in tvs]))
    g = np.zeros_like(raw)
    g[..., k] = -tvs[k][1]
    return -tvs[k][0], g


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x < 0`` without cancellation."""
    return np.where(x < -np.log(2.0), np.log1p(-np.exp(x)), np.log(-np.expm1(x)))


def _predicated(raw):
    if np.any(raw > 1.0) or np.any(raw < 0.0) or not np.all(np.isfinite(raw)):
        raise ProbabilityOverflow("predicated loss needs attention scores in [0, 1]")
    a = np.minimum(raw, PD_CLAMP)
    log_miss = np.log1p(-a).sum(axis=(0, 1))  # log prod(1 - A) per entity
    if np.any(log_miss >= 0):
        raise ProbabilityOverflow("an entity map is identically zero; predicated loss is infinite")
    value = float(-_log1mexp(log_miss).sum())
    odds = np.exp(log_miss) / -np.expm1(log_miss)  # prod / (1 - prod)
    g = -odds / (1.0 - a)
    g = np.where(raw < PD_CLAMP, g, 0.0)
    return value, g


_OVERLAP_FNS = {"iou": (_iou_p, 1.0), "com": (_com_p, -1.0), "kl": (_kl_p, -1.0), "cc": (_cc_p, -1.0)}
_BASELINE_FNS = {"ae": _attend_excite, "db": _divide_bind, "pd": _predicated}


def loss_value_and_grad(kind: LossKind, stack, entities, eps: float = EPS_FLOOR):
    """Loss value and ``(H, W, E)`` gradient with respect to the raw entity maps."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise DimMismatch(f"expected an (H, W, N) stack, got shape {stack.shape}")
    ents = _check_entities(kind, stack, entities)
    raw = stack[..., ents]
    if not kind.is_overlap:
        return _BASELINE_FNS[kind.name](raw)

    shifted = raw + eps
    totals = shifted.sum(axis=(0, 1))
    probs = normalize_stack(raw, eps)
    fn, sign = _OVERLAP_FNS[kind.name]
    value, g_probs = fn(probs)
    value, g_probs = sign * value, sign * g_probs
    g_raw = np.zeros_like(raw)
    # a zero weight skips the auxiliary term so the result is bitwise the base loss
    extra = kind.extra if kind.weight != 0 else None
    if extra == "var":
        v, gv = _var_p(probs)
        value += kind.weight * v
        g_probs = g_probs + kind.weight * gv
    elif extra == "int":
        v, gi = _int_raw(raw)
        value += kind.weight * -v
        g_raw = -kind.weight * gi
    return value, _normalize_backward(g_probs, probs, totals) + g_raw


def loss_eval(kind: LossKind, stack, entities, eps: float = EPS_FLOOR) -> float:
    return loss_value_and_grad(kind, stack, entities, eps)[0]


def loss_grad_maps(kind: LossKind, stack, entities, eps: float = EPS_FLOOR) -> np.ndarray:
    return loss_value_and_grad(kind, stack, entities, eps)[1]


def latent_value_and_grad(kind: LossKind, z, tok: TokenEmbeddings, entities, eps: float = EPS_FLOOR):
    """Loss of ``compute_attention(z, tok)`` and its gradient with respect to ``z``."""
    attn = compute_attention(z, tok)
    value, g_maps = loss_value_and_grad(kind, attn, entities, eps)
    g_attn = np.zeros_like(attn)
    g_attn[..., list(entities)] = g_maps
    # per-cell softmax Jacobian: dA_n/dlogit_m = A_n (delta_nm - A_m)
    g_logits = attn * (g_attn - (g_attn * attn).sum(axis=2, keepdims=True))
    return value, (g_logits @ tok.keys) / tok.scale


def latent_loss(kind: LossKind, z, tok: TokenEmbeddings, entities, eps: float = EPS_FLOOR) -> float:
    return loss_eval(kind, compute_attention(z, tok), entities, eps)


def grad_latent(kind: LossKind, z, tok: TokenEmbeddings, entities, eps: float = EPS_FLOOR) -> np.ndarray:
    return latent_value_and_grad(kind, z, tok, entities, eps)[1]


def finite_diff_oracle(f: Callable, x, h: float = 1e-6, batched: bool = False) -> np.ndarray:
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h`` for every coordinate.

    Floating dtypes wider than float64 are preserved.  With ``batched=True``
    ``f`` receives all ``2 * x.size`` perturbed copies stacked on a leading
    axis and must return one value per copy.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x)
    x = x.astype(np.result_type(x.dtype, np.float64))
    n = x.size
    if batched:
        steps = np.zeros((2 * n, n), dtype=x.dtype)
        idx = np.arange(n)
        steps[idx, idx] = h
        steps[n + idx, idx] = -h
        batch = (x.reshape(1, -1) + steps).reshape((2 * n,) + x.shape)
        vals = np.asarray(f(batch))
        return ((vals[:n] - vals[n:]) / (2 * x.dtype.type(h))).reshape(x.shape)
    grad = np.empty_like(x)
    work = x.copy()
    flat = work.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(n):
        orig = flat[i]
        flat[i] = orig + h
        up = f(work)
        flat[i] = orig - h
        down = f(work)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def gradient_error(analytic, numeric, floor: float = 1e-8) -> tuple[float, float]:
    """``(max relative error, max absolute error)``.

    Entries with ``|analytic| >= floor`` count toward the relative error,
    the rest toward the absolute one.
    """
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    diff = np.abs(analytic - numeric)
    big = np.abs(analytic) >= floor
    rel = diff[big] / np.abs(analytic[big])
    return float(rel.max(initial=0.0)), float(diff[~big].max(initial=0.0))


def gradients_agree(analytic, numeric, rtol: float = 1e-4, atol: float = 1e-8) -> bool:
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    diff = np.abs(analytic - numeric)
    big = np.abs(analytic) >= atol
    ok_rel = diff[big] < rtol * np.abs(analytic[big])
    ok_abs = diff[~big] < atol
    return bool(ok_rel.all() and ok_abs.all())
