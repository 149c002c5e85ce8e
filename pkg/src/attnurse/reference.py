"""Direct-formula loss evaluations in extended precision.

Independent of the float64 code in :mod:`metrics` and :mod:`losses`: each
quantity is written out from its closed form (pairwise sums, a plain
product for the predicated loss, no log-space tricks) and evaluated in
``np.longdouble``.  All functions accept leading batch dimensions, so a
stack argument has shape ``(..., H, W, E)`` and a latent ``(..., H, W, D)``.

This is the target of the central-difference gradient checks, where
float64 rounding alone would swamp gradient entries near 1e-7.
"""
from __future__ import annotations

import numpy as np

LD = np.longdouble
_CELLS = (-3, -2)


def _coords(h, w):
    return np.arange(h, dtype=LD)[:, None, None], np.arange(w, dtype=LD)[None, :, None]


def normalize(a, eps=1e-12):
    a = np.asarray(a, dtype=LD) + LD(eps)
    return a / a.sum(axis=_CELLS, keepdims=True)


def centers(p):
    """``(..., E)`` row and column centers of normalized maps."""
    rows, cols = _coords(*p.shape[-3:-1])
    return (p * rows).sum(axis=_CELLS), (p * cols).sum(axis=_CELLS)


def _pairs(n):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def iou(p):
    vals = []
    for a, b in _pairs(p.shape[-1]):
        x, y = p[..., a], p[..., b]
        vals.append((x * y / (x + y)).sum(axis=(-2, -1)))
    return sum(vals) / LD(len(vals))


def sym_kl(p):
    vals = []
    for a, b in _pairs(p.shape[-1]):
        x, y = p[..., a], p[..., b]
        vals.append(LD(0.5) * (x * np.log(x / y) + y * np.log(y / x)).sum(axis=(-2, -1)))
    return sum(vals) / LD(len(vals))


def cc(p):
    h, w = p.shape[-3:-1]
    return p.max(axis=-1).sum(axis=(-2, -1)) / LD(h * w)


def _area(rs, cs):
    n = len(rs)
    r0, c0 = sum(rs) / LD(n), sum(cs) / LD(n)
    order = sorted(
        range(n),
        key=lambda k: (float(np.arctan2(cs[k] - c0, rs[k] - r0)), float(np.hypot(rs[k] - r0, cs[k] - c0)), k),
    )
    total = LD(0)
    for i in range(n):
        a, b = order[i], order[(i + 1) % n]
        total += rs[a] * cs[b] - rs[b] * cs[a]
    return abs(total) / LD(2)


def com_distance(p):
    r, c = centers(p)
    if p.shape[-1] == 2:
        return (r[..., 0] - r[..., 1]) ** 2 + (c[..., 0] - c[..., 1]) ** 2
    out = np.empty(r.shape[:-1], dtype=LD)
    for idx in np.ndindex(out.shape):
        out[idx] = _area(list(r[idx]), list(c[idx]))
    return out


def intensity(raw):
    return raw.mean(axis=_CELLS).min(axis=-1)


def variance(p):
    rows, cols = _coords(*p.shape[-3:-1])
    r, c = centers(p)
    r = r[..., None, None, :]
    c = c[..., None, None, :]
    return (p * ((rows - r) ** 2 + (cols - c) ** 2)).sum(axis=_CELLS).mean(axis=-1)


def attend_excite(raw):
    return (LD(1) - raw.max(axis=(-3, -2))).max(axis=-1)


def divide_bind(raw):
    tv = np.abs(raw[..., :-1, :, :] - raw[..., 1:, :, :]).sum(axis=_CELLS)
    tv = tv + np.abs(raw[..., :, :-1, :] - raw[..., :, 1:, :]).sum(axis=_CELLS)
    return -tv.min(axis=-1)


def predicated(raw):
    a = np.minimum(raw, LD(1) - LD(1e-9))
    prod = (LD(1) - a).prod(axis=_CELLS)
    return -np.log(LD(1) - prod).sum(axis=-1)


_OVERLAP = {"iou": (iou, 1), "com": (com_distance, -1), "kl": (sym_kl, -1), "cc": (cc, -1)}
_BASELINE = {"ae": attend_excite, "db": divide_bind, "pd": predicated}


def loss(kind, stack, entities, eps=1e-12):
    """Reference value of ``kind`` (a :class:`~attnurse.losses.LossKind`)."""
    stack = np.asarray(stack, dtype=LD)
    raw = stack[..., list(entities)]
    if kind.name in _BASELINE:
        return _BASELINE[kind.name](raw)
    p = normalize(raw, eps)
    fn, sign = _OVERLAP[kind.name]
    value = sign * fn(p)
    if kind.extra == "int":
        value = value - LD(kind.weight) * intensity(raw)
    elif kind.extra == "var":
        value = value + LD(kind.weight) * variance(p)
    return value


def attention(z, keys, scale):
    z = np.asarray(z, dtype=LD)
    logits = (z @ np.asarray(keys, dtype=LD).T) / LD(scale)
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def latent_loss(kind, z, tok, entities, eps=1e-12):
    return loss(kind, attention(z, tok.keys, tok.scale), entities, eps)
