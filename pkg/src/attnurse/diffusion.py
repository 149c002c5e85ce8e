"""Seeded toy denoising pipeline in which entity tokens compete for cells.

The denoiser is analytic: it predicts ``eps = z - g(t) * sum_n S(A_n) value_n``
where ``A = compute_attention(z, tokens)`` and ``S`` is a light Gaussian
blur.  Every reverse step therefore pulls each latent cell toward the value
vectors of the tokens it already attends to, and the blur couples
neighbouring cells.  Cells settle on one token, entities grow into regions,
and an entity whose region collapses goes missing, as in the real pipeline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import ndimage

from .attention import TokenEmbeddings, compute_attention, smooth_stack
from .errors import BadRange, DegenerateSchedule, DimMismatch
from .metrics import MetricRecord, record_metrics
from .rng import Xoshiro256

if TYPE_CHECKING:
    from .nursing import NurseConfig


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step coefficients; index ``t - 1`` holds the values for step ``t``."""

    alphas: np.ndarray
    alpha_bars: np.ndarray
    sigmas: np.ndarray

    @classmethod
    def from_alphas(cls, alphas, sigmas=None) -> "NoiseSchedule":
        alphas = np.asarray(alphas, dtype=np.float64)
        if alphas.ndim != 1 or len(alphas) == 0:
            raise BadRange("need at least one step")
        if np.any(alphas <= 0) or np.any(alphas > 1):
            raise BadRange("alphas must lie in (0, 1]")
        if sigmas is None:
            sigmas = np.sqrt(1.0 - alphas)
        return cls(alphas, np.cumprod(alphas), np.asarray(sigmas, dtype=np.float64))

    @property
    def steps(self) -> int:
        return len(self.alphas)


def build_schedule(steps: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta schedule with ``alpha = 1 - beta`` and ``sigma = sqrt(beta)``."""
    if steps < 1:
        raise BadRange(f"steps must be >= 1, got {steps}")
    if not 0 < beta_start <= beta_end < 1:
        raise BadRange(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    betas = np.linspace(beta_start, beta_end, steps)
    return NoiseSchedule.from_alphas(1.0 - betas, np.sqrt(betas))


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimMismatch(f"shape {a.shape} does not match {b.shape}")


def forward_diffuse(z0, t: int, sched: NoiseSchedule, noise) -> np.ndarray:
    z0 = np.asarray(z0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_same(z0, noise)
    ab = sched.alpha_bars[t - 1]
    return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * noise


@dataclass(frozen=True)
class ToyDenoiser:
    tokens: TokenEmbeddings
    schedule: NoiseSchedule
    pull: float = 0.0
    smoothing: float = 0.0

    def strength(self, t: int) -> float:
        """Pull strength ``g(t) = pull * sqrt(1 - alpha_bar_t)``."""
        return self.pull * math.sqrt(1.0 - self.schedule.alpha_bars[t - 1])


def denoiser_predict(z, t: int, den: ToyDenoiser) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    attn = compute_attention(z, den.tokens)
    g = den.strength(t)
    if g == 0:
        return z.copy()
    return z - g * (smooth_stack(attn, den.smoothing) @ den.tokens.values)


def posterior_step(z, t: int, sched: NoiseSchedule, eps_hat, noise) -> np.ndarray:
    """One ancestral sampling step given a noise prediction; no noise at ``t == 1``."""
    z = np.asarray(z, dtype=np.float64)
    _check_same(z, np.asarray(eps_hat))
    _check_same(z, np.asarray(noise))
    a = sched.alphas[t - 1]
    ab = sched.alpha_bars[t - 1]
    if ab == 1.0:
        raise DegenerateSchedule(f"alpha_bar is exactly 1 at step {t}")
    out = (z - ((1.0 - a) / math.sqrt(1.0 - ab)) * eps_hat) / math.sqrt(a)
    if t > 1:
        out = out + sched.sigmas[t - 1] * noise
    return out


def reverse_step(z, t: int, sched: NoiseSchedule, den: ToyDenoiser, noise) -> np.ndarray:
    if t < 1:
        raise BadRange("reverse steps are numbered from 1")
    return posterior_step(z, t, sched, denoiser_predict(z, t, den), noise)


def formation_success(final, entities, s_min: float, tau: float) -> tuple[bool, ...]:
    """An entity forms if it owns a 4-connected region of at least
    ``ceil(s_min * H * W)`` cells whose mean attention is at least ``tau``."""
    final = np.asarray(final, dtype=np.float64)
    h, w, _ = final.shape
    need = math.ceil(s_min * h * w)
    owner = final.argmax(axis=2)
    out = []
    for e in entities:
        labels, count = ndimage.label(owner == e)
        ok = False
        if count:
            idx = np.arange(1, count + 1)
            sizes = ndimage.sum_labels(np.ones_like(labels), labels, idx)
            means = ndimage.mean(final[..., e], labels, idx)
            ok = bool(np.any((sizes >= need) & (means >= tau)))
        out.append(ok)
    return tuple(out)


@dataclass(frozen=True)
class ToyConfig:
    height: int = 16
    width: int = 16
    channels: int = 8
    entities: int = 2
    background_tokens: int = 1
    steps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    pull: float = 128.0
    smoothing: float = 2.0
    key_noise: float = 0.02
    s_min: float = 0.05
    tau: float = 0.5
    snapshots: tuple[int, ...] = ()

    @property
    def tokens(self) -> int:
        return self.entities + self.background_tokens

    @property
    def entity_ids(self) -> tuple[int, ...]:
        return tuple(range(self.entities))


@dataclass
class TrialRecord:
    seed: int
    metrics: list[MetricRecord]
    final: np.ndarray
    formed: tuple[bool, ...]
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return all(self.formed)

    def summary(self) -> dict:
        return {"seed": self.seed, "success": self.success, "formed": list(self.formed), "steps": len(self.metrics)}


def _orthonormal_rows(g: np.ndarray) -> np.ndarray:
    out = np.empty_like(g)
    for i, row in enumerate(g):
        v = row.copy()
        for j in range(i):
            v -= (v @ out[j]) * out[j]
        out[i] = v / np.linalg.norm(v)
    return out


def sample_tokens(rng: Xoshiro256, n_tokens: int, dim: int, key_noise: float) -> TokenEmbeddings:
    """Orthonormal values (when ``dim >= n_tokens``) and unit keys scattered around them."""
    values = rng.normal((n_tokens, dim))
    if dim >= n_tokens:
        values = _orthonormal_rows(values)
    else:
        values = values / np.linalg.norm(values, axis=1, keepdims=True)
    keys = values + key_noise * rng.normal((n_tokens, dim))
    return TokenEmbeddings.from_arrays(keys, values)


def run_trial(cfg: ToyConfig, seed: int, nurse: "NurseConfig | None" = None) -> TrialRecord:
    """Sample one trajectory from ``z_T ~ N(0, I)`` down to ``z_0``.

    Random draws come from the seed's own stream in a fixed order: token
    embeddings, the initial latent, then one noise grid per step.
    Nursing consumes no randomness.
    """
    from .nursing import run_nursing

    rng = Xoshiro256(seed)
    tokens = sample_tokens(rng, cfg.tokens, cfg.channels, cfg.key_noise)
    sched = build_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
    den = ToyDenoiser(tokens, sched, cfg.pull, cfg.smoothing)
    entities = cfg.entity_ids
    shape = (cfg.height, cfg.width, cfg.channels)
    z = rng.normal(shape)
    records: list[MetricRecord] = []
    snapshots: dict[int, np.ndarray] = {}
    for k in range(cfg.steps):
        t = cfg.steps - k
        if nurse is not None:
            z = run_nursing(z, k, nurse, tokens, entities)
        attn = compute_attention(z, tokens)
        records.append(record_metrics(attn, entities, step=k))
        if k in cfg.snapshots:
            snapshots[k] = attn
        noise = rng.normal(shape)
        z = reverse_step(z, t, sched, den, noise)
    final = compute_attention(z, tokens)
    formed = formation_success(final, entities, cfg.s_min, cfg.tau)
    return TrialRecord(seed, records, final, formed, snapshots)
