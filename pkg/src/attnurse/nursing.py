"""Latent nursing: gradient steps on the latent during early denoising steps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import TokenEmbeddings
from .errors import NonFiniteGradient, OutOfRange
from .losses import LossKind, latent_loss, latent_value_and_grad

MAX_HALVINGS = 20
MIN_GRAD_NORM = 1e-8


@dataclass(frozen=True)
class NurseConfig:
    """Nursing hyperparameters.

    The learning rate starts at ``lr0`` and decays linearly to 0 at
    ``cutoff``; steps ``k >= cutoff`` are left alone.  With ``backtrack``
    each update halves the step (at most 20 times) until the loss strictly
    decreases, and skips the update if it never does.
    """

    loss: LossKind = LossKind("com")
    lr0: float = 20.0
    cutoff: int = 25
    inner_steps: int = 1
    backtrack: bool = True

    def to_json(self) -> dict:
        return {
            "loss": str(self.loss),
            "lr0": self.lr0,
            "cutoff": self.cutoff,
            "inner_steps": self.inner_steps,
            "backtrack": self.backtrack,
        }


def lr_at(cfg: NurseConfig, k: int) -> float:
    if not 0 <= k < cfg.cutoff:
        raise OutOfRange(f"step {k} outside nursing window [0, {cfg.cutoff})")
    return cfg.lr0 * (1.0 - k / cfg.cutoff)


def _checked_grad(cfg, z, tok, entities):
    if not np.all(np.isfinite(z)):
        raise NonFiniteGradient("latent contains NaN or Inf before the nursing update")
    value, grad = latent_value_and_grad(cfg.loss, z, tok, entities)
    if not np.all(np.isfinite(grad)) or not np.isfinite(value):
        raise NonFiniteGradient(f"non-finite {cfg.loss} loss or gradient (loss={value!r})")
    return value, grad


def nurse_step(z, cfg: NurseConfig, tok: TokenEmbeddings, entities, alpha: float) -> np.ndarray:
    """Plain gradient step ``z - alpha * grad``."""
    if alpha < 0:
        raise ValueError("step size must be >= 0")
    z = np.asarray(z, dtype=np.float64)
    _, grad = _checked_grad(cfg, z, tok, entities)
    return z - alpha * grad


def descent_step(z, cfg: NurseConfig, tok: TokenEmbeddings, entities, alpha: float) -> np.ndarray:
    """Gradient step with step halving until the loss strictly decreases."""
    z = np.asarray(z, dtype=np.float64)
    value, grad = _checked_grad(cfg, z, tok, entities)
    if np.linalg.norm(grad) <= MIN_GRAD_NORM:
        return z
    for _ in range(MAX_HALVINGS + 1):
        cand = z - alpha * grad
        if latent_loss(cfg.loss, cand, tok, entities) < value:
            return cand
        alpha *= 0.5
    return z


def run_nursing(z, k: int, cfg: NurseConfig, tok: TokenEmbeddings, entities) -> np.ndarray:
    """Apply ``inner_steps`` updates at denoising step ``k``; no-op once ``k >= cutoff``."""
    if k >= cfg.cutoff:
        return z
    alpha = lr_at(cfg, k)
    if alpha == 0:
        return z
    step = descent_step if cfg.backtrack else nurse_step
    for _ in range(cfg.inner_steps):
        z = step(z, cfg, tok, entities, alpha)
    return z
