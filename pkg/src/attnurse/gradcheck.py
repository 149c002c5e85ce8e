"""Seeded gradient-check suite: analytic gradients against central differences.

Numerical derivatives are taken on the extended-precision formulas in
:mod:`attnurse.reference`, so the comparison is not limited by float64
cancellation when gradient entries are tiny.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import reference
from .attention import TokenEmbeddings
from .losses import ALL_KINDS, LossKind, finite_diff_oracle, gradient_error, gradients_agree, latent_value_and_grad, loss_value_and_grad
from .rng import Xoshiro256

STACK_SHAPE = (8, 8, 2)
LATENT_SHAPE = (6, 6, 4)
LATENT_TOKENS = 3
STEP = 1e-6
RTOL = 1e-4
ATOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    kind: str
    target: str  # "maps" or "latent"
    seed: int
    max_rel: float
    max_abs: float
    ok: bool

    def to_json(self) -> dict:
        return {"kind": self.kind, "target": self.target, "seed": self.seed,
                "max_rel": self.max_rel, "max_abs": self.max_abs, "ok": self.ok}


def random_stack(seed: int, shape=STACK_SHAPE, low: float = 0.05, high: float = 0.95) -> np.ndarray:
    """Stack entries drawn uniformly from ``[low, high)`` (away from the PD clamp and 0)."""
    return low + (high - low) * Xoshiro256(seed).uniform(shape)


def random_latent(seed: int, shape=LATENT_SHAPE, n_tokens: int = LATENT_TOKENS) -> tuple[np.ndarray, TokenEmbeddings]:
    rng = Xoshiro256(seed)
    keys = rng.normal((n_tokens, shape[-1]))
    values = rng.normal((n_tokens, shape[-1]))
    z = 2.0 * rng.normal(shape)
    return z, TokenEmbeddings.from_arrays(keys, values)


def check_maps(kind: LossKind, stack, entities=(0, 1), h: float = STEP) -> tuple[float, float, bool]:
    _, analytic = loss_value_and_grad(kind, stack, entities)
    sub = np.asarray(stack, dtype=reference.LD)[..., list(entities)]
    local = tuple(range(len(entities)))
    numeric = finite_diff_oracle(lambda b: reference.loss(kind, b, local), sub, h, batched=True)
    numeric = numeric.astype(np.float64)
    rel, ab = gradient_error(analytic, numeric, ATOL)
    return rel, ab, gradients_agree(analytic, numeric, RTOL, ATOL)


def check_latent(kind: LossKind, z, tok: TokenEmbeddings, entities=(0, 1), h: float = STEP) -> tuple[float, float, bool]:
    _, analytic = latent_value_and_grad(kind, z, tok, entities)
    numeric = finite_diff_oracle(
        lambda b: reference.latent_loss(kind, b, tok, entities), np.asarray(z, dtype=reference.LD), h, batched=True
    ).astype(np.float64)
    rel, ab = gradient_error(analytic, numeric, ATOL)
    return rel, ab, gradients_agree(analytic, numeric, RTOL, ATOL)


def run_suite(kinds: Sequence[LossKind] = ALL_KINDS, seeds: Iterable[int] = range(50), latent: bool = True) -> list[CheckResult]:
    out = []
    seeds = list(seeds)
    for kind in kinds:
        for s in seeds:
            rel, ab, ok = check_maps(kind, random_stack(s))
            out.append(CheckResult(str(kind), "maps", s, rel, ab, ok))
            if latent:
                z, tok = random_latent(s)
                rel, ab, ok = check_latent(kind, z, tok)
                out.append(CheckResult(str(kind), "latent", s, rel, ab, ok))
    return out


def parse_kinds(text: str) -> tuple[LossKind, ...]:
    if text.strip() == "all":
        return ALL_KINDS
    return tuple(LossKind.parse(part.strip()) for part in text.split(",") if part.strip())
