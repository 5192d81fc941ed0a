"""Deterministic toy masked-attention simulator.

This is a verification instrument, not a generator: it runs real softmax
attention over seeded embeddings so mask semantics can be checked
empirically (which queries can a perturbation reach?), under the same
two-stage schedule a full pipeline would use. The update per step is a
minimal residual attention layer stack; no MLP or normalization, since
every property being tested is about attention support.

Disallowed logits are set to the most negative finite float before the
max-subtracted softmax, which drives their weights to exact zero: isolation
results are bit-exact, not approximate.

Everything is a pure function of (inputs, seed); runs are bitwise
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .composition import CompositionSpec
from .layout import Modality, SpecialOwner, TokenLayout, TokenTag, pack
from .masks import AttentionMaskArtifact, MaskMode, build_mask, expand_dense
from .schedule import build_schedule

__all__ = [
    "SimulatorConfig",
    "attention_weights",
    "denoise_loop",
    "embed",
    "masked_attention",
    "perturbation_probe",
    "projections",
]

# entropy stream labels, so token, projection, and perturbation draws never collide
_STREAM_TOKEN = 0
_STREAM_PROJECTION = 1
_STREAM_PERTURB = 2

_OWNER_CODES = {SpecialOwner.CEI: 1 << 20, SpecialOwner.UNCONTROLLED: (1 << 20) + 1}
_MODALITY_CODES = {Modality.VISUAL: 0, Modality.TEXTUAL: 1, Modality.SPATIAL: 2}


@dataclass(frozen=True)
class SimulatorConfig:
    dim: int = 16
    layers: int = 2
    seed: int | None = None  # None: take the seed from the composition

    def __post_init__(self) -> None:
        if self.dim < 1 or self.layers < 1:
            raise ValueError("dim and layers must be >= 1")


def _owner_code(owner: int | SpecialOwner) -> int:
    return owner if isinstance(owner, int) else _OWNER_CODES[owner]


def embed(layout: TokenLayout, seed: int, dim: int = 16) -> np.ndarray:
    """Token matrix (total_len, dim); each row is a pure function of
    (owner, modality, within-span index, seed)."""
    rows = np.empty((layout.total_len, dim), dtype=np.float64)
    pos = 0
    for span in layout.spans:
        if span.is_canvas:
            index = 0
            for grid_row in layout.canvas_grid:
                for tag in grid_row:
                    rows[pos] = _token_vector(tag, index, seed, dim)
                    pos += 1
                    index += 1
        else:
            for index in range(span.length):
                rows[pos] = _token_vector(span.tag, index, seed, dim)
                pos += 1
    return rows


def _token_vector(tag: TokenTag, index: int, seed: int, dim: int) -> np.ndarray:
    ss = np.random.SeedSequence(
        [seed, _STREAM_TOKEN, _owner_code(tag.owner), _MODALITY_CODES[tag.modality], index]
    )
    return np.random.default_rng(ss).standard_normal(dim)


def projections(seed: int, layer: int, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fixed seeded (Wq, Wk, Wv). Entries scale as 1/dim to keep the
    residual trajectory bounded over tens of steps."""
    mats = []
    for role in range(3):
        ss = np.random.SeedSequence([seed, _STREAM_PROJECTION, layer, role])
        mats.append(np.random.default_rng(ss).standard_normal((dim, dim)) / dim)
    return mats[0], mats[1], mats[2]


def _masked_weights(
    x: np.ndarray, mask: AttentionMaskArtifact, seed: int, layer: int
) -> tuple[np.ndarray, np.ndarray]:
    n, dim = x.shape
    if mask.total_len != n:
        raise ValueError(f"mask is for {mask.total_len} tokens, matrix has {n} rows")
    wq, wk, wv = projections(seed, layer, dim)
    q = x @ wq
    k = x @ wk
    v = x @ wv
    logits = (q @ k.T) / np.sqrt(dim)
    allowed = expand_dense(mask)
    logits = np.where(allowed, logits, np.finfo(np.float64).min)
    # max subtraction keeps allowed terms stable and underflows the
    # disallowed ones to exact zero (every row has an allowed entry);
    # the disallowed lanes may overflow to -inf on the way, by design
    with np.errstate(over="ignore"):
        logits = logits - logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights, v


def masked_attention(
    x: np.ndarray, mask: AttentionMaskArtifact, seed: int, layer: int = 0
) -> np.ndarray:
    """One attention application: softmax(QK^T / sqrt(d)) V under the mask."""
    weights, v = _masked_weights(np.asarray(x, dtype=np.float64), mask, seed, layer)
    return weights @ v


def attention_weights(
    x: np.ndarray, mask: AttentionMaskArtifact, seed: int, layer: int = 0
) -> np.ndarray:
    """Post-softmax weights, exposed for support checks in tests."""
    weights, _ = _masked_weights(np.asarray(x, dtype=np.float64), mask, seed, layer)
    return weights


def denoise_loop(
    spec: CompositionSpec,
    config: SimulatorConfig = SimulatorConfig(),
    on_step: Callable[[int, MaskMode], None] | None = None,
) -> list[np.ndarray]:
    """Run the staged loop; returns the state after each step.

    Step t applies the scheduled mode's full layer stack as residual
    updates: x <- x + attention(x).
    """
    layout = pack(spec)
    seed = spec.seed if config.seed is None else config.seed
    masks = {mode: build_mask(layout, mode) for mode in MaskMode}
    schedule = build_schedule(spec.total_steps, spec.first_stage_ratio)
    x = embed(layout, seed, config.dim)
    states: list[np.ndarray] = []
    for t, mode in enumerate(schedule.steps):
        if on_step is not None:
            on_step(t, mode)
        for layer in range(config.layers):
            x = x + masked_attention(x, masks[mode], seed, layer)
        states.append(x.copy())
    return states


def perturbation_probe(
    layout: TokenLayout,
    mode: MaskMode,
    owner: int | SpecialOwner,
    modality: Modality | None = None,
    *,
    seed: int = 0,
    dim: int = 16,
    tolerance: float = 1e-9,
) -> set[int]:
    """Queries whose single-layer output moves when a token class is replaced.

    Runs attention on the baseline embedding and again with every token of
    (owner, modality) redrawn; by the mask construction the changed set can
    only contain queries allowed to attend to the perturbed class.
    """
    targets = [
        i
        for i, tag in enumerate(layout.per_token_tags)
        if tag.owner == owner and (modality is None or tag.modality is modality)
    ]
    if not targets:
        raise ValueError(f"no tokens with owner {owner!r} and modality {modality!r}")
    baseline = embed(layout, seed, dim)
    perturbed = baseline.copy()
    rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_PERTURB]))
    perturbed[targets] = rng.standard_normal((len(targets), dim))
    mask = build_mask(layout, mode)
    out_a = masked_attention(baseline, mask, seed)
    out_b = masked_attention(perturbed, mask, seed)
    diff = np.abs(out_a - out_b).max(axis=1)
    return {int(i) for i in np.nonzero(diff > tolerance)[0]}
