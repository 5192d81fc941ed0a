"""Unified token sequence for a composition.

All conditioning tokens and the canvas tokens are laid out along one
sequence with recorded spans, so attention rules can be stated purely over
per-token tags. Sequence order is fixed (group texts, then the global
instruction, then visual references, then canvas tokens in raster order) but
carries no semantics: every mask rule keys on tags, never on positions.

Token counts follow the latent geometry: pixels are downsampled 8x into the
latent grid and 2x2 latent cells form one token, so one token covers a 16x16
pixel footprint and a reference of w*h pixels yields w*h/256 tokens.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .composition import ALIGNMENT, CompositionSpec, rasterize

__all__ = [
    "LayoutFormatError",
    "Modality",
    "SpecialOwner",
    "TokenLayout",
    "TokenSpan",
    "TokenTag",
    "assign_canvas_tokens",
    "export_layout",
    "import_layout",
    "latent_token_count",
    "layout_digest",
    "pack",
]


class LayoutFormatError(ValueError):
    """Malformed layout export file."""


class Modality(Enum):
    VISUAL = "visual"
    TEXTUAL = "textual"
    SPATIAL = "spatial"


class SpecialOwner(Enum):
    CEI = "cei"
    UNCONTROLLED = "uncontrolled"


CEI = SpecialOwner.CEI
UNCONTROLLED = SpecialOwner.UNCONTROLLED


@dataclass(frozen=True)
class TokenTag:
    """Owner (group id, global instruction, or uncontrolled) and modality."""

    owner: int | SpecialOwner
    modality: Modality

    def __post_init__(self) -> None:
        if isinstance(self.owner, int):
            if self.owner < 1:
                raise ValueError(f"group owner must be >= 1, got {self.owner}")
        elif self.owner is CEI and self.modality is not Modality.TEXTUAL:
            raise ValueError("instruction tokens are textual")
        elif self.owner is UNCONTROLLED and self.modality is not Modality.SPATIAL:
            raise ValueError("uncontrolled tokens are spatial")

    @classmethod
    def group(cls, group_id: int, modality: Modality) -> "TokenTag":
        return cls(group_id, modality)

    @classmethod
    def cei(cls) -> "TokenTag":
        return cls(CEI, Modality.TEXTUAL)

    @classmethod
    def uncontrolled(cls) -> "TokenTag":
        return cls(UNCONTROLLED, Modality.SPATIAL)


@dataclass(frozen=True)
class TokenSpan:
    """Contiguous run of tokens; tag is None for the canvas block, whose
    per-token tags live in the layout's canvas grid."""

    start: int
    length: int
    tag: TokenTag | None

    @property
    def is_canvas(self) -> bool:
        return self.tag is None


@dataclass(frozen=True)
class TokenLayout:
    total_len: int
    spans: tuple[TokenSpan, ...]
    canvas_grid: tuple[tuple[TokenTag, ...], ...]

    def __post_init__(self) -> None:
        pos = 0
        canvas_spans = 0
        for span in self.spans:
            if span.start != pos or span.length < 1:
                raise ValueError("spans must be disjoint, sorted, and cover the range")
            pos += span.length
            if span.is_canvas:
                canvas_spans += 1
        if pos != self.total_len:
            raise ValueError(f"spans cover {pos} tokens, total_len is {self.total_len}")
        grid_tokens = sum(len(row) for row in self.canvas_grid)
        if canvas_spans > 1:
            raise ValueError("at most one canvas span is allowed")
        canvas_len = sum(s.length for s in self.spans if s.is_canvas)
        if canvas_len != grid_tokens:
            raise ValueError("canvas span length does not match grid size")
        widths = {len(row) for row in self.canvas_grid}
        if len(widths) > 1:
            raise ValueError("canvas grid rows must have equal width")
        for row in self.canvas_grid:
            for tag in row:
                if tag.modality is not Modality.SPATIAL or tag.owner is CEI:
                    raise ValueError("canvas tokens must be spatial, group- or uncontrolled-owned")

    @cached_property
    def per_token_tags(self) -> tuple[TokenTag, ...]:
        """Flattening of the spans, with the canvas grid in raster order."""
        tags: list[TokenTag] = []
        for span in self.spans:
            if span.is_canvas:
                for row in self.canvas_grid:
                    tags.extend(row)
            else:
                tags.extend([span.tag] * span.length)
        return tuple(tags)

    def tag_at(self, index: int) -> TokenTag:
        return self.per_token_tags[index]


def latent_token_count(pixel_w: int, pixel_h: int) -> int:
    """Tokens for a visual reference of the given pixel dims.

    (pixel/8 latent cells per side, 2x2 cells per token.)
    """
    if pixel_w % ALIGNMENT or pixel_h % ALIGNMENT:
        raise ValueError(f"pixel dims must be multiples of {ALIGNMENT}, got {pixel_w}x{pixel_h}")
    return (pixel_w // 8) * (pixel_h // 8) // 4


def assign_canvas_tokens(spec: CompositionSpec) -> tuple[tuple[TokenTag, ...], ...]:
    """Owner grid of shape (canvas_h/16, canvas_w/16).

    Each token goes to the group whose region covers the largest share of
    its 16x16 pixel footprint; ties go to the lowest group id, tokens with
    zero coverage to the uncontrolled owner.
    """
    if spec.canvas_width % ALIGNMENT or spec.canvas_height % ALIGNMENT:
        raise ValueError("spec must be normalized before canvas assignment")
    h_tok = spec.canvas_height // ALIGNMENT
    w_tok = spec.canvas_width // ALIGNMENT
    # coverage[g, r, c]: pixels of group g inside token (r, c)'s footprint
    coverage = np.zeros((len(spec.groups), h_tok, w_tok), dtype=np.int64)
    for g, group in enumerate(spec.groups):
        pixels = rasterize(group.region, spec.canvas_width, spec.canvas_height)
        coverage[g] = (
            pixels.reshape(h_tok, ALIGNMENT, w_tok, ALIGNMENT).sum(axis=(1, 3))
        )
    # argmax returns the first (lowest-id) maximum, which is the tie-break
    winner = coverage.argmax(axis=0)
    covered = coverage.max(axis=0) > 0
    uncontrolled = TokenTag.uncontrolled()
    grid = []
    for r in range(h_tok):
        row = []
        for c in range(w_tok):
            if covered[r, c]:
                row.append(TokenTag.group(spec.groups[winner[r, c]].group_id, Modality.SPATIAL))
            else:
                row.append(uncontrolled)
        grid.append(tuple(row))
    return tuple(grid)


def pack(spec: CompositionSpec, *, sad_tokens: int = 32, cei_tokens: int = 32) -> TokenLayout:
    """Lay out a normalized spec as one token sequence.

    Text lengths are a fixed per-item count (the mask rules are length
    agnostic, so the default of 32 is a stand-in for whatever a text encoder
    would produce). Deterministic for equal inputs.
    """
    if sad_tokens < 1 or cei_tokens < 1:
        raise ValueError("text token counts must be >= 1")
    spans: list[TokenSpan] = []
    pos = 0

    def push(length: int, tag: TokenTag | None) -> None:
        nonlocal pos
        spans.append(TokenSpan(pos, length, tag))
        pos += length

    for group in spec.groups:
        push(sad_tokens, TokenTag.group(group.group_id, Modality.TEXTUAL))
    if spec.cei is not None:
        push(cei_tokens, TokenTag.cei())
    for group in spec.groups:
        count = latent_token_count(group.visual_ref.width, group.visual_ref.height)
        push(count, TokenTag.group(group.group_id, Modality.VISUAL))
    grid = assign_canvas_tokens(spec)
    push(sum(len(row) for row in grid), None)
    return TokenLayout(total_len=pos, spans=tuple(spans), canvas_grid=grid)


# --- export format ---------------------------------------------------------

_MODALITY_CODES = {m.value: m for m in Modality}


def _owner_code(owner: int | SpecialOwner) -> int | str:
    if isinstance(owner, int):
        return owner
    return "cei" if owner is CEI else "u"


def _owner_from_code(code: object, context: str) -> int | SpecialOwner:
    if isinstance(code, bool):
        raise LayoutFormatError(f"{context}: bad owner {code!r}")
    if isinstance(code, int):
        return code
    if code == "cei":
        return CEI
    if code == "u":
        return UNCONTROLLED
    raise LayoutFormatError(f"{context}: bad owner {code!r}")


def _grid_rle(grid: tuple[tuple[TokenTag, ...], ...]) -> str:
    runs: list[str] = []
    prev: str | None = None
    count = 0
    for row in grid:
        for tag in row:
            code = str(_owner_code(tag.owner))
            if code == prev:
                count += 1
            else:
                if prev is not None:
                    runs.append(f"{prev}:{count}")
                prev, count = code, 1
    if prev is not None:
        runs.append(f"{prev}:{count}")
    return ",".join(runs)


def _grid_from_rle(rle: str, w_tok: int, h_tok: int) -> tuple[tuple[TokenTag, ...], ...]:
    owners: list[int | SpecialOwner] = []
    if rle:
        for item in rle.split(","):
            code, _, count = item.partition(":")
            if not count.isdigit():
                raise LayoutFormatError(f"bad rle item {item!r}")
            owner = _owner_from_code(int(code) if code.isdigit() else code, "canvas rle")
            owners.extend([owner] * int(count))
    if len(owners) != w_tok * h_tok:
        raise LayoutFormatError(
            f"rle decodes to {len(owners)} tokens, grid is {w_tok}x{h_tok}"
        )
    tags = [TokenTag(owner, Modality.SPATIAL) for owner in owners]
    return tuple(
        tuple(tags[r * w_tok : (r + 1) * w_tok]) for r in range(h_tok)
    )


def export_layout(layout: TokenLayout) -> str:
    """Canonical single-line JSON; equal layouts export byte-identically."""
    spans = []
    for span in layout.spans:
        if span.is_canvas:
            spans.append({"canvas": True, "length": span.length, "start": span.start})
        else:
            spans.append(
                {
                    "length": span.length,
                    "modality": span.tag.modality.value,
                    "owner": _owner_code(span.tag.owner),
                    "start": span.start,
                }
            )
    obj = {
        "canvas_grid": {
            "h": len(layout.canvas_grid),
            "rle": _grid_rle(layout.canvas_grid),
            "w": len(layout.canvas_grid[0]) if layout.canvas_grid else 0,
        },
        "spans": spans,
        "total_len": layout.total_len,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def import_layout(text: str | bytes) -> TokenLayout:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutFormatError(f"malformed layout file: {exc}") from None
    try:
        total_len = obj["total_len"]
        grid_obj = obj["canvas_grid"]
        grid = _grid_from_rle(grid_obj["rle"], grid_obj["w"], grid_obj["h"])
        spans = []
        for item in obj["spans"]:
            if item.get("canvas"):
                spans.append(TokenSpan(item["start"], item["length"], None))
            else:
                tag = TokenTag(
                    _owner_from_code(item["owner"], "span"),
                    _MODALITY_CODES[item["modality"]],
                )
                spans.append(TokenSpan(item["start"], item["length"], tag))
        return TokenLayout(total_len=total_len, spans=tuple(spans), canvas_grid=grid)
    except LayoutFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutFormatError(f"bad layout file: {exc}") from None


def layout_digest(layout: TokenLayout) -> bytes:
    """SHA-256 of the canonical export; pairs mask files with their layout."""
    return hashlib.sha256(export_layout(layout).encode("utf-8")).digest()
