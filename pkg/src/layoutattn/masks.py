"""Group-isolation and region-modulated attention masks.

The whole mechanism reduces to one boolean rule over (query tag, key tag,
mode). Under group isolation (GIA), a pair is allowed iff the tokens share
an owner, or both are spatial, or either side belongs to the global
instruction. Region modulation (RMA) starts from that and additionally
severs spatial attention across different groups, group-spatial attention
to the uncontrolled region, and every pairing of group-spatial or
uncontrolled tokens with the instruction, so the allowed set under RMA is
always a subset of the allowed set under GIA.

Self-interaction inside the instruction block and inside the uncontrolled
block is allowed in both modes: each is a coherent token block and
forbidding self-attention would create degenerate all-masked rows.

Masks compile to a compressed block form keyed on tag classes, so
non-contiguous canvas ownership costs nothing, plus an optional dense
bit matrix (row = query, column = key) for export.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .layout import (
    CEI,
    UNCONTROLLED,
    Modality,
    SpecialOwner,
    TokenLayout,
    TokenTag,
    layout_digest,
)

__all__ = [
    "AttentionMaskArtifact",
    "MaskFormatError",
    "MaskMode",
    "allow_rule",
    "build_mask",
    "expand_dense",
    "export_blocks",
    "export_mask",
    "import_blocks",
    "import_mask",
]

MAGIC = b"LAMK"
WIRE_VERSION = 1


class MaskFormatError(ValueError):
    """Malformed mask wire data or a digest that does not match its layout."""


class MaskMode(Enum):
    GIA = "gia"
    RMA = "rma"


def allow_rule(q: TokenTag, k: TokenTag, mode: MaskMode) -> bool:
    """Canonical allow rule; symmetric in (q, k) for both modes."""
    allowed = (
        q.owner == k.owner
        or (q.modality is Modality.SPATIAL and k.modality is Modality.SPATIAL)
        or q.owner is CEI
        or k.owner is CEI
    )
    if mode is MaskMode.GIA or not allowed:
        return allowed

    def group_spatial(t: TokenTag) -> bool:
        return t.modality is Modality.SPATIAL and isinstance(t.owner, int)

    severed = (
        # inter-region spatial attention
        (group_spatial(q) and group_spatial(k) and q.owner != k.owner)
        # group spatial <-> uncontrolled
        or (group_spatial(q) and k.owner is UNCONTROLLED)
        or (q.owner is UNCONTROLLED and group_spatial(k))
        # group spatial <-> instruction
        or (group_spatial(q) and k.owner is CEI)
        or (q.owner is CEI and group_spatial(k))
        # uncontrolled <-> instruction
        or (q.owner is UNCONTROLLED and k.owner is CEI)
        or (q.owner is CEI and k.owner is UNCONTROLLED)
    )
    return not severed


@dataclass(frozen=True, eq=False)
class AttentionMaskArtifact:
    """A compiled mask: class table plus token-to-class map, or dense bits.

    Artifacts built from a layout carry the compressed form (distinct tag
    classes, an allow table over class pairs, and per-token class ids);
    artifacts decoded from a dense wire payload carry the bit matrix only.
    """

    mode: MaskMode
    total_len: int
    layout_digest: bytes
    classes: tuple[TokenTag, ...] | None = None
    class_ids: tuple[int, ...] | None = None
    table: np.ndarray | None = None
    dense: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.layout_digest) != 32:
            raise ValueError("layout digest must be 32 bytes")
        if self.table is not None:
            table = np.asarray(self.table, dtype=bool)
            table.setflags(write=False)
            object.__setattr__(self, "table", table)
        if self.dense is not None:
            dense = np.asarray(self.dense, dtype=bool)
            if dense.shape != (self.total_len, self.total_len):
                raise ValueError("dense matrix shape does not match total_len")
            dense.setflags(write=False)
            object.__setattr__(self, "dense", dense)

    @property
    def blocks(self) -> tuple[tuple[TokenTag, TokenTag, bool], ...]:
        """(query class, key class, allow) triples of the compressed form."""
        if self.classes is None or self.table is None:
            raise ValueError("artifact carries no compressed form")
        return tuple(
            (qc, kc, bool(self.table[i, j]))
            for i, qc in enumerate(self.classes)
            for j, kc in enumerate(self.classes)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttentionMaskArtifact):
            return NotImplemented
        if (
            self.mode is not other.mode
            or self.total_len != other.total_len
            or self.layout_digest != other.layout_digest
        ):
            return False
        try:
            return bool(np.array_equal(expand_dense(self), expand_dense(other)))
        except ValueError:
            return True  # header-only artifacts compare by header


def build_mask(layout: TokenLayout, mode: MaskMode) -> AttentionMaskArtifact:
    """Compile the rule over a layout into the compressed block form."""
    tags = layout.per_token_tags
    classes: list[TokenTag] = []
    index: dict[TokenTag, int] = {}
    ids = np.empty(len(tags), dtype=np.int32)
    for i, tag in enumerate(tags):
        j = index.get(tag)
        if j is None:
            j = index[tag] = len(classes)
            classes.append(tag)
        ids[i] = j
    n_classes = len(classes)
    table = np.empty((n_classes, n_classes), dtype=bool)
    for i, qc in enumerate(classes):
        for j, kc in enumerate(classes):
            table[i, j] = allow_rule(qc, kc, mode)
    return AttentionMaskArtifact(
        mode=mode,
        total_len=layout.total_len,
        layout_digest=layout_digest(layout),
        classes=tuple(classes),
        class_ids=tuple(int(v) for v in ids),
        table=table,
    )


def expand_dense(artifact: AttentionMaskArtifact) -> np.ndarray:
    """Dense boolean matrix, rows are queries. Deterministic."""
    if artifact.dense is not None:
        return artifact.dense
    if artifact.table is None or artifact.class_ids is None:
        raise ValueError("artifact carries no rule data to expand")
    ids = np.asarray(artifact.class_ids, dtype=np.int32)
    return artifact.table[ids[:, None], ids[None, :]]


# --- wire formats ----------------------------------------------------------

_HEADER = struct.Struct("<4sIBQ32sB")
_FLAG_DENSE = 0x01


def export_mask(artifact: AttentionMaskArtifact, dense: bool = True) -> bytes:
    """Binary export. Dense rows are bit-packed LSB-first, each row padded
    to a whole byte, query index major."""
    flags = _FLAG_DENSE if dense else 0
    header = _HEADER.pack(
        MAGIC,
        WIRE_VERSION,
        0 if artifact.mode is MaskMode.GIA else 1,
        artifact.total_len,
        artifact.layout_digest,
        flags,
    )
    if not dense:
        return header
    bits = expand_dense(artifact)
    return header + np.packbits(bits, axis=1, bitorder="little").tobytes()


def import_mask(
    data: bytes, layout: TokenLayout | None = None
) -> AttentionMaskArtifact:
    """Decode a binary mask export, verifying the digest when a layout is given."""
    if len(data) < _HEADER.size:
        raise MaskFormatError("truncated payload")
    magic, version, mode_byte, total_len, digest, flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MaskFormatError(f"bad magic {magic!r}")
    if version != WIRE_VERSION:
        raise MaskFormatError(f"unsupported version {version}")
    if mode_byte not in (0, 1):
        raise MaskFormatError(f"bad mode byte {mode_byte}")
    mode = MaskMode.GIA if mode_byte == 0 else MaskMode.RMA
    row_bytes = (total_len + 7) // 8
    expected = _HEADER.size + (total_len * row_bytes if flags & _FLAG_DENSE else 0)
    if len(data) < expected:
        raise MaskFormatError("truncated payload")
    if len(data) > expected:
        raise MaskFormatError("trailing bytes after payload")
    if layout is not None and layout_digest(layout) != digest:
        raise MaskFormatError("layout digest mismatch")
    dense = None
    if flags & _FLAG_DENSE:
        rows = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size).reshape(
            total_len, row_bytes
        )
        dense = np.unpackbits(rows, axis=1, count=total_len, bitorder="little").astype(bool)
    return AttentionMaskArtifact(
        mode=mode, total_len=total_len, layout_digest=digest, dense=dense
    )


def _tag_obj(tag: TokenTag) -> dict:
    owner = tag.owner if isinstance(tag.owner, int) else tag.owner.value
    return {"modality": tag.modality.value, "owner": owner}


def _tag_from_obj(obj: dict) -> TokenTag:
    owner = obj["owner"]
    if not isinstance(owner, int):
        owner = SpecialOwner(owner)
    return TokenTag(owner, Modality(obj["modality"]))


def export_blocks(artifact: AttentionMaskArtifact) -> str:
    """Compressed form as canonical JSON, exported alongside the binary."""
    if artifact.classes is None or artifact.class_ids is None:
        raise ValueError("artifact carries no compressed form")
    obj = {
        "class_ids": list(artifact.class_ids),
        "classes": [_tag_obj(c) for c in artifact.classes],
        "layout_digest": artifact.layout_digest.hex(),
        "mode": artifact.mode.value,
        "table": ["".join("1" if v else "0" for v in row) for row in artifact.table],
        "total_len": artifact.total_len,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def import_blocks(text: str | bytes) -> AttentionMaskArtifact:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MaskFormatError(f"malformed blocks file: {exc}") from None
    try:
        classes = tuple(_tag_from_obj(c) for c in obj["classes"])
        table = np.array(
            [[c == "1" for c in row] for row in obj["table"]], dtype=bool
        ).reshape(len(classes), len(classes))
        return AttentionMaskArtifact(
            mode=MaskMode(obj["mode"]),
            total_len=obj["total_len"],
            layout_digest=bytes.fromhex(obj["layout_digest"]),
            classes=classes,
            class_ids=tuple(obj["class_ids"]),
            table=table,
        )
    except MaskFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MaskFormatError(f"bad blocks file: {exc}") from None
