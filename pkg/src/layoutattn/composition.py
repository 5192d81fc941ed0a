"""Structured multi-reference composition input.

A composition describes N reference groups, each pairing a visual reference,
a short self-attribute text (identifier plus appearance description), and a
target region on the output canvas. An optional global interaction
instruction covers relations between entities, and the area claimed by no
group is derived as the uncontrolled region, never supplied by the user.

Pixel regions may overlap; conflicts are resolved downstream at token level
by lowest-group-id precedence, which keeps the result independent of the
order groups appear in the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Union

import numpy as np

from .pnm import PnmError, decode_mask, encode_mask, peek_dims

__all__ = [
    "ALIGNMENT",
    "BBox",
    "Bitmap",
    "CompositionError",
    "CompositionSpec",
    "ImageRef",
    "Region",
    "SelfAttributeDescription",
    "ValidationReport",
    "Violation",
    "VtsGroup",
    "derive_uncontrolled",
    "normalize",
    "parse_spec",
    "rasterize",
    "serialize_spec",
    "validate",
]

# Canvas and reference dims are padded up to this multiple so that the 8x
# latent downsample followed by 2x2 patchification is exact.
ALIGNMENT = 16


class CompositionError(ValueError):
    """Document fails parsing or a hard validation check."""


@dataclass(frozen=True)
class BBox:
    """Half-open pixel rectangle: x in [x0, x1), y in [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int


@dataclass(frozen=True, eq=False)
class Bitmap:
    """Row-major boolean pixel mask whose dims match the canvas."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise CompositionError(
                f"bitmap shape {bits.shape} does not match ({self.height}, {self.width})"
            )
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Bitmap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )


Region = Union[BBox, Bitmap]


@dataclass(frozen=True)
class SelfAttributeDescription:
    identifier: str
    description: str = ""


@dataclass(frozen=True)
class ImageRef:
    """Pixel dims of a visual reference, optionally backed by a source file."""

    width: int
    height: int
    path: str | None = None


@dataclass(frozen=True)
class VtsGroup:
    group_id: int
    visual_ref: ImageRef
    sad: SelfAttributeDescription
    region: Region


@dataclass(frozen=True)
class CompositionSpec:
    canvas_width: int
    canvas_height: int
    groups: tuple[VtsGroup, ...]
    cei: str | None = None
    total_steps: int = 20
    first_stage_ratio: float = 0.05
    guidance_scale: float = 2.5
    seed: int = 0


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[Violation, ...]
    warnings: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.errors


def rasterize(region: Region, canvas_width: int, canvas_height: int) -> np.ndarray:
    """Pixel mask of shape (canvas_height, canvas_width) for a region."""
    out = np.zeros((canvas_height, canvas_width), dtype=bool)
    if isinstance(region, BBox):
        out[region.y0 : region.y1, region.x0 : region.x1] = True
    else:
        h = min(region.height, canvas_height)
        w = min(region.width, canvas_width)
        out[:h, :w] = region.bits[:h, :w]
    return out


def derive_uncontrolled(spec: CompositionSpec) -> Bitmap:
    """Complement of the union of all group regions.

    Always derived, never user-supplied; all-false when the group regions
    tile the canvas completely.
    """
    union = np.zeros((spec.canvas_height, spec.canvas_width), dtype=bool)
    for group in spec.groups:
        union |= rasterize(group.region, spec.canvas_width, spec.canvas_height)
    return Bitmap(spec.canvas_width, spec.canvas_height, ~union)


def _check_region(
    region: Region, canvas_w: int, canvas_h: int, path: str, errors: list[Violation]
) -> None:
    if isinstance(region, BBox):
        if region.x0 >= region.x1 or region.y0 >= region.y1:
            errors.append(Violation(path, "empty region (x0 >= x1 or y0 >= y1)"))
        if region.x0 < 0 or region.y0 < 0 or region.x1 > canvas_w or region.y1 > canvas_h:
            errors.append(Violation(path, "region outside canvas"))
    else:
        if (region.width, region.height) != (canvas_w, canvas_h):
            errors.append(Violation(path, "bitmap dims do not equal canvas dims"))
        if not region.bits.any():
            errors.append(Violation(path, "bitmap region has no true pixel"))


def validate(spec: CompositionSpec) -> ValidationReport:
    """Collect every invariant violation; violations are data, not failures.

    Overlapping group regions are legal and reported as warnings only.
    """
    errors: list[Violation] = []
    warnings: list[Violation] = []

    if spec.canvas_width < 1 or spec.canvas_height < 1:
        errors.append(Violation("canvas", "dimensions must be positive"))
    if spec.total_steps < 1:
        errors.append(Violation("steps", "must be at least 1"))
    if not 0.0 <= spec.first_stage_ratio <= 1.0:
        errors.append(Violation("first_stage_ratio", "first_stage_ratio out of [0,1]"))
    if spec.seed < 0:
        errors.append(Violation("seed", "must be non-negative"))
    if not spec.groups:
        errors.append(Violation("groups", "at least one group is required"))

    ids = [g.group_id for g in spec.groups]
    if len(set(ids)) != len(ids):
        errors.append(Violation("groups", "duplicate group_id"))
    elif spec.groups and sorted(ids) != list(range(1, len(ids) + 1)):
        errors.append(Violation("groups", "group_ids must be contiguous from 1"))

    for i, group in enumerate(spec.groups):
        path = f"groups[{i}]"
        if not group.sad.identifier:
            errors.append(Violation(f"{path}.sad.identifier", "must be non-empty"))
        if group.visual_ref.width < 1 or group.visual_ref.height < 1:
            errors.append(Violation(f"{path}.image", "dimensions must be positive"))
        _check_region(
            group.region, spec.canvas_width, spec.canvas_height, f"{path}.region", errors
        )

    if not errors:
        rasters = [
            rasterize(g.region, spec.canvas_width, spec.canvas_height) for g in spec.groups
        ]
        for i in range(len(spec.groups)):
            for j in range(i + 1, len(spec.groups)):
                if (rasters[i] & rasters[j]).any():
                    warnings.append(
                        Violation(
                            f"groups[{i}].region,groups[{j}].region",
                            "regions overlap; precedence by lowest group_id",
                        )
                    )

    return ValidationReport(tuple(errors), tuple(warnings))


def _round_up(value: int, multiple: int = ALIGNMENT) -> int:
    return ((value + multiple - 1) // multiple) * multiple


def normalize(spec: CompositionSpec) -> CompositionSpec:
    """Pad canvas and reference dims up to multiples of 16.

    Bitmap regions grow with the canvas, padded with false; bounding boxes
    are unchanged. Idempotent.
    """
    canvas_w = _round_up(spec.canvas_width)
    canvas_h = _round_up(spec.canvas_height)
    groups = []
    for group in spec.groups:
        ref = group.visual_ref
        ref = replace(ref, width=_round_up(ref.width), height=_round_up(ref.height))
        region = group.region
        if isinstance(region, Bitmap) and (region.width, region.height) != (canvas_w, canvas_h):
            padded = np.zeros((canvas_h, canvas_w), dtype=bool)
            padded[: region.height, : region.width] = region.bits
            region = Bitmap(canvas_w, canvas_h, padded)
        groups.append(replace(group, visual_ref=ref, region=region))
    return replace(
        spec, canvas_width=canvas_w, canvas_height=canvas_h, groups=tuple(groups)
    )


# --- document parsing ------------------------------------------------------


def _require_keys(obj: dict, allowed: set[str], required: set[str], context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise CompositionError(f"{context}: unknown field {sorted(unknown)[0]!r}")
    missing = required - set(obj)
    if missing:
        raise CompositionError(f"{context}: missing required field {sorted(missing)[0]!r}")


def _as_int(value: Any, context: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CompositionError(f"{context}: expected integer, got {value!r}")
    return value


def _image_from_obj(value: Any, base_dir: Path, context: str) -> ImageRef:
    if isinstance(value, str):
        path = base_dir / value
        try:
            w, h = peek_dims(path.read_bytes())
        except FileNotFoundError:
            raise CompositionError(f"{context}: image file not found: {value}") from None
        except PnmError as exc:
            raise CompositionError(f"{context}: {exc}") from None
        return ImageRef(w, h, path=value)
    if isinstance(value, dict):
        _require_keys(value, {"width", "height"}, {"width", "height"}, context)
        return ImageRef(_as_int(value["width"], context), _as_int(value["height"], context))
    raise CompositionError(f"{context}: image must be a path or {{width, height}}")


def _region_from_obj(value: Any, base_dir: Path, context: str) -> Region:
    if not isinstance(value, dict):
        raise CompositionError(f"{context}: region must be an object")
    _require_keys(value, {"bbox", "mask_file"}, set(), context)
    if ("bbox" in value) == ("mask_file" in value):
        raise CompositionError(f"{context}: exactly one of bbox or mask_file is required")
    if "bbox" in value:
        box = value["bbox"]
        if not isinstance(box, list) or len(box) != 4:
            raise CompositionError(f"{context}: bbox must be [x0, y0, x1, y1]")
        x0, y0, x1, y1 = (_as_int(v, context) for v in box)
        return BBox(x0, y0, x1, y1)
    path = base_dir / value["mask_file"]
    try:
        bits = decode_mask(path.read_bytes())
    except FileNotFoundError:
        raise CompositionError(f"{context}: mask file not found: {value['mask_file']}") from None
    except PnmError as exc:
        raise CompositionError(f"{context}: {exc}") from None
    h, w = bits.shape
    return Bitmap(w, h, bits)


def _group_from_obj(value: Any, base_dir: Path, context: str) -> VtsGroup:
    if not isinstance(value, dict):
        raise CompositionError(f"{context}: group must be an object")
    _require_keys(value, {"id", "image", "sad", "region"}, {"id", "image", "sad", "region"}, context)
    sad_obj = value["sad"]
    if not isinstance(sad_obj, dict):
        raise CompositionError(f"{context}.sad: must be an object")
    _require_keys(sad_obj, {"identifier", "description"}, {"identifier"}, f"{context}.sad")
    sad = SelfAttributeDescription(
        str(sad_obj["identifier"]), str(sad_obj.get("description", ""))
    )
    return VtsGroup(
        group_id=_as_int(value["id"], f"{context}.id"),
        visual_ref=_image_from_obj(value["image"], base_dir, f"{context}.image"),
        sad=sad,
        region=_region_from_obj(value["region"], base_dir, f"{context}.region"),
    )


def parse_spec(
    document: str | bytes | dict, *, base_dir: str | Path | None = None
) -> CompositionSpec:
    """Parse a composition document, validate it, and normalize dims.

    `document` is JSON text (or an already-decoded object). Mask and image
    paths resolve relative to `base_dir`. Unknown fields are rejected.
    Raises CompositionError on malformed input or any hard violation.
    """
    base = Path(base_dir) if base_dir is not None else Path(".")
    if isinstance(document, (str, bytes)):
        try:
            obj = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CompositionError(f"malformed document: {exc}") from None
    else:
        obj = document
    if not isinstance(obj, dict):
        raise CompositionError("document root must be an object")

    _require_keys(
        obj,
        {"canvas", "groups", "cei", "steps", "first_stage_ratio", "guidance_scale", "seed"},
        {"canvas", "groups"},
        "document",
    )
    canvas = obj["canvas"]
    if not isinstance(canvas, dict):
        raise CompositionError("canvas: must be an object")
    _require_keys(canvas, {"w", "h"}, {"w", "h"}, "canvas")
    groups_obj = obj["groups"]
    if not isinstance(groups_obj, list):
        raise CompositionError("groups: must be a list")

    groups = tuple(
        _group_from_obj(g, base, f"groups[{i}]") for i, g in enumerate(groups_obj)
    )
    cei = obj.get("cei")
    if cei is not None and not isinstance(cei, str):
        raise CompositionError("cei: must be a string")
    if cei == "":
        cei = None  # empty instruction is represented as absence

    spec = CompositionSpec(
        canvas_width=_as_int(canvas["w"], "canvas.w"),
        canvas_height=_as_int(canvas["h"], "canvas.h"),
        groups=groups,
        cei=cei,
        total_steps=_as_int(obj.get("steps", 20), "steps"),
        first_stage_ratio=float(obj.get("first_stage_ratio", 0.05)),
        guidance_scale=float(obj.get("guidance_scale", 2.5)),
        seed=_as_int(obj.get("seed", 0), "seed"),
    )
    report = validate(spec)
    if not report.ok:
        detail = "; ".join(f"{v.path}: {v.message}" for v in report.errors)
        raise CompositionError(detail)
    return normalize(spec)


def serialize_spec(spec: CompositionSpec, *, mask_dir: str | Path | None = None) -> str:
    """Render a spec back to document JSON.

    Bitmap regions are written as PGM files under `mask_dir` and referenced
    by name, so a document serialized next to its masks re-parses to an
    equal spec.
    """
    groups = []
    for group in spec.groups:
        region = group.region
        if isinstance(region, BBox):
            region_obj: dict = {"bbox": [region.x0, region.y0, region.x1, region.y1]}
        else:
            if mask_dir is None:
                raise CompositionError("mask_dir is required to serialize bitmap regions")
            name = f"region_{group.group_id}.pgm"
            Path(mask_dir, name).write_bytes(encode_mask(region.bits))
            region_obj = {"mask_file": name}
        ref = group.visual_ref
        image_obj: Any = ref.path if ref.path else {"width": ref.width, "height": ref.height}
        groups.append(
            {
                "id": group.group_id,
                "image": image_obj,
                "sad": {
                    "identifier": group.sad.identifier,
                    "description": group.sad.description,
                },
                "region": region_obj,
            }
        )
    obj: dict = {
        "canvas": {"w": spec.canvas_width, "h": spec.canvas_height},
        "groups": groups,
        "steps": spec.total_steps,
        "first_stage_ratio": spec.first_stage_ratio,
        "guidance_scale": spec.guidance_scale,
        "seed": spec.seed,
    }
    if spec.cei is not None:
        obj["cei"] = spec.cei
    return json.dumps(obj, indent=2)
