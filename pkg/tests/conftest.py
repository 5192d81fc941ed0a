import numpy as np
import pytest

from layoutattn.composition import (
    BBox,
    Bitmap,
    CompositionSpec,
    ImageRef,
    SelfAttributeDescription,
    VtsGroup,
    normalize,
)


def random_bbox(rng: np.random.Generator, canvas_w: int, canvas_h: int) -> BBox:
    x0 = int(rng.integers(0, canvas_w))
    x1 = int(rng.integers(x0 + 1, canvas_w + 1))
    y0 = int(rng.integers(0, canvas_h))
    y1 = int(rng.integers(y0 + 1, canvas_h + 1))
    return BBox(x0, y0, x1, y1)


def random_bitmap(rng: np.random.Generator, canvas_w: int, canvas_h: int) -> Bitmap:
    bits = rng.random((canvas_h, canvas_w)) < 0.3
    if not bits.any():
        bits[int(rng.integers(0, canvas_h)), int(rng.integers(0, canvas_w))] = True
    return Bitmap(canvas_w, canvas_h, bits)


def random_composition(
    rng: np.random.Generator,
    n_groups: int | None = None,
    cei: bool | None = None,
    allow_bitmaps: bool = True,
) -> CompositionSpec:
    """A valid, normalized composition with random regions and dims."""
    n = int(rng.integers(1, 6)) if n_groups is None else n_groups
    canvas_w = 16 * int(rng.integers(2, 6))
    canvas_h = 16 * int(rng.integers(2, 6))
    groups = []
    for gid in range(1, n + 1):
        if allow_bitmaps and rng.random() < 0.4:
            region = random_bitmap(rng, canvas_w, canvas_h)
        else:
            region = random_bbox(rng, canvas_w, canvas_h)
        side_w = 16 * int(rng.integers(1, 3))
        side_h = 16 * int(rng.integers(1, 3))
        groups.append(
            VtsGroup(
                group_id=gid,
                visual_ref=ImageRef(side_w, side_h),
                sad=SelfAttributeDescription(f"entity {gid}", "keep the same appearance"),
                region=region,
            )
        )
    with_cei = bool(rng.random() < 0.5) if cei is None else cei
    spec = CompositionSpec(
        canvas_width=canvas_w,
        canvas_height=canvas_h,
        groups=tuple(groups),
        cei="entities interact" if with_cei else None,
        seed=int(rng.integers(0, 2**31)),
    )
    return normalize(spec)


@pytest.fixture
def two_group_spec() -> CompositionSpec:
    """64x64 canvas split left/right between two groups, with instruction."""
    return normalize(
        CompositionSpec(
            canvas_width=64,
            canvas_height=64,
            groups=(
                VtsGroup(1, ImageRef(16, 16), SelfAttributeDescription("a dragon"), BBox(0, 0, 32, 64)),
                VtsGroup(2, ImageRef(16, 16), SelfAttributeDescription("a car"), BBox(32, 0, 64, 64)),
            ),
            cei="A rides B",
            seed=7,
        )
    )
