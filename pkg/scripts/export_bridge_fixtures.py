"""Regenerate the shared fixtures consumed by the frontend bridge tests.

Everything here is a pure function of fixed inputs, so rerunning the script
reproduces the committed files byte for byte:

    python3 scripts/export_bridge_fixtures.py [--out frontend/fixtures]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from layoutattn.composition import (
    BBox,
    CompositionSpec,
    ImageRef,
    SelfAttributeDescription,
    VtsGroup,
    normalize,
)
from layoutattn.layout import (
    Modality,
    TokenLayout,
    TokenSpan,
    TokenTag,
    export_layout,
    pack,
)
from layoutattn.masks import MaskMode, build_mask, expand_dense, export_mask
from layoutattn.schedule import build_schedule, export_schedule
from layoutattn.simulator import embed, masked_attention, projections

SEED = 11
DIM = 8


def eight_tag_layout() -> TokenLayout:
    """One token per tag class: [T1, T2, V1, V2, S1, S2, U, C]."""
    s1 = TokenTag.group(1, Modality.SPATIAL)
    s2 = TokenTag.group(2, Modality.SPATIAL)
    return TokenLayout(
        total_len=8,
        spans=(
            TokenSpan(0, 1, TokenTag.group(1, Modality.TEXTUAL)),
            TokenSpan(1, 1, TokenTag.group(2, Modality.TEXTUAL)),
            TokenSpan(2, 1, TokenTag.group(1, Modality.VISUAL)),
            TokenSpan(3, 1, TokenTag.group(2, Modality.VISUAL)),
            TokenSpan(4, 3, None),
            TokenSpan(7, 1, TokenTag.cei()),
        ),
        canvas_grid=((s1, s2, TokenTag.uncontrolled()),),
    )


def composition_layout() -> TokenLayout:
    spec = normalize(
        CompositionSpec(
            canvas_width=64,
            canvas_height=64,
            groups=(
                VtsGroup(1, ImageRef(16, 16), SelfAttributeDescription("a bear"), BBox(0, 0, 40, 64)),
                VtsGroup(2, ImageRef(16, 16), SelfAttributeDescription("a maple leaf"), BBox(40, 0, 64, 48)),
            ),
            cei="the bear holds the leaf",
            seed=SEED,
        )
    )
    return pack(spec, sad_tokens=3, cei_tokens=3)


def bit_rows(dense) -> list[str]:
    return ["".join("1" if v else "0" for v in row) for row in dense]


def write_fixtures(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    expected: dict = {"masks": {}}

    for name, layout in (("eight_tag", eight_tag_layout()), ("comp", composition_layout())):
        (out_dir / f"{name}_layout.json").write_text(export_layout(layout))
        for mode in MaskMode:
            artifact = build_mask(layout, mode)
            (out_dir / f"{name}_{mode.value}.lamk").write_bytes(
                export_mask(artifact, dense=True)
            )
            expected["masks"][f"{name}_{mode.value}"] = bit_rows(expand_dense(artifact))

    (out_dir / "comp_schedule.txt").write_text(export_schedule(build_schedule(20, 0.05)))

    layout = composition_layout()
    x = embed(layout, SEED, DIM)
    wq, wk, wv = projections(SEED, 0, DIM)
    case = {
        "dim": DIM,
        "totalLen": layout.total_len,
        "x": x.tolist(),
        "wq": wq.tolist(),
        "wk": wk.tolist(),
        "wv": wv.tolist(),
        "outputs": {
            mode.value: masked_attention(x, build_mask(layout, mode), SEED).tolist()
            for mode in MaskMode
        },
    }
    (out_dir / "attention_case.json").write_text(
        json.dumps(case, sort_keys=True, separators=(",", ":"))
    )
    (out_dir / "expected.json").write_text(
        json.dumps(expected, sort_keys=True, separators=(",", ":"))
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument(
        "--out", default=str(Path(__file__).resolve().parent.parent / "frontend" / "fixtures")
    )
    args = parser.parse_args()
    write_fixtures(Path(args.out))
    print(f"fixtures written to {args.out}")
