"""The two attention masks, side by side.

Group isolation (GIA) keeps attention within each group, with three
carve-outs: spatial tokens all see each other, the global instruction sees
everything, and the uncontrolled area behaves like a spatial token. Region
modulation (RMA) then severs cross-region spatial attention and everything
that ties group regions or the uncontrolled area to the instruction, which
is what pins entities inside their boxes early in denoising.
"""

from layoutattn import (
    MaskMode,
    build_mask,
    expand_dense,
    export_mask,
    import_mask,
    pack,
    parse_spec,
)

spec = parse_spec({
    "canvas": {"w": 64, "h": 64},
    "groups": [
        {"id": 1, "image": {"width": 16, "height": 16},
         "sad": {"identifier": "an eagle"}, "region": {"bbox": [0, 0, 32, 64]}},
        {"id": 2, "image": {"width": 16, "height": 16},
         "sad": {"identifier": "a shark"}, "region": {"bbox": [32, 0, 56, 64]}},
    ],
    "cei": "the eagle carries the shark",
})

# Tiny text blocks keep the matrices small enough to eyeball.
layout = pack(spec, sad_tokens=2, cei_tokens=2)
labels = []
for tag in layout.per_token_tags:
    owner = str(tag.owner) if isinstance(tag.owner, int) else tag.owner.value[0]
    labels.append(f"{owner}{tag.modality.value[0]}")  # e.g. 1t, 2v, us, ct

gia = expand_dense(build_mask(layout, MaskMode.GIA))
rma = expand_dense(build_mask(layout, MaskMode.RMA))

for name, dense in (("GIA", gia), ("RMA", rma)):
    print(f"{name} mask ({dense.shape[0]} tokens, # = allowed):")
    print("     " + " ".join(f"{l:>2}" for l in labels))
    for label, row in zip(labels, dense):
        print(f"  {label:>2} " + " ".join(" #" if v else " ." for v in row))
    print()

diff = int(gia.sum() - rma.sum())
print(f"RMA clears {diff} of {int(gia.sum())} allowed pairs; never adds any:",
      bool((rma <= gia).all()))

# Bit-exact binary round trip, digest-checked against the layout.
data = export_mask(build_mask(layout, MaskMode.GIA), dense=True)
assert import_mask(data, layout) == build_mask(layout, MaskMode.GIA)
print(f"wire round trip ok ({len(data)} bytes)")
