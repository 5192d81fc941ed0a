"""From composition to unified token sequence.

Every conditioning token and every canvas token lives on one sequence:
group texts first, then the global instruction, then the visual reference
blocks, then canvas tokens in raster order. Mask rules never look at
positions, only at the per-token (owner, modality) tags recorded here.
"""

from layoutattn import export_layout, import_layout, layout_digest, pack, parse_spec

spec = parse_spec({
    "canvas": {"w": 64, "h": 64},
    "groups": [
        {"id": 1, "image": {"width": 32, "height": 32},
         "sad": {"identifier": "a teapot"}, "region": {"bbox": [0, 0, 32, 32]}},
        {"id": 2, "image": {"width": 16, "height": 16},
         "sad": {"identifier": "a cactus"}, "region": {"bbox": [32, 32, 64, 64]}},
    ],
    "cei": "the cactus grows out of the teapot",
})

layout = pack(spec, sad_tokens=8, cei_tokens=8)
print(f"total tokens: {layout.total_len}")
print(f"{'start':>6} {'len':>4}  owner          modality")
for span in layout.spans:
    if span.is_canvas:
        print(f"{span.start:>6} {span.length:>4}  canvas block   spatial (per-token owners below)")
    else:
        owner = span.tag.owner if isinstance(span.tag.owner, int) else span.tag.owner.value
        print(f"{span.start:>6} {span.length:>4}  {str(owner):<14} {span.tag.modality.value}")

# A 32x32 reference contributes (32/8 * 32/8) / 4 = 4 tokens, a 16x16 one.
print("\ncanvas token owners (4x4 grid of 16px footprints):")
for row in layout.canvas_grid:
    print("  " + " ".join(
        str(t.owner) if isinstance(t.owner, int) else "." for t in row
    ))

# The export is canonical: equal layouts serialize to identical bytes,
# and the digest of those bytes pairs mask files with their layout.
text = export_layout(layout)
assert import_layout(text) == layout
print(f"\nexport size: {len(text)} bytes, digest {layout_digest(layout).hex()[:16]}...")
