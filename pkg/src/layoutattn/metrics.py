"""Layout and consistency metrics.

Inclusion ratio and fill ratio score how a generated entity mask relates to
its target region (intersection normalized by the generated area and by the
target area respectively, times 100). Samples whose target covers more than
75% of the image are discarded so near-full-canvas targets cannot inflate
the scores; the threshold is strict, exactly 75% is kept.

Background similarity is the fixed blend
    100 * (0.4*dino + 0.25*clip + 0.2*ssim + 0.15*ch)
where the DINO and CLIP components are ingested (scalars or embedding pairs
reduced by cosine similarity) and SSIM / color-histogram similarity can be
computed here. When entity masks are available the SSIM and histogram
components are evaluated over background pixels only: histogram over the
complement of the target masks, SSIM over windows that lie fully inside it.

Ratios over an empty denominator are undefined and reported as None, never
coerced to 0 or 100.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .pnm import decode_mask, decode_ppm

__all__ = [
    "AreaFilter",
    "SimilarityInputs",
    "area_filter",
    "avg_report",
    "bg_similarity",
    "color_hist_sim",
    "cosine_similarity",
    "evaluate_manifest",
    "evaluate_sample",
    "fill_ratio",
    "in_ratio",
    "resolve_similarity",
    "ssim",
]

AREA_DISCARD_NUM = 3  # discard when target area > 3/4 of the image,
AREA_DISCARD_DEN = 4  # compared in exact integer arithmetic

BG_WEIGHTS = {"dino": 0.4, "clip": 0.25, "ssim": 0.2, "ch": 0.15}


class AreaFilter(Enum):
    KEEP = "keep"
    DISCARD = "discard"


def _as_mask(m: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    return arr.astype(bool)


def _check_same_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def in_ratio(m_gen: np.ndarray, m_trg: np.ndarray) -> float | None:
    """Share of the generated mask inside the target, in [0, 100].

    None when the generated mask is empty.
    """
    m_gen = _as_mask(m_gen, "m_gen")
    m_trg = _as_mask(m_trg, "m_trg")
    _check_same_dims(m_gen, m_trg)
    gen_area = int(m_gen.sum())
    if gen_area == 0:
        return None
    return 100.0 * int((m_gen & m_trg).sum()) / gen_area


def fill_ratio(m_gen: np.ndarray, m_trg: np.ndarray) -> float | None:
    """Share of the target covered by the generated mask, in [0, 100].

    None when the target mask is empty.
    """
    m_gen = _as_mask(m_gen, "m_gen")
    m_trg = _as_mask(m_trg, "m_trg")
    _check_same_dims(m_gen, m_trg)
    trg_area = int(m_trg.sum())
    if trg_area == 0:
        return None
    return 100.0 * int((m_gen & m_trg).sum()) / trg_area


def area_filter(m_trg: np.ndarray) -> AreaFilter:
    """Discard iff the target covers strictly more than 75% of the image."""
    m_trg = _as_mask(m_trg, "m_trg")
    area = int(m_trg.sum())
    total = m_trg.size
    if area * AREA_DISCARD_DEN > total * AREA_DISCARD_NUM:
        return AreaFilter.DISCARD
    return AreaFilter.KEEP


def _to_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ np.array([0.299, 0.587, 0.114])  # BT.601 luma
    if img.ndim == 2:
        return img
    raise ValueError(f"expected (h, w) or (h, w, 3) image, got shape {img.shape}")


def _box_sums(x: np.ndarray, w: int) -> np.ndarray:
    """Sum over every w*w window (stride 1) via an integral image."""
    c = np.cumsum(np.cumsum(x, axis=0, dtype=np.float64), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    *,
    window: int = 8,
    k1: float = 0.01,
    k2: float = 0.03,
    dynamic_range: float = 255.0,
    valid: np.ndarray | None = None,
) -> float:
    """Mean local SSIM over stride-1 square windows; RGB goes through luma.

    `valid` restricts the mean to windows whose pixels all fall inside the
    given pixel mask. Population (biased) moments. The raw index lives in
    [-1, 1]; the result is clamped into [0, 1] to match the similarity
    blend it feeds (identical inputs still give exactly 1).
    """
    ga = _to_gray(a)
    gb = _to_gray(b)
    _check_same_dims(ga, gb)
    if min(ga.shape) < window:
        raise ValueError(f"image smaller than the {window}x{window} SSIM window")
    n = window * window
    mu_a = _box_sums(ga, window) / n
    mu_b = _box_sums(gb, window) / n
    var_a = _box_sums(ga * ga, window) / n - mu_a * mu_a
    var_b = _box_sums(gb * gb, window) / n - mu_b * mu_b
    cov = _box_sums(ga * gb, window) / n - mu_a * mu_b
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    if valid is None:
        return min(1.0, max(0.0, float(ssim_map.mean())))
    valid = _as_mask(valid, "valid")
    _check_same_dims(ga, valid)
    full = _box_sums(valid.astype(np.float64), window) == n
    if not full.any():
        raise ValueError("no SSIM window lies fully inside the valid region")
    return min(1.0, max(0.0, float(ssim_map[full].mean())))


def color_hist_sim(
    a: np.ndarray, b: np.ndarray, *, bins: int = 32, region: np.ndarray | None = None
) -> float:
    """Mean per-channel histogram intersection of two RGB images.

    `region` restricts the histograms to the given pixels.
    """
    ia = np.asarray(a)
    ib = np.asarray(b)
    if ia.ndim != 3 or ia.shape[2] != 3:
        raise ValueError("color_hist_sim expects (h, w, 3) images")
    _check_same_dims(ia, ib)
    if region is not None:
        region = _as_mask(region, "region")
        if region.shape != ia.shape[:2]:
            raise ValueError("region dims must match the images")
        if not region.any():
            raise ValueError("region selects no pixels")
        ia = ia[region]
        ib = ib[region]
    else:
        ia = ia.reshape(-1, 3)
        ib = ib.reshape(-1, 3)
    total = 0.0
    for ch in range(3):
        ha, _ = np.histogram(ia[:, ch], bins=bins, range=(0, 256))
        hb, _ = np.histogram(ib[:, ch], bins=bins, range=(0, 256))
        # both histograms count the same pixels, so normalize the integer
        # intersection once; identical images give exactly 1.0
        total += int(np.minimum(ha, hb).sum()) / int(ha.sum())
    return total / 3.0


@dataclass(frozen=True)
class SimilarityInputs:
    dino: float
    clip: float
    ssim: float
    ch: float

    def __post_init__(self) -> None:
        for name in ("dino", "clip", "ssim", "ch"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} component out of [0,1]: {v}")


def bg_similarity(components: SimilarityInputs) -> float:
    """Weighted background-similarity blend on the 0..100 scale."""
    return 100.0 * (
        BG_WEIGHTS["dino"] * components.dino
        + BG_WEIGHTS["clip"] * components.clip
        + BG_WEIGHTS["ssim"] * components.ssim
        + BG_WEIGHTS["ch"] * components.ch
    )


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity clamped to [0, 1]; negatives floor at 0 so the
    result can feed the background blend directly."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    if u.size == 0:
        raise ValueError("empty vectors")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("zero vector has no direction")
    return min(1.0, max(0.0, float(u @ v) / (nu * nv)))


def avg_report(dpg: float, id_s: float, ip_s: float, bg_s: float, aes: float) -> float:
    """Unweighted mean of the five 0..100 quality scores."""
    return (dpg + id_s + ip_s + bg_s + aes) / 5.0


# --- batch evaluation ------------------------------------------------------

_SIDECAR_KEYS = {
    "dino",
    "dino_embed_a",
    "dino_embed_b",
    "clip",
    "clip_embed_a",
    "clip_embed_b",
    "ssim",
    "ch",
    "ref_image",
    "dpg",
    "id_s",
    "ip_s",
    "aes",
}


def _embed_or_scalar(sidecar: dict, name: str) -> float | None:
    if name in sidecar:
        return float(sidecar[name])
    a_key, b_key = f"{name}_embed_a", f"{name}_embed_b"
    if a_key in sidecar or b_key in sidecar:
        if a_key not in sidecar or b_key not in sidecar:
            raise ValueError(f"sidecar needs both {a_key} and {b_key}")
        return cosine_similarity(np.array(sidecar[a_key]), np.array(sidecar[b_key]))
    return None


def resolve_similarity(
    sidecar: dict,
    *,
    image: np.ndarray | None = None,
    background: np.ndarray | None = None,
    base_dir: str | Path = ".",
) -> SimilarityInputs | None:
    """Assemble the four blend components from a sidecar object.

    DINO and CLIP come from the sidecar (scalar or embedding pair). SSIM and
    histogram similarity may be given as scalars, or are computed between
    `image` and the sidecar's `ref_image` over the background region.
    Returns None when no component is present at all.
    """
    unknown = set(sidecar) - _SIDECAR_KEYS
    if unknown:
        raise ValueError(f"sidecar: unknown field {sorted(unknown)[0]!r}")
    if not sidecar:
        return None
    dino = _embed_or_scalar(sidecar, "dino")
    clip = _embed_or_scalar(sidecar, "clip")
    ssim_v = float(sidecar["ssim"]) if "ssim" in sidecar else None
    ch_v = float(sidecar["ch"]) if "ch" in sidecar else None
    if (ssim_v is None or ch_v is None) and "ref_image" in sidecar:
        if image is None:
            raise ValueError("sidecar references an image but no sample image was given")
        ref = decode_ppm(Path(base_dir, sidecar["ref_image"]).read_bytes())
        if ssim_v is None:
            ssim_v = ssim(image, ref, valid=background)
        if ch_v is None:
            ch_v = color_hist_sim(image, ref, region=background)
    if None in (dino, clip, ssim_v, ch_v):
        missing = [
            n
            for n, v in zip(("dino", "clip", "ssim", "ch"), (dino, clip, ssim_v, ch_v))
            if v is None
        ]
        raise ValueError(f"sidecar is missing the {missing[0]} component")
    return SimilarityInputs(dino, clip, ssim_v, ch_v)


def evaluate_sample(
    m_gen: np.ndarray,
    m_trg: np.ndarray,
    *,
    image: np.ndarray | None = None,
    sidecar: dict | None = None,
    base_dir: str | Path = ".",
) -> dict:
    """Metric row for one sample; values are None where undefined."""
    row: dict = {
        "in_r": in_ratio(m_gen, m_trg),
        "fi_r": fill_ratio(m_gen, m_trg),
        "filter": area_filter(m_trg).value,
        "bg_s": None,
        "avg": None,
    }
    if sidecar:
        background = ~_as_mask(m_trg, "m_trg")
        components = resolve_similarity(
            sidecar, image=image, background=background, base_dir=base_dir
        )
        if components is not None:
            row["bg_s"] = bg_similarity(components)
            extra = [sidecar.get(k) for k in ("dpg", "id_s", "ip_s", "aes")]
            if all(v is not None for v in extra):
                dpg, id_s, ip_s, aes = (float(v) for v in extra)
                row["avg"] = avg_report(dpg, id_s, ip_s, row["bg_s"], aes)
    return row


def _mean_defined(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def evaluate_manifest(manifest_path: str | Path) -> dict:
    """Run the whole batch listed in a manifest file.

    Each non-empty line names, whitespace separated: the sample image (PPM,
    or `-` when absent), the target mask (PGM), the generated mask (PGM),
    and the sidecar JSON (`-` when absent). Rows appear in manifest order;
    the aggregate means cover kept samples with defined values.
    """
    manifest_path = Path(manifest_path)
    base_dir = manifest_path.parent
    samples = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ValueError(
                f"{manifest_path.name}:{lineno}: expected 4 fields, got {len(fields)}"
            )
        image_f, trg_f, gen_f, sidecar_f = fields
        image = (
            decode_ppm((base_dir / image_f).read_bytes()) if image_f != "-" else None
        )
        m_trg = decode_mask((base_dir / trg_f).read_bytes())
        m_gen = decode_mask((base_dir / gen_f).read_bytes())
        sidecar = (
            json.loads((base_dir / sidecar_f).read_text()) if sidecar_f != "-" else None
        )
        row = evaluate_sample(
            m_gen, m_trg, image=image, sidecar=sidecar, base_dir=base_dir
        )
        row["line"] = lineno
        row["image"] = image_f
        samples.append(row)
    kept = [s for s in samples if s["filter"] == AreaFilter.KEEP.value]
    aggregate = {
        "samples": len(samples),
        "kept": len(kept),
        "discarded": len(samples) - len(kept),
        "in_r": _mean_defined([s["in_r"] for s in kept]),
        "fi_r": _mean_defined([s["fi_r"] for s in kept]),
        "bg_s": _mean_defined([s["bg_s"] for s in kept]),
        "avg": _mean_defined([s["avg"] for s in kept]),
    }
    return {"samples": samples, "aggregate": aggregate}
