import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from layoutattn.metrics import (
    AreaFilter,
    SimilarityInputs,
    area_filter,
    avg_report,
    bg_similarity,
    color_hist_sim,
    cosine_similarity,
    evaluate_manifest,
    evaluate_sample,
    fill_ratio,
    in_ratio,
    resolve_similarity,
    ssim,
)
from layoutattn.pnm import encode_mask, encode_ppm


def count_pixels_oracle(m_gen, m_trg):
    """Exact integer pixel counting with explicit loops."""
    inter = gen = trg = 0
    h, w = m_gen.shape
    for y in range(h):
        for x in range(w):
            if m_gen[y, x]:
                gen += 1
            if m_trg[y, x]:
                trg += 1
            if m_gen[y, x] and m_trg[y, x]:
                inter += 1
    return inter, gen, trg


def ssim_oracle(a, b, window=8, k1=0.01, k2=0.03, dr=255.0):
    """Naive per-window SSIM with population moments."""
    h, w = a.shape
    c1, c2 = (k1 * dr) ** 2, (k2 * dr) ** 2
    values = []
    for y in range(h - window + 1):
        for x in range(w - window + 1):
            wa = a[y : y + window, x : x + window].astype(float)
            wb = b[y : y + window, x : x + window].astype(float)
            mu_a, mu_b = wa.mean(), wb.mean()
            var_a = (wa * wa).mean() - mu_a * mu_a
            var_b = (wb * wb).mean() - mu_b * mu_b
            cov = (wa * wb).mean() - mu_a * mu_b
            values.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return sum(values) / len(values)


def hist_intersection_oracle(a, b, bins=32):
    total = 0.0
    for ch in range(3):
        ha = [0] * bins
        hb = [0] * bins
        for v in a[:, :, ch].ravel():
            ha[int(v) * bins // 256] += 1
        for v in b[:, :, ch].ravel():
            hb[int(v) * bins // 256] += 1
        na, nb = sum(ha), sum(hb)
        total += sum(min(x / na, y / nb) for x, y in zip(ha, hb))
    return total / 3.0


class TestRatios:
    def test_full_inclusion(self):
        m_gen = np.zeros((16, 16), dtype=bool)
        m_gen[4:8, 4:8] = True
        m_trg = np.zeros((16, 16), dtype=bool)
        m_trg[2:10, 2:10] = True
        assert in_ratio(m_gen, m_trg) == 100.0
        assert fill_ratio(m_gen, m_trg) == 100.0 * 16 / 64

    def test_disjoint(self):
        m_gen = np.zeros((8, 8), dtype=bool)
        m_gen[:4] = True
        m_trg = ~m_gen
        assert in_ratio(m_gen, m_trg) == 0.0
        assert fill_ratio(m_gen, m_trg) == 0.0

    def test_half_overlapping_squares(self):
        # 4x4 squares overlapping in a 2x4 strip: 8 of 16 pixels each
        m_gen = np.zeros((8, 8), dtype=bool)
        m_gen[0:4, 0:4] = True
        m_trg = np.zeros((8, 8), dtype=bool)
        m_trg[0:4, 2:6] = True
        inter, gen, trg = count_pixels_oracle(m_gen, m_trg)
        assert (inter, gen, trg) == (8, 16, 16)
        assert in_ratio(m_gen, m_trg) == 100.0 * 8 / 16 == 50.0
        assert fill_ratio(m_gen, m_trg) == 50.0

    def test_identity_masks(self):
        m = np.zeros((8, 8), dtype=bool)
        m[1:5, 2:7] = True
        assert in_ratio(m, m) == 100.0
        assert fill_ratio(m, m) == 100.0

    def test_target_twice_the_generated_area(self):
        m_gen = np.zeros((8, 8), dtype=bool)
        m_gen[0:4, 0:4] = True  # 16 px
        m_trg = np.zeros((8, 8), dtype=bool)
        m_trg[0:4, 0:8] = True  # 32 px, fully containing m_gen
        assert in_ratio(m_gen, m_trg) == 100.0
        assert fill_ratio(m_gen, m_trg) == 50.0

    def test_empty_masks_are_undefined(self):
        empty = np.zeros((4, 4), dtype=bool)
        full = np.ones((4, 4), dtype=bool)
        assert in_ratio(empty, full) is None
        assert fill_ratio(full, empty) is None

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            in_ratio(np.zeros((2, 2), bool), np.zeros((3, 3), bool))

    def test_matches_pixel_counting_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            h, w = int(rng.integers(2, 24)), int(rng.integers(2, 24))
            m_gen = rng.random((h, w)) < rng.random()
            m_trg = rng.random((h, w)) < rng.random()
            inter, gen, trg = count_pixels_oracle(m_gen, m_trg)
            assert in_ratio(m_gen, m_trg) == (100.0 * inter / gen if gen else None)
            assert fill_ratio(m_gen, m_trg) == (100.0 * inter / trg if trg else None)

    def test_swap_exchanges_roles(self):
        rng = np.random.default_rng(18)
        for _ in range(20):
            a = rng.random((10, 10)) < 0.5
            b = rng.random((10, 10)) < 0.5
            assert in_ratio(a, b) == fill_ratio(b, a)

    def test_nearest_neighbor_upscale_invariance(self):
        rng = np.random.default_rng(19)
        a = rng.random((6, 6)) < 0.5
        b = rng.random((6, 6)) < 0.5
        for factor in (2, 3):
            a_big = np.kron(a, np.ones((factor, factor), dtype=bool))
            b_big = np.kron(b, np.ones((factor, factor), dtype=bool))
            assert in_ratio(a, b) == in_ratio(a_big, b_big)
            assert fill_ratio(a, b) == fill_ratio(a_big, b_big)


class TestAreaFilter:
    def test_exactly_75_percent_is_kept(self):
        m = np.zeros((64, 64), dtype=bool)
        m.ravel()[: 3 * 64 * 64 // 4] = True  # exactly 75.0%
        assert area_filter(m) is AreaFilter.KEEP

    def test_76_percent_is_discarded(self):
        m = np.zeros((10, 10), dtype=bool)
        m.ravel()[:76] = True
        assert area_filter(m) is AreaFilter.DISCARD

    def test_empty_mask_is_kept(self):
        assert area_filter(np.zeros((8, 8), dtype=bool)) is AreaFilter.KEEP

    def test_one_pixel_above_threshold(self):
        m = np.zeros((64, 64), dtype=bool)
        m.ravel()[: 3 * 64 * 64 // 4 + 1] = True
        assert area_filter(m) is AreaFilter.DISCARD


class TestSsim:
    def test_self_similarity_is_exactly_one(self):
        rng = np.random.default_rng(23)
        for _ in range(5):
            img = rng.integers(0, 256, size=(12, 15)).astype(np.uint8)
            assert ssim(img, img) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(24)
        a = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
        b = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_constant_images_closed_form(self):
        # flat 100 vs flat 150: variances vanish, every window is identical,
        # so SSIM reduces to (2*100*150 + c1) / (100^2 + 150^2 + c1)
        a = np.full((12, 12), 100, dtype=np.uint8)
        b = np.full((12, 12), 150, dtype=np.uint8)
        c1 = (0.01 * 255) ** 2
        expected = (2 * 100 * 150 + c1) / (100**2 + 150**2 + c1)
        assert abs(ssim(a, b) - expected) < 1e-6

    def test_matches_naive_window_oracle(self):
        rng = np.random.default_rng(25)
        a = rng.integers(0, 256, size=(11, 13)).astype(np.uint8)
        b = rng.integers(0, 256, size=(11, 13)).astype(np.uint8)
        expected = min(1.0, max(0.0, ssim_oracle(a.astype(float), b.astype(float))))
        assert abs(ssim(a, b) - expected) < 1e-9

    def test_rgb_goes_through_luma(self):
        rng = np.random.default_rng(26)
        img = rng.integers(0, 256, size=(10, 10, 3)).astype(np.uint8)
        gray = img.astype(float) @ np.array([0.299, 0.587, 0.114])
        assert ssim(img, img) == 1.0
        other = rng.integers(0, 256, size=(10, 10, 3)).astype(np.uint8)
        gray_other = other.astype(float) @ np.array([0.299, 0.587, 0.114])
        assert abs(ssim(img, other) - ssim(gray, gray_other)) < 1e-12

    def test_valid_region_restricts_windows(self):
        rng = np.random.default_rng(27)
        a = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
        b = a.copy()
        b[:8] = rng.integers(0, 256, size=(8, 16))  # corrupt the top half
        valid = np.zeros((16, 16), dtype=bool)
        valid[8:] = True
        assert ssim(a, b, valid=valid) == 1.0  # bottom half is untouched

    def test_errors(self):
        with pytest.raises(ValueError, match="smaller than"):
            ssim(np.zeros((4, 4)), np.zeros((4, 4)))
        with pytest.raises(ValueError, match="mismatch"):
            ssim(np.zeros((9, 9)), np.zeros((10, 10)))
        with pytest.raises(ValueError, match="no SSIM window"):
            ssim(
                np.zeros((10, 10)),
                np.zeros((10, 10)),
                valid=np.zeros((10, 10), dtype=bool),
            )


class TestColorHist:
    def test_identical_images(self):
        rng = np.random.default_rng(28)
        img = rng.integers(0, 256, size=(9, 9, 3)).astype(np.uint8)
        assert color_hist_sim(img, img) == 1.0

    def test_pure_red_vs_pure_blue(self):
        red = np.zeros((8, 8, 3), dtype=np.uint8)
        red[:, :, 0] = 255
        blue = np.zeros((8, 8, 3), dtype=np.uint8)
        blue[:, :, 2] = 255
        # red and blue channel histograms are disjoint, green matches fully
        assert abs(color_hist_sim(red, blue) - 1 / 3) < 1e-12

    def test_matches_binning_oracle(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            a = rng.integers(0, 256, size=(7, 11, 3)).astype(np.uint8)
            b = rng.integers(0, 256, size=(7, 11, 3)).astype(np.uint8)
            assert abs(color_hist_sim(a, b) - hist_intersection_oracle(a, b)) < 1e-12

    def test_channel_permutation(self):
        rng = np.random.default_rng(30)
        a = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
        b = a[:, :, [2, 0, 1]]
        assert abs(color_hist_sim(a, b) - hist_intersection_oracle(a, b)) < 1e-12

    def test_region_restriction(self):
        a = np.zeros((8, 8, 3), dtype=np.uint8)
        b = np.zeros((8, 8, 3), dtype=np.uint8)
        b[:4] = 200  # differ only in the top half
        region = np.zeros((8, 8), dtype=bool)
        region[4:] = True
        assert color_hist_sim(a, b, region=region) == 1.0


class TestBgSimilarity:
    def test_all_ones_gives_100(self):
        assert bg_similarity(SimilarityInputs(1, 1, 1, 1)) == 100.0

    def test_all_zeros_gives_0(self):
        assert bg_similarity(SimilarityInputs(0, 0, 0, 0)) == 0.0

    def test_uniform_components_scale_linearly(self):
        assert abs(bg_similarity(SimilarityInputs(0.8, 0.8, 0.8, 0.8)) - 80.0) < 1e-12

    def test_weights_recovered_by_finite_differences(self):
        base = bg_similarity(SimilarityInputs(0, 0, 0, 0))
        weights = []
        for i in range(4):
            c = [0.0] * 4
            c[i] = 1.0
            weights.append((bg_similarity(SimilarityInputs(*c)) - base) / 100.0)
        assert weights == [0.4, 0.25, 0.2, 0.15]

    def test_component_out_of_range(self):
        with pytest.raises(ValueError, match="out of"):
            SimilarityInputs(1.2, 0, 0, 0)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_range_and_monotonicity(self, d, c, s, h):
        value = bg_similarity(SimilarityInputs(d, c, s, h))
        assert 0.0 <= value <= 100.0
        if d < 1:
            higher = bg_similarity(SimilarityInputs(min(1.0, d + 0.1), c, s, h))
            assert higher >= value


class TestCosine:
    def test_identical_unit_vector(self):
        e1 = np.array([1.0, 0.0, 0.0])
        assert cosine_similarity(e1, e1) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_negative_clamps_to_zero(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == 0.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(31)
        u = rng.standard_normal(8)
        v = rng.standard_normal(8)
        dot = sum(float(a) * float(b) for a, b in zip(u, v))
        nu = math.sqrt(sum(float(a) ** 2 for a in u))
        nv = math.sqrt(sum(float(b) ** 2 for b in v))
        expected = min(1.0, max(0.0, dot / (nu * nv)))
        assert abs(cosine_similarity(u, v) - expected) < 1e-12

    def test_errors(self):
        with pytest.raises(ValueError, match="zero vector"):
            cosine_similarity(np.zeros(3), np.ones(3))
        with pytest.raises(ValueError, match="length mismatch"):
            cosine_similarity(np.ones(3), np.ones(4))


class TestAvg:
    def test_two_reference_row(self):
        assert abs(avg_report(85.61, 78.04, 72.33, 83.14, 53.59) - 74.542) < 1e-9

    def test_three_reference_row_reports_own_mean(self):
        # the published aggregate for this row is 73.92; the arithmetic mean
        # of the row is 74.084 and that is what this function returns
        assert abs(avg_report(91.95, 65.63, 67.54, 86.06, 59.24) - 74.084) < 1e-9

    def test_equal_values(self):
        assert avg_report(50, 50, 50, 50, 50) == 50.0


class TestBatch:
    def test_resolve_similarity_from_scalars(self):
        s = resolve_similarity({"dino": 0.9, "clip": 0.8, "ssim": 0.7, "ch": 0.6})
        assert s == SimilarityInputs(0.9, 0.8, 0.7, 0.6)

    def test_resolve_similarity_from_embeddings(self):
        sidecar = {
            "dino_embed_a": [1.0, 0.0],
            "dino_embed_b": [1.0, 0.0],
            "clip": 0.5,
            "ssim": 0.5,
            "ch": 0.5,
        }
        s = resolve_similarity(sidecar)
        assert s.dino == 1.0

    def test_resolve_similarity_unknown_key(self):
        with pytest.raises(ValueError, match="unknown field"):
            resolve_similarity({"bogus": 1})

    def test_resolve_similarity_missing_component(self):
        with pytest.raises(ValueError, match="missing the ch"):
            resolve_similarity({"dino": 1, "clip": 1, "ssim": 1})

    def test_evaluate_sample_undefined_not_coerced(self):
        empty = np.zeros((8, 8), dtype=bool)
        target = np.ones((8, 8), dtype=bool)
        row = evaluate_sample(empty, target)
        assert row["in_r"] is None
        assert row["fi_r"] == 0.0
        assert row["filter"] == "discard"

    def test_manifest_pipeline(self, tmp_path):
        # two 4x4 squares overlapping in a 2x4 strip: IN-R = FI-R = 50
        m_gen = np.zeros((8, 8), dtype=bool)
        m_gen[0:4, 0:4] = True
        m_trg = np.zeros((8, 8), dtype=bool)
        m_trg[0:4, 2:6] = True
        rng = np.random.default_rng(5)
        image = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
        (tmp_path / "gen.pgm").write_bytes(encode_mask(m_gen))
        (tmp_path / "trg.pgm").write_bytes(encode_mask(m_trg))
        (tmp_path / "img.ppm").write_bytes(encode_ppm(image))
        (tmp_path / "side.json").write_text(
            json.dumps({"dino": 1.0, "clip": 1.0, "ssim": 1.0, "ch": 1.0,
                        "dpg": 80, "id_s": 70, "ip_s": 60, "aes": 50})
        )
        (tmp_path / "manifest.txt").write_text(
            "# comment line\nimg.ppm trg.pgm gen.pgm side.json\n"
        )
        report = evaluate_manifest(tmp_path / "manifest.txt")
        row = report["samples"][0]
        assert row["in_r"] == 50.0
        assert row["fi_r"] == 50.0
        assert row["filter"] == "keep"
        assert row["bg_s"] == 100.0
        assert abs(row["avg"] - (80 + 70 + 60 + 100 + 50) / 5) < 1e-12
        agg = report["aggregate"]
        assert agg["kept"] == 1 and agg["samples"] == 1
        assert agg["in_r"] == 50.0

    def test_manifest_with_computed_ssim_and_ch(self, tmp_path):
        rng = np.random.default_rng(6)
        image = rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8)
        ref = image.copy()
        m_trg = np.zeros((16, 16), dtype=bool)
        m_trg[:4] = True  # background is the bottom 12 rows
        m_gen = m_trg.copy()
        (tmp_path / "gen.pgm").write_bytes(encode_mask(m_gen))
        (tmp_path / "trg.pgm").write_bytes(encode_mask(m_trg))
        (tmp_path / "img.ppm").write_bytes(encode_ppm(image))
        (tmp_path / "ref.ppm").write_bytes(encode_ppm(ref))
        (tmp_path / "side.json").write_text(
            json.dumps({"dino": 1.0, "clip": 1.0, "ref_image": "ref.ppm"})
        )
        (tmp_path / "manifest.txt").write_text("img.ppm trg.pgm gen.pgm side.json\n")
        report = evaluate_manifest(tmp_path / "manifest.txt")
        assert report["samples"][0]["bg_s"] == 100.0  # identical background

    def test_manifest_field_count_error(self, tmp_path):
        (tmp_path / "manifest.txt").write_text("a b\n")
        with pytest.raises(ValueError, match="expected 4 fields"):
            evaluate_manifest(tmp_path / "manifest.txt")
