import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from floodscope.errors import EmptyInput, GridMismatch
from floodscope.raster import Band, GeoTransform, Mask
from floodscope.spectral import (
    Comparator,
    FloodRule,
    IndexBand,
    IndexKind,
    apply_flood_rule,
    compute_evi,
    compute_ndvi,
    compute_ndwi,
    derive_permanent_water,
    low_vegetation_mask,
    validity_mask,
)

import oracles

GT = GeoTransform(0.0, 0.0, 30.0, 30.0)


def band(values, name="b"):
    return Band(name, np.asarray(values, dtype=np.float64))


def index(kind, values):
    return IndexBand(kind, band(values, kind.value), GT)


class TestIndices:
    def test_ndvi_known_values(self):
        out = compute_ndvi(band([[0.5, 0.3, 0.0]]), band([[0.1, 0.3, 0.0]])).values
        assert out[0, 0] == pytest.approx(0.4 / 0.6)
        assert out[0, 1] == 0.0
        assert math.isnan(out[0, 2])  # 0/0 -> nodata

    def test_ndwi_open_water_positive(self):
        out = compute_ndwi(band([[0.10]]), band([[0.03]])).values
        assert out[0, 0] == pytest.approx(0.07 / 0.13)

    def test_evi_singular_denominator(self):
        # nir + 6 red - 7.5 blue + 1 == 0
        out = compute_evi(band([[0.5]]), band([[0.0]]), band([[0.2]])).values
        assert math.isnan(out[0, 0])

    def test_evi_value(self):
        out = compute_evi(band([[0.5]]), band([[0.1]]), band([[0.05]])).values
        assert out[0, 0] == pytest.approx(2.5 * 0.4 / (0.5 + 0.6 - 0.375 + 1))

    def test_nan_input_propagates(self):
        assert math.isnan(compute_ndvi(band([[np.nan]]), band([[0.1]])).values[0, 0])

    def test_shape_mismatch(self):
        with pytest.raises(GridMismatch):
            compute_ndvi(band(np.zeros((2, 2))), band(np.zeros((2, 3))))

    @given(
        hnp.arrays(np.float64, 50, elements=st.floats(-0.2, 1.2)),
        hnp.arrays(np.float64, 50, elements=st.floats(-0.2, 1.2)),
        hnp.arrays(np.float64, 50, elements=st.floats(0, 1)),
    )
    def test_match_scalar_formulas(self, a, b, c):
        ndvi = compute_ndvi(band(a[None]), band(b[None])).values[0]
        ndwi = compute_ndwi(band(a[None]), band(b[None])).values[0]
        evi = compute_evi(band(a[None]), band(b[None]), band(c[None])).values[0]
        for k in range(50):
            for got, want in (
                (ndvi[k], oracles.ndvi(a[k], b[k])),
                (ndwi[k], oracles.ndwi(a[k], b[k])),
                (evi[k], oracles.evi(a[k], b[k], c[k])),
            ):
                if want is None:
                    assert math.isnan(got)
                else:
                    assert got == pytest.approx(want, abs=1e-12)

    @given(hnp.arrays(np.float64, (4, 4), elements=st.floats(0, 1)), hnp.arrays(np.float64, (4, 4), elements=st.floats(0, 1)))
    def test_normalized_difference_bounded(self, a, b):
        v = compute_ndvi(band(a), band(b)).values
        v = v[~np.isnan(v)]
        assert ((v >= -1) & (v <= 1)).all()


class TestFloodRule:
    def test_strict_thresholds_at_boundary(self):
        ndwi = index(IndexKind.NDWI, [[0.15, 0.1499, 0.0]])
        ndvi = index(IndexKind.NDVI, [[0.0, 0.0, 0.2]])
        assert apply_flood_rule(ndwi, ndvi).bits.tolist() == [[False, True, False]]

    def test_greater_equal_comparator(self):
        rule = FloodRule(ndwi_comparator=Comparator.GREATER_EQUAL)
        ndwi = index(IndexKind.NDWI, [[0.15, 0.1499]])
        ndvi = index(IndexKind.NDVI, [[0.0, 0.0]])
        assert apply_flood_rule(ndwi, ndvi, rule).bits.tolist() == [[True, False]]

    def test_comparator_from_string(self):
        assert FloodRule(ndwi_comparator="greater_equal").ndwi_comparator is Comparator.GREATER_EQUAL

    def test_nodata_never_floods(self):
        ndwi = index(IndexKind.NDWI, [[np.nan, 0.0]])
        ndvi = index(IndexKind.NDVI, [[0.0, np.nan]])
        assert not apply_flood_rule(ndwi, ndvi).bits.any()

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            FloodRule(ndwi_threshold=1.5)

    def test_requires_geotransform(self):
        bare = IndexBand(IndexKind.NDWI, band([[0.0]]))
        with pytest.raises(ValueError):
            apply_flood_rule(bare, IndexBand(IndexKind.NDVI, band([[0.0]])))

    def test_mismatched_geotransforms(self):
        other = GeoTransform(1.0, 0.0, 30.0, 30.0)
        with pytest.raises(GridMismatch):
            apply_flood_rule(index(IndexKind.NDWI, [[0.0]]), IndexBand(IndexKind.NDVI, band([[0.0]]), other))

    @given(
        hnp.arrays(np.float64, 64, elements=st.sampled_from([0.15, 0.2, -0.5, 0.149, 0.151, 0.199, np.nan])),
        hnp.arrays(np.float64, 64, elements=st.sampled_from([0.15, 0.2, -0.5, 0.149, 0.201, 0.199, np.nan])),
        st.sampled_from(["less", "greater_equal"]),
    )
    def test_matches_scalar_oracle(self, w, v, comparator):
        rule = FloodRule(ndwi_comparator=comparator)
        got = apply_flood_rule(index(IndexKind.NDWI, w[None]), index(IndexKind.NDVI, v[None]), rule).bits[0]
        want = [oracles.is_flood(a, b, comparator=comparator) for a, b in zip(w, v)]
        assert got.tolist() == want


class TestMasks:
    def test_permanent_water_all_scenes(self):
        s1 = index(IndexKind.NDWI, [[0.5, 0.5, 0.1]])
        s2 = index(IndexKind.NDWI, [[0.5, 0.1, 0.1]])
        assert derive_permanent_water([s1, s2]).bits.tolist() == [[True, False, False]]
        assert derive_permanent_water([s1, s2], min_fraction=0.5).bits.tolist() == [[True, True, False]]

    def test_permanent_water_ignores_unobserved_scenes(self):
        s1 = index(IndexKind.NDWI, [[0.5, np.nan]])
        s2 = index(IndexKind.NDWI, [[np.nan, np.nan]])
        assert derive_permanent_water([s1, s2]).bits.tolist() == [[True, False]]

    def test_permanent_water_threshold_inclusive(self):
        assert derive_permanent_water([index(IndexKind.NDWI, [[0.3]])]).bits.all()

    def test_permanent_water_requires_scenes(self):
        with pytest.raises(EmptyInput):
            derive_permanent_water([])

    def test_low_vegetation_strict(self):
        m = low_vegetation_mask(index(IndexKind.NDVI, [[0.19, 0.2, np.nan]]))
        assert m.bits.tolist() == [[True, False, False]]

    def test_validity(self):
        m = validity_mask(band([[1.0, np.nan]]), index(IndexKind.NDVI, [[np.nan, 0.2]]), geotransform=GT)
        assert m == Mask(np.array([[False, False]]), GT)
