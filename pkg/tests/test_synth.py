import numpy as np
import pytest

from floodscope.errors import BadParams, BadSigma, ParseError, SpecOutOfBounds
from floodscope.raster import Region, mask_area_km2, pixel_area_km2
from floodscope.spectral import (
    Comparator,
    FloodRule,
    IndexBand,
    IndexKind,
    apply_flood_rule,
    compute_ndvi,
    compute_ndwi,
)
from floodscope.synth import (
    SceneSpec,
    default_scene_spec,
    export_scene,
    generate_checkerboard_dataset,
    generate_flood_scene,
    generate_moisture_grids,
    parse_scene_spec,
)


def flood_from(scene, rule=FloodRule()):
    gt = scene.geotransform
    ndwi = IndexBand(IndexKind.NDWI, compute_ndwi(scene.band("green"), scene.band("nir")), gt)
    ndvi = IndexBand(IndexKind.NDVI, compute_ndvi(scene.band("nir"), scene.band("red")), gt)
    return apply_flood_rule(ndwi, ndvi, rule)


@pytest.fixture(scope="module")
def small():
    return default_scene_spec(128, 128)


class TestFloodScene:
    @pytest.mark.parametrize("comparator", ["less", "greater_equal"])
    def test_noiseless_rule_recovers_flood(self, comparator):
        rule = FloodRule(ndwi_comparator=comparator)
        spec = default_scene_spec(128, 128, flood_rule=rule)
        pre, post, truth = generate_flood_scene(spec)
        detected = flood_from(post[0], rule)
        if rule.ndwi_comparator is Comparator.GREATER_EQUAL:
            detected = detected - truth.permanent_water
        assert detected == truth.flood
        assert not flood_from(pre[0], rule).bits.any() or rule.ndwi_comparator is Comparator.GREATER_EQUAL

    def test_noiseless_reflectances_are_class_means(self, small):
        pre, _, truth = generate_flood_scene(small)
        rice = truth.crops["class"] == 1
        assert len(np.unique(pre[0]["nir"][rice])) == 1

    def test_same_seed_bit_identical(self):
        spec = default_scene_spec(64, 64, sigma=0.05, seed=9)
        a, b = generate_flood_scene(spec), generate_flood_scene(spec)
        for x, y in zip(a[0] + a[1], b[0] + b[1]):
            assert x == y

    def test_noise_is_bounded_to_unit_interval(self):
        pre, _, _ = generate_flood_scene(default_scene_spec(64, 64, sigma=0.3, seed=1))
        v = pre[0]["red"]
        assert v.min() >= 0 and v.max() <= 1

    def test_truth_areas_are_pixel_counts(self, small):
        _, _, truth = generate_flood_scene(small)
        for region in small.regions:
            rmask = region.mask(small.geotransform, 128, 128)
            assert truth.region_areas[region.name]["flood"] == mask_area_km2(truth.flood, rmask)

    def test_half_km2_polygon_within_one_pixel(self):
        # a 25 x 22 pixel block plus a one-pixel-wide tab of 166.67 m: exactly 0.5 km2,
        # with only the tab's end off the pixel lattice
        tab = 2_997_300.0 + 5000.0 / 30.0
        shape = (
            (500_300.0, 2_997_300.0), (501_080.0, 2_997_300.0), (501_080.0, tab),
            (501_050.0, tab), (501_050.0, 2_997_960.0), (500_300.0, 2_997_960.0),
        )
        spec = SceneSpec(width=100, height=100, flood_polygons=(shape,), regions=(Region("r", shape),))
        _, _, truth = generate_flood_scene(spec)
        assert abs(mask_area_km2(truth.flood) - 0.5) <= pixel_area_km2(spec.geotransform)

    def test_validation(self):
        with pytest.raises(BadSigma):
            generate_flood_scene(SceneSpec(width=4, height=4, sigma=-1))
        with pytest.raises(SpecOutOfBounds):
            generate_flood_scene(SceneSpec(width=4, height=4, flood_polygons=(((0, 0), (1, 0), (0, 1)),)))


class TestCheckerboard:
    def test_balanced_cells(self):
        ds = generate_checkerboard_dataset(4, 2000, seed=7)
        assert ds.class_counts().tolist() == [1000, 1000]

    def test_multiclass_labels(self):
        ds = generate_checkerboard_dataset(3, 90, n_classes=4)
        assert ds.n_classes == 4

    def test_bad_params(self):
        with pytest.raises(BadParams):
            generate_checkerboard_dataset(4, 10)
        with pytest.raises(BadParams):
            generate_checkerboard_dataset(2, 10, sigma=float("nan"))


class TestSpecFile:
    def test_round_trip_fields(self):
        spec = parse_scene_spec(
            "width = 32\nheight = 16\nseed = 5\nsigma = 0.01\nndwi_comparator = greater_equal\n"
            "region = A: 500000,2999520 500960,2999520 500960,3000000\n"
            "crop = rice: 500000,2999700 500300,3000000\n"
        )
        assert (spec.width, spec.height, spec.seed, spec.sigma) == (32, 16, 5, 0.01)
        assert spec.flood_rule.ndwi_comparator is Comparator.GREATER_EQUAL
        assert spec.regions[0].name == "A" and spec.crop_fields[0].crop == "rice"

    def test_preset_default(self):
        spec = parse_scene_spec("preset = default\nwidth = 64\nheight = 64\nsigma = 0.02\n")
        assert len(spec.regions) == 4 and spec.sigma == 0.02

    def test_errors(self):
        with pytest.raises(ParseError, match="unknown key"):
            parse_scene_spec("width = 4\nheight = 4\ncolour = red\n")
        with pytest.raises(ParseError):
            parse_scene_spec("height = 4\n")
        with pytest.raises(ParseError):
            parse_scene_spec("width = 4\npreset = default\n")


class TestExport:
    def test_files_and_determinism(self):
        spec = default_scene_spec(64, 64, sigma=0.02, seed=3)
        a = export_scene(spec, per_class=20)
        b = export_scene(spec, per_class=20)
        assert a == b
        for name in ("manifest.txt", "regions.txt", "samples.csv", "landcover.tif", "truth/expected_areas.csv"):
            assert name in a
        assert a["truth/expected_areas.csv"].startswith(b"Tehsil,Total Area,")
        assert not any(k.startswith("moisture/") for k in export_scene(spec, 20, moisture=False))

    def test_moisture_grids_cover_extent(self):
        grids = generate_moisture_grids((0.0, 0.0, 30_000.0, 20_000.0), layer="root")
        assert len(grids) == 8 and grids[0][1].shape == (3, 4)
        assert grids[0][0] == "2022-06" and grids[-1][0] == "2023-01"
