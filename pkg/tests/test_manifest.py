import numpy as np
import pytest

from floodscope.errors import DateOrderError, GridMismatch, MissingBand, MissingFile, ParseError
from floodscope.geotiff import save_geotiff
from floodscope.impact import format_legend
from floodscope.manifest import format_manifest_entry, load_scene_manifest, read_scene_manifest
from floodscope.raster import Band, GeoTransform, RasterGrid

FINE = GeoTransform(0.0, 120.0, 10.0, 10.0, "EPSG:32642")    # 12 x 12
COARSE = GeoTransform(0.0, 120.0, 30.0, 30.0, "EPSG:32642")  # 4 x 4
BANDS = {"B2": 0.05, "B3": 0.08, "B4": 0.06, "B5": 0.30}


def write(path, gt, shape, value):
    save_geotiff(path, RasterGrid(gt, [Band("v", np.full(shape, value, dtype=np.float32))]))


@pytest.fixture
def scene_dir(tmp_path):
    for date in ("2022-05-15", "2022-08-20"):
        for key, value in BANDS.items():
            write(tmp_path / f"{date}_{key}.tif", COARSE, (4, 4), value)
    lc = np.zeros((12, 12), dtype=np.float32)
    lc[:3, :3] = 2  # one coarse pixel of built-up
    save_geotiff(tmp_path / "lc.tif", RasterGrid(FINE, [Band("c", lc)]), "uint8")
    (tmp_path / "lc.legend").write_text(format_legend({0: "other", 2: "built-up"}))
    (tmp_path / "regions.txt").write_text("All;0,0 120,0 120,120 0,120\n")
    return tmp_path


def optical(role, date):
    return format_manifest_entry(role, date, {k: f"{date}_{k}.tif" for k in BANDS})


def manifest_text(landcover_align="nearest"):
    return "\n".join([
        "# test scene",
        "regions regions.txt",
        optical("pre_flood", "2022-05-15"),
        optical("post_flood", "2022-08-20"),
        format_manifest_entry("landcover", "2021-01-01", {"classes": "lc.tif"}, legend="lc.legend", align=landcover_align),
    ]) + "\n"


class TestParsing:
    def test_loads_and_aligns_to_coarsest(self, scene_dir):
        (scene_dir / "m.txt").write_text(manifest_text())
        m = read_scene_manifest(scene_dir / "m.txt")
        assert [e.role for e in m.optical] == ["pre_flood", "post_flood"]
        assert m.reference.geotransform == COARSE
        lc = m.load_landcover()
        assert lc.values.shape == (4, 4) and lc.values[0, 0] == 2 and lc.values[1, 1] == 0
        assert m.by_role("landcover")[0].resampled
        grid = m.load_optical(m.optical[0])
        assert set(grid.band_names) == {"blue", "green", "red", "nir"}
        assert grid.acquisition_date == "2022-05-15"

    def test_mismatch_without_align(self, scene_dir):
        with pytest.raises(GridMismatch, match="align=nearest"):
            load_scene_manifest(manifest_text(landcover_align=None), scene_dir)

    def test_missing_file(self, scene_dir):
        (scene_dir / "2022-08-20_B5.tif").unlink()
        with pytest.raises(MissingFile):
            load_scene_manifest(manifest_text(), scene_dir)

    def test_dates_must_increase(self, scene_dir):
        text = optical("pre_flood", "2022-05-15") + "\n" + optical("pre_flood", "2022-05-15") + "\n"
        with pytest.raises(DateOrderError):
            load_scene_manifest(text, scene_dir)

    @pytest.mark.parametrize(
        "line, message",
        [
            ("flooded 2022-01-01 a=b.tif", "unknown role"),
            ("pre_flood 2022-13-01 a=b.tif", "bad date"),
            ("pre_flood 2022-01-01 a", "key=value"),
            ("pre_flood 2022-01-01 a=x.tif align=bilinear", "alignment"),
            ("moisture_top 2022-06 sm=x.tif layer=root", "contradicts"),
            ("regions", "regions"),
        ],
    )
    def test_parse_errors_carry_line(self, line, message):
        with pytest.raises(ParseError, match=message) as err:
            load_scene_manifest("# header\n" + line + "\n", source="m.txt", check_files=False)
        assert "m.txt:2" in str(err.value)

    def test_missing_optical_band(self, scene_dir):
        text = format_manifest_entry("pre_flood", "2022-05-15", {"B2": "2022-05-15_B2.tif", "B3": "2022-05-15_B3.tif"})
        m = load_scene_manifest(text, scene_dir)
        with pytest.raises(MissingBand):
            m.load_optical(m.optical[0])

    def test_custom_band_names(self, scene_dir):
        text = "bands nir=B4 red=B5\n" + optical("pre_flood", "2022-05-15")
        m = load_scene_manifest(text, scene_dir)
        grid = m.load_optical(m.optical[0])
        assert grid["nir"][0, 0] == np.float32(BANDS["B4"])

    def test_moisture_keeps_own_grid(self, scene_dir):
        big = GeoTransform(0.0, 120.0, 60.0, 60.0, "EPSG:32642")
        for k, epoch in enumerate(("2022-06", "2022-07")):
            write(scene_dir / f"sm_{epoch}.tif", big, (2, 2), 0.3 + 0.1 * k)
        text = manifest_text() + "moisture_top 2022-06 sm=sm_2022-06.tif\nmoisture_top 2022-07 sm=sm_2022-07.tif\n"
        m = load_scene_manifest(text, scene_dir)
        grids = m.load_moisture("top")
        assert [g.epoch for g in grids] == ["2022-06", "2022-07"]
        assert grids[0].geotransform == big
        assert m.load_moisture("root") == []
