import pytest
from hypothesis import given, strategies as st

from floodscope.classify import MetricsReport
from floodscope.reports import (
    AreaReport,
    CropAreaReport,
    CropAreaRow,
    ImpactRow,
    SeriesSample,
    TimeSeriesReport,
    format_number,
    parse_timeseries_csv,
    readiness_table,
    write_csv_report,
)


def lines(text):
    assert text.endswith("\r\n")
    return text.split("\r\n")[:-1]


class TestFormatNumber:
    @pytest.mark.parametrize(
        "value, min_dec, want",
        [
            (1020.4, 1, "1020.4"),
            (129.9, 1, "129.9"),
            (0.7, 2, "0.70"),
            (3.258, 2, "3.258"),
            (0.0, 2, "0.00"),
            (5.0, 0, "5"),
            (0.123456, 0, "0.1235"),
            (-0.00001, 2, "0.00"),
        ],
    )
    def test_examples(self, value, min_dec, want):
        assert format_number(value, min_dec) == want

    @given(st.floats(0, 1e6), st.integers(0, 4))
    def test_within_half_unit_of_fourth_decimal(self, value, min_dec):
        assert abs(float(format_number(value, min_dec)) - value) <= 5e-5 + 1e-9 * value


class TestImpactTable:
    def test_golden_rows(self):
        report = AreaReport((ImpactRow("Mehar", 1020.4, 129.9, 0.70), ImpactRow("Dadu", 784.5, 13.8, 0.10)))
        assert lines(write_csv_report(report)) == [
            "Tehsil,Total Area,Area of Affected Kharif Crop,Affected Built-Up",
            "Dadu,784.5,13.8,0.10",
            "Mehar,1020.4,129.9,0.70",
        ]

    def test_empty_report_is_header_only(self):
        assert lines(write_csv_report(AreaReport())) == [
            "Tehsil,Total Area,Area of Affected Kharif Crop,Affected Built-Up"
        ]

    def test_names_with_commas_are_quoted(self):
        text = write_csv_report(AreaReport((ImpactRow("Moro, East", 1.0, 0.0, 0.0),)))
        assert lines(text)[1] == '"Moro, East",1.0,0.0,0.00'

    def test_invariants(self):
        with pytest.raises(ValueError):
            ImpactRow("x", 1.0, 2.0, 0.0)
        with pytest.raises(ValueError):
            ImpactRow("x", 1.0, -0.1, 0.0)
        with pytest.raises(KeyError):
            AreaReport().row("Mehar")


class TestCropTable:
    def test_golden_layout(self):
        crops = ("rice", "maize", "cotton", "orchards")
        report = CropAreaReport(
            crops,
            (
                CropAreaRow("June", "Mehar", dict(zip(crops, (10.23, 8.11, 6.59, 1.01)))),
                CropAreaRow("May", "Mehar", dict(zip(crops, (7.10, 2.63, 15.47, 3.258)))),
                CropAreaRow("May", "Dadu", dict(zip(crops, (22.36, 2.90, 21.82, 24.72)))),
            ),
        )
        assert lines(write_csv_report(report)) == [
            "Month,Tehsil,Rice,Maize,Cotton,Orchards",
            "June,Mehar,10.23,8.11,6.59,1.01",
            "May,Dadu,22.36,2.90,21.82,24.72",
            "May,Mehar,7.10,2.63,15.47,3.258",
        ]
        assert report.area("May", "Dadu", "orchards") == 24.72


class TestMetricsTable:
    def test_golden_row(self):
        row = MetricsReport("Random Forest", 0.96, 0.94, 0.92, 0.96, 0.97)
        assert lines(write_csv_report([row])) == [
            "Model Name,Training Accuracy,Validation Accuracy,Recall,F1 Score,Precision",
            "Random Forest,0.96,0.94,0.92,0.96,0.97",
        ]

    def test_range_checked(self):
        with pytest.raises(ValueError):
            MetricsReport("SVM", 1.2, 0.5, 0.5, 0.5, 0.5)


class TestSeries:
    def series(self):
        return [
            TimeSeriesReport("Mehar", (SeriesSample("2022-06", 0.41, 120), SeriesSample("2022-07", 0.2, 118))),
            TimeSeriesReport("Dadu", (SeriesSample("2022-06", 0.35, 90),)),
        ]

    def test_layout_and_round_trip(self):
        text = write_csv_report(self.series())
        assert lines(text) == [
            "Tehsil,Period,Mean NDVI,Valid Pixels",
            "Dadu,2022-06,0.35,90",
            "Mehar,2022-06,0.41,120",
            "Mehar,2022-07,0.20,118",
        ]
        back = parse_timeseries_csv(text)
        assert [s.region for s in back] == ["Dadu", "Mehar"]
        assert back[1].values == [0.41, 0.2]

    def test_periods_must_increase(self):
        with pytest.raises(ValueError):
            TimeSeriesReport("x", (SeriesSample("2022-07", 0, 1), SeriesSample("2022-06", 0, 1)))

    def test_moisture_column(self):
        s = TimeSeriesReport("Dadu", (SeriesSample("2022-06-01", 0.3, 4),), statistic="moisture fraction")
        assert lines(write_csv_report(s))[0] == "Tehsil,Period,Mean Soil Moisture,Valid Pixels"

    def test_rejects_unknown_objects(self):
        with pytest.raises(TypeError):
            write_csv_report([object()])


def test_readiness_table():
    table = readiness_table([("Mehar", "top", 0.25, None), ("Dadu", "top", 0.25, "2022-10-01")])
    assert lines(table.to_csv()) == [
        "Tehsil,Layer,Threshold,First Ready Epoch",
        "Dadu,top,0.25,2022-10-01",
        "Mehar,top,0.25,not reached",
    ]
