import csv
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

import kglab
from kglab import (
    ALPHA_COLUMNS,
    BOUNDS_ALPHA_COLUMNS,
    BOUNDS_COLUMNS,
    MEASURES_COLUMNS,
    TRANSFORMED_COLUMNS,
    CurveSpec,
    CurveStyle,
    ExperimentConfig,
    FigureKind,
    FigureSpec,
    alpha_rows,
    bound_curves,
    bounds_alpha_rows,
    bounds_rows,
    catalog,
    default_figure_arms,
    emit_csv,
    emit_svg,
    estimate_transforms,
    format_cell,
    format_float,
    measure_figure,
    measures_rows,
    run_replications,
    sampling_rate_figure,
    transformed_rows,
    write_bounds,
    write_figure,
)


def _read_csv(path):
    with open(path, newline="", encoding="utf8") as f:
        return list(csv.reader(f))


class FormatTests(unittest.TestCase):
    def test_floats(self):
        self.assertEqual(format_float(None), "")
        self.assertEqual(format_float(math.nan), "")
        self.assertEqual(format_float(math.inf), "inf")
        self.assertEqual(format_float(-math.inf), "-inf")
        self.assertEqual(format_float(0.0), "0")
        self.assertEqual(format_float(0.5), "0.5")
        self.assertEqual(format_float(1e-5), "1.000000000000e-05")
        self.assertEqual(format_float(-2.5e-7), "-2.500000000000e-07")
        self.assertEqual(format_float(1e-4), "0.0001")

    def test_cells(self):
        self.assertEqual(format_cell(True), "1")
        self.assertEqual(format_cell(np.bool_(False)), "0")
        self.assertEqual(format_cell(np.int64(12)), "12")
        self.assertEqual(format_cell("x"), "x")
        self.assertEqual(format_cell(np.float64(0.25)), "0.25")


class _TempDirTest(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()


class CSVTests(_TempDirTest):
    @classmethod
    def setUpClass(cls):
        cls.series = run_replications(catalog(1), 200, 5, 8, seed=1, checkpoints=[50, 200], workers=1)
        cls.bounds = bound_curves(catalog(1).constants, [50, 200])

    def test_header_only(self):
        path = self.tmp / "empty.csv"
        emit_csv(path, ALPHA_COLUMNS, [])
        self.assertEqual(path.read_bytes(), (",".join(ALPHA_COLUMNS) + "\r\n").encode())

    def test_row_width_checked(self):
        with self.assertRaises(ValueError):
            emit_csv(self.tmp / "bad.csv", ("a", "b"), [(1,)])

    def test_unwritable(self):
        with self.assertRaises(OSError):
            emit_csv(self.tmp / "missing" / "x.csv", ("a",), [])

    def test_alpha_schema(self):
        path = self.tmp / "alpha.csv"
        emit_csv(path, ALPHA_COLUMNS, alpha_rows(self.series, self.bounds))
        rows = _read_csv(path)
        self.assertEqual(tuple(rows[0]), ALPHA_COLUMNS)
        self.assertEqual(len(rows), 1 + 2 * 10)
        # Arms are written 1-based
        self.assertEqual([r[1] for r in rows[1:11]], [str(i) for i in range(1, 11)])
        self.assertEqual({r[-1] for r in rows[1:]}, {"1"})

    def test_alpha_without_bounds(self):
        rows = list(alpha_rows(self.series))
        self.assertEqual(rows[0][4:], (None, None, None))

    def test_measures_schema(self):
        path = self.tmp / "measures.csv"
        emit_csv(path, MEASURES_COLUMNS, measures_rows(self.series, self.bounds))
        rows = _read_csv(path)
        self.assertEqual(tuple(rows[0]), MEASURES_COLUMNS)
        self.assertEqual([r[0] for r in rows[1:]], ["50", "200"])

    def test_transformed_schema(self):
        transformed = estimate_transforms(self.series, self.bounds)
        path = self.tmp / "transformed.csv"
        emit_csv(path, TRANSFORMED_COLUMNS, transformed_rows(transformed))
        rows = _read_csv(path)
        self.assertEqual(tuple(rows[0]), TRANSFORMED_COLUMNS)
        self.assertEqual(len(rows), 3)

    def test_mismatched_bounds(self):
        with self.assertRaises(ValueError):
            list(measures_rows(self.series, self.bounds[:1]))

    def test_bounds_rows_flag_invalid(self):
        bounds = bound_curves(catalog(1).constants, [1, 1000])
        rows = list(bounds_rows(bounds))
        self.assertEqual(len(rows[0]), len(BOUNDS_COLUMNS))
        self.assertFalse(rows[0][1])
        self.assertTrue(rows[1][1])
        self.assertIsNone(rows[0][8])
        alpha_rows_ = list(bounds_alpha_rows(bounds))
        self.assertEqual(len(alpha_rows_), 20)
        self.assertEqual(len(alpha_rows_[0]), len(BOUNDS_ALPHA_COLUMNS))
        # The best arm has no rho envelope of its own
        self.assertIsNone(alpha_rows_[19][2])


class SVGTests(_TempDirTest):
    def _spec(self):
        x = np.array([10.0, 100.0, 1000.0])
        return FigureSpec(
            title="test",
            x_label="t",
            y_label="rate",
            curves=[
                CurveSpec("estimate", x, np.array([0.1, 0.2, 0.3]), omit=np.array([False, True, False])),
                CurveSpec("bound", x, np.array([0.2, 0.3, 0.4]), CurveStyle.BOUND),
            ],
        )

    def test_standalone_svg(self):
        path = self.tmp / "fig.svg"
        emit_svg(path, self._spec())
        text = path.read_text()
        self.assertIn("<svg", text)
        self.assertTrue(text.rstrip().endswith("</svg>"))

    def test_stable_output(self):
        emit_svg(self.tmp / "a.svg", self._spec())
        emit_svg(self.tmp / "b.svg", self._spec())
        self.assertEqual((self.tmp / "a.svg").read_bytes(), (self.tmp / "b.svg").read_bytes())

    def test_empty_series(self):
        spec = FigureSpec(title="empty", x_label="t", y_label="rate")
        spec.curves.append(CurveSpec("nothing", np.array([]), np.array([])))
        path = self.tmp / "empty.svg"
        emit_svg(path, spec)
        self.assertIn("<svg", path.read_text())

    def test_omitted_points(self):
        y = self._spec().curves[0].plotted_y()
        self.assertTrue(math.isnan(y[1]))
        self.assertEqual(y[0], 0.1)


class FigureAssemblyTests(_TempDirTest):
    def test_default_arms(self):
        self.assertEqual(default_figure_arms(catalog(1).constants), [0, 4, 9])
        self.assertEqual(default_figure_arms(kglab.make_instance([1, 0], [1, 1]).constants), [1, 0])

    def test_sampling_rate_curves(self):
        series = run_replications(catalog(1), 100, 5, 4, seed=0, checkpoints=[50, 100], workers=1)
        bounds = bound_curves(catalog(1).constants, [50, 100])
        spec = sampling_rate_figure(series, bounds, [0, 9])
        self.assertEqual(len(spec.curves), 6)
        styles = [c.style for c in spec.curves[:3]]
        self.assertEqual(styles, [CurveStyle.ESTIMATE, CurveStyle.BOUND, CurveStyle.BOUND])

    def test_measure_figure_kinds(self):
        series = run_replications(catalog(1), 100, 5, 4, seed=0, checkpoints=[50, 100], workers=1)
        transformed = estimate_transforms(series, bound_curves(catalog(1).constants, [50, 100]))
        self.assertEqual(len(measure_figure(FigureKind.PE, transformed, "pe").curves), 3)
        self.assertEqual(len(measure_figure(FigureKind.CR, transformed, "cr").curves), 2)
        with self.assertRaises(ValueError):
            measure_figure(FigureKind.BOUNDS_ONLY, transformed, "x")

    def test_bounds_only_figure(self):
        config = ExperimentConfig.from_sources(
            overrides={"instance": 1, "kind": "bounds-only", "t_grid": "list:1,100,1e6", "outputs": self.tmp}
        )
        paths = write_figure(config)
        names = ["figure_bounds-only.csv", "figure_bounds-only_alpha.csv", "figure_bounds-only.svg"]
        self.assertEqual([p.name for p in paths], names)
        self.assertTrue(all(p.exists() for p in paths))

    def test_pe_figure(self):
        config = ExperimentConfig.from_sources(
            overrides={
                "instance": 1,
                "kind": "pe",
                "rounds": 100,
                "replications": 4,
                "checkpoints": "list:50,100",
                "outputs": self.tmp / "pe",
            }
        )
        paths = write_figure(config, workers=1, rule_of_three=True)
        self.assertEqual(len(paths), 3)
        header = _read_csv(paths[1])[0]
        self.assertEqual(tuple(header), TRANSFORMED_COLUMNS)

    def test_write_bounds_golden_stable(self):
        config = ExperimentConfig.from_sources(
            overrides={"instance": 2, "t_grid": "geometric:100:1e9:12", "outputs": self.tmp}
        )
        first = [p.read_bytes() for p in write_bounds(config)]
        second = [p.read_bytes() for p in write_bounds(config)]
        self.assertEqual(first, second)
