import json
import os
import tempfile
import unittest
from pathlib import Path

from kglab import (
    ConfigError,
    ExperimentConfig,
    FigureKind,
    catalog,
    geometric_grid,
    load_config_file,
    parse_grid,
    resolve_instance,
)


class GridTests(unittest.TestCase):
    def test_list(self):
        self.assertEqual(parse_grid("list:3,1,2.7,3"), [1, 2, 3])

    def test_geometric(self):
        grid = parse_grid("geometric:100:1e9:40")
        self.assertEqual(grid[0], 100)
        self.assertEqual(grid[-1], 1_000_000_000)
        self.assertEqual(len(grid), 40)
        self.assertEqual(grid, sorted(set(grid)))

    def test_geometric_dedupes(self):
        grid = geometric_grid(1, 3, 10)
        self.assertEqual(grid, [1, 2, 3])
        self.assertEqual(geometric_grid(5, 500, 1), [5])

    def test_bad_specs(self):
        bad = (
            "geometric:1:10",
            "geometric:10:1:5",
            "geometric:1:10:2.5",
            "list:",
            "list:0,5",
            "log:1:2:3",
            "list:a",
        )
        for spec in bad:
            with self.assertRaises(ConfigError, msg=spec):
                parse_grid(spec)


class ResolveInstanceTests(unittest.TestCase):
    def test_catalog_refs(self):
        self.assertEqual(resolve_instance(2), catalog(2))
        self.assertEqual(resolve_instance("3"), catalog(3))

    def test_inline(self):
        inst = resolve_instance({"means": [0, 1], "stds": [1, 1]})
        self.assertEqual(inst.k, 2)

    def test_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "inst.json")
            with open(path, "w") as f:
                json.dump({"means": [0, 2, 1], "stds": [1, 1, 1]}, f)
            inst = resolve_instance(path)
            self.assertEqual(inst.best, 1)
            self.assertEqual(inst.label, "inst.json")

    def test_missing_file(self):
        with self.assertRaises(OSError):
            resolve_instance("/nonexistent/instance.json")


class ExperimentConfigTests(unittest.TestCase):
    def test_defaults(self):
        config = ExperimentConfig.from_sources(overrides={"instance": 1})
        self.assertEqual(config.rounds, 10_000)
        self.assertEqual(config.n0, 5)
        self.assertEqual(config.replications, 1000)
        self.assertEqual(config.kind, FigureKind.SAMPLING_RATES)
        cps = config.checkpoint_rounds()
        self.assertEqual(cps[0], 50)
        self.assertEqual(cps[-1], 10_000)
        self.assertLessEqual(len(cps), 30)
        self.assertEqual(config.bound_grid(), cps)

    def test_flags_override_file(self):
        file_values = {"instance": 1, "rounds": 500, "seed": 9, "kind": "pe", "outputs": "out"}
        config = ExperimentConfig.from_sources(file_values, {"rounds": 800, "seed": None})
        self.assertEqual(config.rounds, 800)
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.kind, FigureKind.PE)
        self.assertEqual(config.outputs, Path("out"))

    def test_validation(self):
        bad = (
            {"instance": 1, "rounds": 49},
            {"instance": 1, "n0": 0},
            {"instance": 1, "replications": 0},
            {"instance": 1, "seed": -1},
            {"instance": 1, "arms": [0]},
            {"instance": 1, "arms": [11]},
            {"instance": 1, "rounds": 1.5},
            {"instance": 1, "checkpoints": "list:10,100"},
            {"instance": 1, "kind": "histogram"},
            {"instance": 1, "colour": "red"},
            {"rounds": 100},
        )
        for overrides in bad:
            with self.assertRaises(ValueError, msg=str(overrides)):
                ExperimentConfig.from_sources(overrides=overrides)

    def test_t_grid(self):
        config = ExperimentConfig.from_sources(overrides={"instance": 1, "t_grid": "list:10,100"})
        self.assertEqual(config.bound_grid(), [10, 100])

    def test_load_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "config.json")
            with open(path, "w") as f:
                json.dump({"instance": 2, "rounds": 300}, f)
            self.assertEqual(load_config_file(path), {"instance": 2, "rounds": 300})
            with open(path, "w") as f:
                json.dump({"instance": 2, "horizon": 300}, f)
            with self.assertRaises(ConfigError):
                load_config_file(path)
            with open(path, "w") as f:
                f.write("{nope")
            with self.assertRaises(ConfigError):
                load_config_file(path)
