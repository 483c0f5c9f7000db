import json
import os
import sqlite3
import tempfile
import unittest
from concurrent.futures import ThreadPoolExecutor
from unittest import mock

import numpy as np

from phasesis import render
from phasesis.config import Settings
from phasesis.errors import RenderError
from phasesis.fitting import FitOptions
from phasesis.models import Network
from phasesis.models.cell import PhaseTypeFit, SweepCell
from phasesis.sweep import COLUMNS, FitCache, SweepConfig, read_database, read_table, recompute_cell, run_sweep
from phasesis.utils import parse_graph
from tests import resource_path

FAST = FitOptions(samples=20_000)
GEOMETRIC = "random_geometric:50:0.25:3"


def _save(table, directory, name="sweep.csv"):
    path = os.path.join(directory, name)
    table.save(path, timestamp=False)
    return path


def _zero_crossing(ys, column):
    """Where a column of certified rates, decreasing along ``ys``, reaches zero, clamped to the grid."""
    if column[0] <= 0:
        return ys[0]
    for k in range(ys.size - 1):
        a, b = column[k], column[k + 1]
        if b <= 0:
            return ys[k] + (ys[k + 1] - ys[k]) * a / (a - b)
    return ys[-1]


class TestSweepConfig(unittest.TestCase):
    def test_load(self):
        config = SweepConfig.load(resource_path("sweep_config.json"))
        self.assertTrue(os.path.isabs(config.graph))
        self.assertTrue(config.graph.endswith("path2.edges"))
        self.assertEqual(config.panel_count, 2)
        self.assertEqual(config.cell_count, 8)
        self.assertEqual(config.seed, 7)

    def test_defaults(self):
        config = SweepConfig("path:2")
        self.assertEqual(len(config.mu_grid), 21)
        self.assertEqual(config.mu_grid[0], 0.5)
        self.assertEqual(config.mu_grid[-1], 1.5)
        self.assertEqual(config.mu_r_grid, config.mu_grid)
        self.assertEqual(config.panel_count, 16)
        self.assertEqual(config.order_trans, 10)

    def test_round_trip(self):
        config = SweepConfig("cycle:5", mu_grid=[1.0, 2.0], transmission=["exp", "lognormal:2"], seed=3,
                             settings=Settings(bound_cap=100))
        restored = SweepConfig.from_dict(json.loads(json.dumps(config.to_dict())))
        self.assertEqual(restored.to_dict(), config.to_dict())
        self.assertEqual(restored.settings.bound_cap, 100)

    def test_replace(self):
        config = SweepConfig("path:2", seed=1)
        replaced = config.replace(seed=None, graph="path:3", recovery_axis="raw")
        self.assertEqual(replaced.seed, 1)
        self.assertEqual(replaced.graph, "path:3")
        self.assertEqual(replaced.recovery_axis, "raw")

    def test_schema_errors(self):
        data = SweepConfig("path:2").to_dict()
        with self.assertRaises(ValueError):
            SweepConfig.from_dict(dict(data, schema=2))
        with self.assertRaises(ValueError):
            SweepConfig.from_dict(dict(data, colour="red"))
        del data["graph"]
        with self.assertRaises(ValueError):
            SweepConfig.from_dict(data)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            SweepConfig("path:2", mu_grid=[])
        with self.assertRaises(ValueError):
            SweepConfig("path:2", mu_grid=[1.0, -0.5])
        with self.assertRaises(ValueError):
            SweepConfig("path:2", transmission=["weibull:2"])
        with self.assertRaises(ValueError):
            SweepConfig("path:2", recovery=["lognormal:0"])
        with self.assertRaises(ValueError):
            SweepConfig("path:2", recovery=["erlang:1.5"])
        with self.assertRaises(ValueError):
            SweepConfig("path:2", recovery_axis="log")
        with self.assertRaises(ValueError):
            SweepConfig("path:2", seed=None)


class TestFitCache(unittest.TestCase):
    def test_unit_fit_shared(self):
        cache = FitCache(Settings(), 0, FitOptions(samples=5000))
        first, l1 = cache.law("lognormal:2", 1.5, 3)
        second, l1_again = cache.law("lognormal:2", 0.5, 3)
        self.assertEqual(len(cache), 1)
        self.assertAlmostEqual(first.mean, 1.5, places=9)
        self.assertAlmostEqual(second.mean, 0.5, places=9)
        self.assertEqual(l1, l1_again)
        cache.law("lognormal:2", 1.0, 4)
        self.assertEqual(len(cache), 2)

    def test_closed_form_laws(self):
        cache = FitCache(Settings(), 0)
        exponential, l1 = cache.law("exp", 2.0, 10)
        self.assertIsNone(l1)
        self.assertAlmostEqual(exponential.exit[0], 0.5, places=14)
        erlang, _ = cache.law("erlang:3", 1.5, 10)
        self.assertEqual(erlang.order, 3)
        self.assertAlmostEqual(erlang.mean, 1.5, places=12)
        self.assertEqual(len(cache), 0)

    def test_concurrent_requests(self):
        cache = FitCache(Settings(), 0, FitOptions(samples=5000))
        with ThreadPoolExecutor(max_workers=8) as executor:
            results = list(executor.map(lambda _: cache.unit_fit(1.0, 3), range(8)))
        self.assertEqual(len(cache), 1)
        self.assertTrue(all(r is results[0] for r in results))


class TestRunSweep(unittest.TestCase):
    def test_single_cell(self):
        config = SweepConfig("path:2", mu_grid=[2.0], mu_r_grid=[1 / 1.5], transmission=["exp"], recovery=["exp"])
        table = run_sweep(config)
        self.assertEqual(len(table), 1)
        row = table.rows[0]
        self.assertIsNone(row["error"])
        self.assertAlmostEqual(row["bound_rate"], 1.0, delta=1e-12)
        self.assertEqual(row["eta_A"], -row["bound_rate"])

    def test_raw_axis(self):
        config = SweepConfig("path:3", mu_grid=[2.0], mu_r_grid=[0.25], transmission=["exp"], recovery=["exp"],
                             recovery_axis="raw")
        row = run_sweep(config).rows[0]
        self.assertAlmostEqual(row["bound_rate"], 4.0 - 0.5 * np.sqrt(2), delta=1e-10)

    def test_resource_config(self):
        table = run_sweep(SweepConfig.load(resource_path("sweep_config.json")))
        self.assertEqual(len(table), 8)
        self.assertTrue(all(row["error"] is None for row in table.rows))
        self.assertEqual([r["panel_trans"] for r in table.rows], ["exp"] * 4 + ["erlang:2"] * 4)

    def test_full_menu(self):
        config = SweepConfig("cycle:4", mu_grid=[0.5, 1.0], order_trans=3, order_rec=3, seed=1)
        done = []
        table = run_sweep(config, progress=done.append, options=FitOptions(samples=5000))
        self.assertEqual(len(table), 64)
        self.assertEqual(done[-1], 64)
        self.assertEqual(len({(r["panel_trans"], r["panel_rec"]) for r in table.rows}), 16)
        self.assertTrue(all(r["bound_rate"] is not None for r in table.rows))
        self.assertEqual(len(table.fits), 3)
        lognormal_rows = [r for r in table.rows if r["panel_trans"].startswith("lognormal")]
        self.assertTrue(all(r["fit_l1_trans"] is not None for r in lognormal_rows))

    def test_cell_failures_are_recorded(self):
        config = SweepConfig("complete:5", mu_grid=[1.0], transmission=["exp", "erlang:4"], recovery=["exp"],
                             settings=Settings(bound_cap=10))
        table = run_sweep(config)
        exponential, erlang = table.rows
        self.assertIsNone(exponential["error"])
        self.assertTrue(erlang["error"].startswith("SizeError"))
        self.assertIsNone(erlang["bound_rate"])
        self.assertIn("SizeError", table.to_csv(timestamp=False))

    def test_stable_output(self):
        config = SweepConfig("cycle:5", mu_grid=[0.5, 1.0, 1.5], transmission=["exp", "lognormal:1"],
                             recovery=["exp"], order_trans=4, seed=5, workers=4)
        first = run_sweep(config, options=FAST).to_csv(timestamp=False)
        second = run_sweep(config.replace(workers=1), options=FAST).to_csv(timestamp=False)
        self.assertEqual(first, second)
        self.assertEqual(first.splitlines()[0], ",".join(COLUMNS))
        self.assertTrue(run_sweep(config, options=FAST).to_csv().startswith("# generated "))

    def test_heavier_transmission_tails(self):
        config = SweepConfig(GEOMETRIC, mu_grid=[0.5, 0.75, 1.0, 1.25, 1.5],
                             transmission=["lognormal:1", "lognormal:2", "lognormal:4"], recovery=["exp"], seed=2)
        table = run_sweep(config, options=FAST)
        values = {}
        for row in table.rows:
            self.assertIsNone(row["error"])
            values[(row["panel_trans"], row["mu_t"], row["mu_r_norm"])] = row["bound_rate"]
        for mu_t in config.mu_grid:
            for v in config.mu_r_grid:
                rates = [values[(entry, mu_t, v)] for entry in config.transmission]
                self.assertGreaterEqual(rates[0], rates[1] - 1e-9, (mu_t, v))
                self.assertGreaterEqual(rates[1], rates[2] - 1e-9, (mu_t, v))

    def test_zero_contour_under_recovery_tails(self):
        grid = [0.5, 0.75, 1.0, 1.25, 1.5]
        config = SweepConfig(GEOMETRIC, mu_grid=grid, transmission=["exp"],
                             recovery=["exp", "lognormal:2", "lognormal:4"], seed=2)
        table = run_sweep(config, options=FAST)
        self.assertTrue(all(row["error"] is None for row in table.rows))
        contours = {}
        for entry in config.recovery:
            xs, ys, values = render.panel_grid(table.rows, "exp", entry)
            contours[entry] = [_zero_crossing(ys, values[:, k]) for k in range(xs.size)]
        np.testing.assert_allclose(contours["exp"], grid, atol=1e-9)
        for entry in ("lognormal:2", "lognormal:4"):
            shift = np.abs(np.subtract(contours[entry], contours["exp"]))
            self.assertTrue(np.all(shift < grid[1] - grid[0]), (entry, shift))

    def test_exponential_boundary(self):
        grid = [0.5, 0.75, 1.0, 1.25, 1.5]
        config = SweepConfig(GEOMETRIC, mu_grid=grid, transmission=["exp"], recovery=["exp"])
        xs, ys, values = render.panel_grid(run_sweep(config).rows, "exp", "exp")
        expected = np.sign(np.subtract.outer(1 / ys, 1 / xs))
        np.testing.assert_array_equal(np.sign(np.round(values, 9)), expected)

    def test_recompute_cells(self):
        network = Network.generate("random_geometric", 20, radius=0.4, seed=1)
        config = SweepConfig("random_geometric:20:0.4:1", mu_grid=[0.5, 1.0, 1.5],
                             transmission=["exp", "lognormal:2"], recovery=["erlang:2", "lognormal:1"],
                             order_trans=4, order_rec=3, seed=9)
        table = run_sweep(config, options=FAST)
        with tempfile.TemporaryDirectory() as directory:
            rows = read_table(_save(table, directory))
        self.assertEqual(len(rows), len(table))
        for index in np.random.default_rng(0).choice(len(rows), 5, replace=False):
            row = rows[index]
            value = recompute_cell(row, network, config.settings, FAST)
            self.assertEqual(repr(value), row["bound_rate"])
        with self.assertRaises(ValueError):
            recompute_cell(rows[0], Network.generate("path", 20), config.settings, FAST)

    def test_database(self):
        config = SweepConfig("cycle:4", mu_grid=[0.5, 1.0], transmission=["exp", "lognormal:2"], recovery=["exp"],
                             order_trans=3, seed=4)
        table = run_sweep(config, options=FitOptions(samples=5000))
        conn = sqlite3.connect(":memory:")
        table.to_database(conn)
        cells = SweepCell.search(conn, sort_by="cell_id")
        self.assertEqual(len(cells), len(table))
        self.assertEqual([c.bound_rate for c in cells], [r["bound_rate"] for r in table.rows])
        first = SweepCell.get_by_field(conn, "cell_id", 0)
        self.assertEqual(first.panel_trans, "exp")
        self.assertEqual(first.eta_a, table.rows[0]["eta_A"])
        self.assertEqual(len(SweepCell.search(conn, "panel_trans", "lognormal:2")), 4)
        fits = PhaseTypeFit.search(conn)
        self.assertEqual(len(fits), 1)
        self.assertLessEqual(fits[0].phases, 3)
        stored = json.loads(conn.execute("SELECT value FROM run_info WHERE key = 'config'").fetchone()[0])
        self.assertEqual(stored["seed"], 4)
        # Writing again replaces the previous content
        table.to_database(conn)
        self.assertEqual(len(SweepCell.search(conn)), len(table))
        with self.assertRaises(ValueError):
            SweepCell.search(conn, "colour", "red")
        conn.close()

    def test_database_rows(self):
        config = SweepConfig("cycle:4", mu_grid=[0.5, 1.0], transmission=["exp", "lognormal:2"], recovery=["exp"],
                             order_trans=3, seed=4)
        options = FitOptions(samples=5000)
        table = run_sweep(config, options=options)
        with tempfile.TemporaryDirectory() as directory:
            csv_rows = read_table(_save(table, directory))
            database = os.path.join(directory, "sweep.db")
            conn = sqlite3.connect(database)
            table.to_database(conn)
            conn.close()
            self.assertEqual(read_table(database), csv_rows)
            conn = sqlite3.connect(database)
            self.assertEqual(read_database(conn), csv_rows)
            row = next(r for r in csv_rows if r["panel_trans"] == "lognormal:2")
            with mock.patch("phasesis.sweep.fit_phase_type", side_effect=AssertionError("fitted again")):
                value = recompute_cell(row, parse_graph("cycle:4"), config.settings, options, conn)
            self.assertEqual(repr(value), row["bound_rate"])
            conn.close()


class TestRender(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        config = SweepConfig("path:2", mu_grid=[0.5, 1.0, 1.5], transmission=["exp", "erlang:2"], recovery=["exp"])
        cls.table = run_sweep(config)

    def test_panels(self):
        with tempfile.TemporaryDirectory() as directory:
            csv_path = _save(self.table, directory)
            paths = render.render_heatmap(csv_path, output_dir=os.path.join(directory, "svg"))
            self.assertEqual([os.path.basename(p) for p in paths], ["exp__exp.svg", "erlang-2__exp.svg"])
            with open(paths[0]) as f:
                content = f.read()
            self.assertIn("<svg", content)

    def test_deterministic(self):
        with tempfile.TemporaryDirectory() as directory:
            csv_path = _save(self.table, directory)
            first, = render.render_heatmap(csv_path, ("exp", "exp"), os.path.join(directory, "a"))
            second, = render.render_heatmap(csv_path, ("exp", "exp"), os.path.join(directory, "b"))
            with open(first, "rb") as a, open(second, "rb") as b:
                self.assertEqual(a.read(), b.read())

    def test_single_cell(self):
        config = SweepConfig("path:2", mu_grid=[1.0], transmission=["exp"], recovery=["exp"])
        with tempfile.TemporaryDirectory() as directory:
            csv_path = _save(run_sweep(config), directory)
            paths = render.render_heatmap(csv_path, output_dir=directory)
            self.assertEqual(len(paths), 1)
            self.assertTrue(os.path.getsize(paths[0]) > 0)

    def test_panel_grid(self):
        xs, ys, values = render.panel_grid(self.table.rows, "exp", "exp")
        np.testing.assert_array_equal(xs, [0.5, 1.0, 1.5])
        self.assertEqual(values.shape, (3, 3))
        # Diagonal cells sit on the boundary of exponential laws
        np.testing.assert_allclose(np.diag(values), 0.0, atol=1e-12)

    def test_errors(self):
        with tempfile.TemporaryDirectory() as directory:
            csv_path = _save(self.table, directory)
            with self.assertRaises(RenderError):
                render.render_heatmap(csv_path, ("exp", "lognormal:4"), directory)
            broken = os.path.join(directory, "broken.csv")
            with open(broken, "w") as f:
                f.write("panel_trans,panel_rec,mu_t\nexp,exp,1.0\n")
            with self.assertRaises(RenderError) as cm:
                render.render_heatmap(broken, output_dir=directory)
            self.assertIn("bound_rate", str(cm.exception))
            empty = os.path.join(directory, "empty.csv")
            with open(empty, "w") as f:
                f.write(",".join(COLUMNS) + "\n")
            with self.assertRaises(RenderError):
                render.render_heatmap(empty, output_dir=directory)

    def test_file_names(self):
        self.assertEqual(render.panel_file_name("lognormal:2", "exp"), "lognormal-2__exp.svg")
