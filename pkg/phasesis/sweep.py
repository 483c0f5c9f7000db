#  Copyright 2026 The phasesis authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
"""Parameter sweeps of the certified decay rate over transmission and recovery laws and their means.

Each panel pairs a transmission law with a recovery law from the configured menus. Inside a panel, cells vary the
transmission mean along the horizontal axis and the recovery mean along the vertical axis. With the ``normalized``
binding the vertical value ``v`` gives a recovery mean of ``v / λmax(A)``, so that for exponential laws the
stability boundary is the diagonal ``v = μ_T``.
"""

import csv
import datetime
import io
import json
import os
import sqlite3
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

import phasesis
from phasesis import schema, stability
from phasesis.config import Settings
from phasesis.errors import PhasesisError
from phasesis.fitting import FitOptions, FitResult, FitTarget, fit_phase_type
from phasesis.models.cell import PhaseTypeFit, SweepCell
from phasesis.models.model import GenesisModel
from phasesis.models.phasetype import PhaseType
from phasesis.utils import format_float, parse_graph

SCHEMA_VERSION = 1

COLUMNS = ("panel_trans", "panel_rec", "mu_t", "mu_r_norm", "eta_A", "bound_rate", "fit_l1_trans", "fit_l1_rec",
           "graph_hash", "seed", "error", "order_trans", "order_rec", "recovery_axis")

DEFAULT_MENU = ("exp", "lognormal:1", "lognormal:2", "lognormal:4")
DEFAULT_GRID = tuple(round(0.5 + 0.05 * i, 10) for i in range(21))
RECOVERY_AXES = ("normalized", "raw")
SQLITE_HEADER = b"SQLite format 3\x00"


def _check_entry(entry):
    kind, _, arg = entry.partition(":")
    if kind == "exp" and not arg:
        return
    try:
        value = float(arg)
    except ValueError:
        raise ValueError(f"Invalid menu entry {entry!r}") from None
    if kind == "lognormal" and value > 0:
        return
    if kind == "erlang" and value >= 1 and value == int(value):
        return
    raise ValueError(f"Invalid menu entry {entry!r}, expected exp, lognormal:VARFACTOR or erlang:K")


def _grid(values, name):
    values = [float(v) for v in values]
    if not values:
        raise ValueError(f"{name} must not be empty")
    if any(not v > 0 for v in values):
        raise ValueError(f"Every value of {name} must be positive")
    return tuple(values)


class SweepConfig:
    """Configuration of a sweep, stored as a versioned JSON document.

    Attributes
    ----------
    graph: :class:`str`
        A generator description or an edge-list path, see :func:`phasesis.utils.parse_graph`.
    mu_grid: :class:`tuple` of :class:`float`
        Transmission means.
    mu_r_grid: :class:`tuple` of :class:`float`
        Values of the recovery axis.
    transmission: :class:`tuple` of :class:`str`
        Transmission menu: ``exp``, ``lognormal:VARFACTOR`` (variance ``VARFACTOR × mean²``) or ``erlang:K``.
    recovery: :class:`tuple` of :class:`str`
        Recovery menu, same entries.
    order_trans: :class:`int`
        Fit order of transmission laws.
    order_rec: :class:`int`
        Fit order of recovery laws.
    recovery_axis: :class:`str`
        ``normalized`` divides the recovery axis by the spectral radius to obtain the recovery mean, ``raw`` uses it
        directly.
    seed: :class:`int`
        Seed of every random step, recorded in the output.
    workers: :class:`int`, optional
        Worker threads, the number of CPUs when omitted.
    settings: :class:`phasesis.config.Settings`
        Caps and tolerances.
    output: :class:`str`, optional
        CSV output path.
    database: :class:`str`, optional
        SQLite output path.
    """
    __slots__ = ("graph", "mu_grid", "mu_r_grid", "transmission", "recovery", "order_trans", "order_rec",
                 "recovery_axis", "seed", "workers", "settings", "output", "database")

    def __init__(self, graph, *, mu_grid=DEFAULT_GRID, mu_r_grid=None, transmission=DEFAULT_MENU,
                 recovery=DEFAULT_MENU, order_trans=10, order_rec=10, recovery_axis="normalized", seed=0,
                 workers=None, settings=None, output=None, database=None):
        self.graph = str(graph)
        self.mu_grid = _grid(mu_grid, "mu_grid")
        self.mu_r_grid = _grid(mu_r_grid if mu_r_grid is not None else mu_grid, "mu_r_grid")
        self.transmission = tuple(transmission)
        self.recovery = tuple(recovery)
        if not self.transmission or not self.recovery:
            raise ValueError("Distribution menus must not be empty")
        for entry in self.transmission + self.recovery:
            _check_entry(entry)
        if int(order_trans) < 1 or int(order_rec) < 1:
            raise ValueError("Fit orders must be positive")
        self.order_trans = int(order_trans)
        self.order_rec = int(order_rec)
        if recovery_axis not in RECOVERY_AXES:
            raise ValueError(f"recovery_axis must be one of {', '.join(RECOVERY_AXES)}")
        self.recovery_axis = recovery_axis
        if seed is None:
            raise ValueError("A seed is required")
        self.seed = int(seed)
        if workers is not None and int(workers) < 1:
            raise ValueError("workers must be positive")
        self.workers = None if workers is None else int(workers)
        self.settings = settings if isinstance(settings, Settings) else Settings.from_dict(settings)
        self.output = output
        self.database = database

    def __repr__(self):
        return f"{self.__class__.__name__}(graph={self.graph!r},panels={self.panel_count}," \
               f"cells={self.cell_count})"

    @property
    def panel_count(self):
        """:class:`int`: Number of (transmission, recovery) pairs."""
        return len(self.transmission) * len(self.recovery)

    @property
    def cell_count(self):
        """:class:`int`: Number of cells of the sweep."""
        return self.panel_count * len(self.mu_grid) * len(self.mu_r_grid)

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "graph": self.graph,
            "mu_grid": list(self.mu_grid),
            "mu_r_grid": list(self.mu_r_grid),
            "transmission": list(self.transmission),
            "recovery": list(self.recovery),
            "order_trans": self.order_trans,
            "order_rec": self.order_rec,
            "recovery_axis": self.recovery_axis,
            "seed": self.seed,
            "workers": self.workers,
            "settings": self.settings.to_dict(),
            "output": self.output,
            "database": self.database,
        }

    @classmethod
    def from_dict(cls, data):
        """Builds a configuration from a parsed document.

        Raises
        ------
        ValueError
            The schema version is not supported, a field is unknown or invalid.
        """
        data = dict(data)
        version = data.pop("schema", None)
        if version != SCHEMA_VERSION:
            raise ValueError(f"Unsupported sweep configuration schema {version!r}, expected {SCHEMA_VERSION}")
        unknown = set(data) - set(cls.__slots__)
        if unknown:
            raise ValueError(f"Unknown configuration fields: {', '.join(sorted(unknown))}")
        if "graph" not in data:
            raise ValueError("The configuration must name a graph")
        graph = data.pop("graph")
        return cls(graph, **{k: v for k, v in data.items() if v is not None})

    @classmethod
    def load(cls, path):
        """Reads a configuration file. Relative edge-list paths are resolved against the file's directory."""
        with open(path) as f:
            data = json.load(f)
        config = cls.from_dict(data)
        candidate = os.path.join(os.path.dirname(os.path.abspath(path)), config.graph)
        if not os.path.isabs(config.graph) and os.path.exists(candidate):
            config.graph = candidate
        return config

    def replace(self, **overrides):
        """A copy with the given fields replaced, ``None`` values are ignored."""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return self.from_dict(data)


class FitCache:
    """Fits shared by the cells of a sweep.

    Laws are fitted once at unit mean per (law, order, options) key and rescaled to every mean, the L1 error
    of a density being unchanged by rescaling. Concurrent requests for the same key wait for a single fit.
    With a sweep database connection, fits stored under the same key are reused instead of refitted.
    """

    def __init__(self, settings, seed, options=None, conn=None):
        self.settings = settings
        self.seed = seed
        self.options = options or FitOptions()
        self.conn = conn
        self._lock = threading.Lock()
        self._key_locks = {}
        self._fits = {}

    def __len__(self):
        return len(self._fits)

    def __repr__(self):
        return f"{self.__class__.__name__}(fits={len(self)})"

    @property
    def fits(self):
        """:class:`dict`: Fit results keyed by cache key."""
        return dict(self._fits)

    def _key(self, factor, order):
        options = json.dumps(self.options.to_dict(), sort_keys=True)
        return f"lognormal:{factor!r}:{order}:{options}"

    def unit_fit(self, factor, order):
        """Fit of the unit-mean log-normal law with variance ``factor``."""
        key = self._key(factor, order)
        result = self._fits.get(key)
        if result is not None:
            return result
        with self._lock:
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            result = self._fits.get(key)
            if result is None:
                result = self._stored_fit(key)
            if result is None:
                rng = np.random.default_rng([self.seed, order, int(round(factor * 1000))])
                result = fit_phase_type(FitTarget.lognormal(1.0, factor), order, rng=rng, options=self.options,
                                        settings=self.settings)
            self._fits[key] = result
        return result

    def _stored_fit(self, key):
        if self.conn is None:
            return None
        record = PhaseTypeFit.get_by_field(self.conn, "law", key)
        if record is None:
            return None
        return FitResult(PhaseType.from_json(record.content), l1_error=record.l1_error,
                         log_likelihood=record.log_likelihood, iterations=record.iterations or 0)

    def law(self, entry, mean, order):
        """The law of a menu entry with the given mean.

        Returns
        -------
        :class:`tuple`
            The :class:`PhaseType` and the fit's L1 error, ``None`` for laws that are not fitted.
        """
        kind, _, arg = entry.partition(":")
        if kind == "exp":
            return PhaseType.exponential(1.0 / mean), None
        if kind == "erlang":
            k = int(float(arg))
            return PhaseType.erlang(k, k / mean), None
        result = self.unit_fit(float(arg), order)
        return result.phase_type.scaled(1.0 / mean), result.l1_error


class SweepTable:
    """Rows of a finished sweep.

    Attributes
    ----------
    rows: :class:`list` of :class:`dict`
        One row per cell, keyed by :data:`COLUMNS`, in sweep order.
    fits: :class:`dict`
        Fit results used by the sweep, keyed by cache key.
    config: :class:`SweepConfig`
        The configuration that produced the table.
    """
    __slots__ = ("rows", "fits", "config")

    def __init__(self, rows, fits=None, config=None):
        self.rows = rows
        self.fits = fits or {}
        self.config = config

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f"{self.__class__.__name__}(rows={len(self.rows)})"

    def to_csv(self, timestamp=True):
        """CSV text of the table.

        Parameters
        ----------
        timestamp: :class:`bool`
            Prepend a ``#`` line with the generation time, the only part that changes between identical runs.
        """
        out = io.StringIO()
        if timestamp:
            now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
            out.write(f"# generated {now} by phasesis {phasesis.__version__}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in self.rows:
            writer.writerow([format_float(row[c]) if isinstance(row[c], float) else
                             ("" if row[c] is None else row[c]) for c in COLUMNS])
        return out.getvalue()

    def save(self, path, timestamp=True):
        with open(path, "w", newline="") as f:
            f.write(self.to_csv(timestamp))

    def to_database(self, conn):
        """Writes cells, fits and the configuration to a SQLite database, replacing previous content."""
        schema.create_tables(conn)
        for cell_id, row in enumerate(self.rows):
            values = {c.lower(): row[c] for c in COLUMNS}
            SweepCell(cell_id=cell_id, **values).insert(conn)
        for key, result in self.fits.items():
            ph = result.phase_type
            PhaseTypeFit(law=key, phases=ph.order, digest=ph.digest(), l1_error=result.l1_error,
                         log_likelihood=result.log_likelihood, iterations=result.iterations,
                         content=ph.to_json()).insert(conn)
        if self.config is not None:
            schema.RunInfo.insert(conn, key="config", value=json.dumps(self.config.to_dict(), sort_keys=True))
        schema.RunInfo.insert(conn, key="version", value=phasesis.__version__)
        conn.commit()


def _compute_cell(network, radius, cache, settings, row):
    mu_t, v = row["mu_t"], row["mu_r_norm"]
    try:
        trans, row["fit_l1_trans"] = cache.law(row["panel_trans"], mu_t, row["order_trans"])
        mu_r = v / radius if row["recovery_axis"] == "normalized" else v
        rec, row["fit_l1_rec"] = cache.law(row["panel_rec"], mu_r, row["order_rec"])
        eta = stability.bound_abscissa(GenesisModel(network, trans, rec), settings)
        row["eta_A"] = eta
        row["bound_rate"] = -eta
    except (PhasesisError, ValueError) as e:
        row["error"] = f"{e.__class__.__name__}: {e}"
    return row


def _blank_row(config, graph_hash, trans, rec, mu_t, v):
    return {
        "panel_trans": trans,
        "panel_rec": rec,
        "mu_t": mu_t,
        "mu_r_norm": v,
        "eta_A": None,
        "bound_rate": None,
        "fit_l1_trans": None,
        "fit_l1_rec": None,
        "graph_hash": graph_hash,
        "seed": config.seed,
        "error": None,
        "order_trans": config.order_trans,
        "order_rec": config.order_rec,
        "recovery_axis": config.recovery_axis,
    }


def run_sweep(config, *, progress=None, options=None):
    """Computes the certified decay rate of every cell.

    Cell failures are recorded in the ``error`` column and the sweep continues.

    Parameters
    ----------
    config: :class:`SweepConfig`
        The sweep.
    progress: callable, optional
        Called with the number of cells finished after each cell.
    options: :class:`phasesis.fitting.FitOptions`, optional
        Fit options.

    Returns
    -------
    :class:`SweepTable`
        Rows in sweep order: transmission law, recovery law, transmission mean, recovery axis.
    """
    settings = config.settings
    network = parse_graph(config.graph)
    radius = network.spectral_radius(settings)
    graph_hash = network.graph_hash()
    cache = FitCache(settings, config.seed, options)
    rows = [_blank_row(config, graph_hash, trans, rec, mu_t, v)
            for trans in config.transmission
            for rec in config.recovery
            for mu_t in config.mu_grid
            for v in config.mu_r_grid]
    with ThreadPoolExecutor(max_workers=config.workers or os.cpu_count() or 1) as executor:
        futures = [executor.submit(_compute_cell, network, radius, cache, settings, row) for row in rows]
        for done, _ in enumerate(as_completed(futures), 1):
            if progress is not None:
                progress(done)
    return SweepTable(rows, cache.fits, config)


def _cell_text(value):
    if isinstance(value, float):
        return format_float(value)
    return "" if value is None else str(value)


def read_database(conn):
    """Reads the cells of a sweep database as the rows :func:`read_table` returns for the same sweep's CSV."""
    return [{c: _cell_text(getattr(cell, c.lower())) for c in COLUMNS}
            for cell in SweepCell.search(conn, sort_by="cell_id")]


def read_table(path):
    """Reads a sweep CSV, skipping ``#`` lines, or the cells of a sweep SQLite database.

    Returns
    -------
    :class:`list` of :class:`dict`
        Rows with every value as text.
    """
    with open(path, "rb") as f:
        is_database = f.read(len(SQLITE_HEADER)) == SQLITE_HEADER
    if is_database:
        conn = sqlite3.connect(path)
        try:
            return read_database(conn)
        finally:
            conn.close()
    with open(path, newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def recompute_cell(row, network, settings=None, options=None, conn=None):
    """Recomputes the certified decay rate of a CSV row from its provenance columns.

    Fits stored in the sweep database behind ``conn`` are reused, other laws are fitted again.

    Raises
    ------
    ValueError
        The network does not match the row's graph hash.
    """
    if network.graph_hash() != row["graph_hash"]:
        raise ValueError("The network does not match the row's graph hash")
    settings = settings or Settings()
    cache = FitCache(settings, int(row["seed"]), options, conn)
    cell = {
        "panel_trans": row["panel_trans"],
        "panel_rec": row["panel_rec"],
        "mu_t": float(row["mu_t"]),
        "mu_r_norm": float(row["mu_r_norm"]),
        "order_trans": int(row["order_trans"]),
        "order_rec": int(row["order_rec"]),
        "recovery_axis": row["recovery_axis"],
        "error": None,
    }
    cell = _compute_cell(network, network.spectral_radius(settings), cache, settings, cell)
    if cell["error"]:
        raise PhasesisError(cell["error"])
    return cell["bound_rate"]
