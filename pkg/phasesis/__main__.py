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

import datetime
import sqlite3
import sys
import time

import click
import colorama
import numpy as np

from phasesis import __version__, render, stability, sweep
from phasesis.errors import PhasesisError
from phasesis.fitting import FitOptions, fit_phase_type
from phasesis.models import GenesisModel
from phasesis.simulation import estimate_prevalence, simulate_event_driven
from phasesis.utils import format_float, law_requires_seed, parse_graph, parse_law, parse_target

EXIT_USAGE = 1
EXIT_FAILURE = 2

colorama.init()


def progress_bar(iterable, label, length, **kwargs):
    return click.progressbar(iterable=iterable, length=length, label=label, fill_char="█", empty_char="░",
                             show_pos=True, bar_template='%(label)s [\33[33m%(bar)s\33[0m] %(info)s',
                             file=sys.stderr, **kwargs)


def status(message, color=32):
    click.echo(f"\33[{color}m{message}\033[0m", err=True)


def _nodes(text):
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected comma separated node ids, got {text!r}") from None


def _model(graph, trans, rec, order, seed, initial):
    for spec in (trans, rec):
        if law_requires_seed(spec) and seed is None:
            raise click.UsageError(f"Law {spec!r} is fitted, --seed is required")
    rng = np.random.default_rng(seed) if seed is not None else None
    try:
        network = parse_graph(graph)
        transmission, _ = parse_law(trans, order=order, rng=rng)
        recovery, _ = parse_law(rec, order=order, rng=rng)
        return GenesisModel(network, transmission, recovery, _nodes(initial))
    except (ValueError, OSError) as e:
        raise click.UsageError(str(e)) from e


def model_options(f):
    f = click.option('--initial', help="Comma separated initially infected nodes, all nodes by default.")(f)
    f = click.option('-p', '--order', help="Phases of fitted laws.", default=10, show_default=True)(f)
    f = click.option('--rec', help="Recovery law, e.g. exp:1.5 or lognormal:1:2.", required=True)(f)
    f = click.option('--trans', help="Transmission law, e.g. exp:0.5 or erlang:2:2.", required=True)(f)
    f = click.option('-g', '--graph', help="Edge-list file or generator, e.g. path:2.", required=True)(f)
    return f


@click.group(context_settings={'help_option_names': ['-h', '--help']})
@click.version_option(__version__, '-V', '--version')
def cli():
    pass


@cli.command(name="fit-ph")
@click.option('-t', '--target', help="Target law, e.g. lognormal:1:2 or samples:FILE.", required=True)
@click.option('-p', '--order', help="Maximum number of phases.", default=10, show_default=True)
@click.option('--seed', help="Random seed.", type=int, required=True)
@click.option('--samples', help="Number of target samples.", type=int)
@click.option('-o', '--output', help="Write the fitted law to this JSON file instead of printing it.")
def fit_ph(target, order, seed, samples, output):
    """Fits a phase-type law to a target distribution."""
    start = time.perf_counter()
    try:
        fit_target = parse_target(target)
    except (ValueError, OSError) as e:
        raise click.UsageError(str(e)) from e
    result = fit_phase_type(fit_target, order, rng=np.random.default_rng(seed), options=FitOptions(samples=samples))
    content = result.phase_type.to_json()
    if output:
        with open(output, "w") as f:
            f.write(content + "\n")
    else:
        click.echo(content)
    status(f"Fitted {result.phase_type.order} phases, shapes {list(result.shapes)}, L1 error "
           f"{format_float(result.l1_error)} in {time.perf_counter() - start:.2f} seconds.")


@cli.command(name="bound")
@model_options
@click.option('--seed', help="Random seed, required for fitted laws.", type=int)
@click.option('--report', help="Write a stability report to this JSON file.")
def bound(graph, trans, rec, order, initial, seed, report):
    """Prints the certified decay rate −η(𝓐)."""
    model = _model(graph, trans, rec, order, seed, initial)
    click.echo(format_float(stability.decay_rate_bound(model)))
    if report:
        with open(report, "w") as f:
            f.write(stability.analyze(model, exact=False).to_json() + "\n")


@cli.command(name="exact")
@model_options
@click.option('--seed', help="Random seed, required for fitted laws.", type=int)
@click.option('--report', help="Write a stability report to this JSON file.")
def exact(graph, trans, rec, order, initial, seed, report):
    """Prints the exact decay rate −r and the number of states of the exact chain."""
    model = _model(graph, trans, rec, order, seed, initial)
    space = stability.enumerate_exact_states(model)
    click.echo(format_float(stability.exact_decay_rate(model, space=space)))
    click.echo(f"states: {space.count}")
    if report:
        with open(report, "w") as f:
            f.write(stability.analyze(model, space=space).to_json() + "\n")


@cli.command(name="simulate")
@model_options
@click.option('--horizon', help="Simulation end time.", type=float, required=True)
@click.option('--replicas', help="Number of replicas.", type=int, default=1000, show_default=True)
@click.option('--points', help="Number of grid points in [0, horizon].", type=int, default=101, show_default=True)
@click.option('--seed', help="Master random seed.", type=int, required=True)
@click.option('--workers', help="Worker processes.", type=int)
@click.option('-o', '--output', help="Write the prevalence CSV here instead of printing it.")
@click.option('--events', help="Write the event log of one trajectory to this file.")
@click.option('--no-timestamp', help="Omit the timestamp header line.", is_flag=True)
def simulate(graph, trans, rec, order, initial, horizon, replicas, points, seed, workers, output, events,
             no_timestamp):
    """Estimates the prevalence over time by Monte Carlo simulation."""
    model = _model(graph, trans, rec, order, seed, initial)
    if horizon <= 0 or replicas < 2 or points < 2:
        raise click.UsageError("--horizon must be positive, --replicas and --points at least 2")
    start = time.perf_counter()
    grid = np.linspace(0.0, horizon, points)
    series = estimate_prevalence(model, horizon, replicas, grid, seed, workers=workers)
    content = series.to_csv()
    if not no_timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        content = f"# generated {now} by phasesis {__version__}\n" + content
    if output:
        with open(output, "w", newline="") as f:
            f.write(content)
    else:
        click.echo(content, nl=False)
    if events:
        with open(events, "w") as f:
            f.write(simulate_event_driven(model, horizon, seed).to_text())
    status(f"Simulated {replicas:,} replicas in {time.perf_counter() - start:.2f} seconds.")


@cli.command(name="sweep")
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('-g', '--graph', help="Override the configured graph.")
@click.option('--seed', help="Override the configured seed.", type=int)
@click.option('--workers', help="Worker threads.", type=int)
@click.option('--recovery-axis', type=click.Choice(sweep.RECOVERY_AXES), help="Override the recovery axis binding.")
@click.option('-o', '--output', help="CSV output file.")
@click.option('-db', '--database', help="Also store the results in this SQLite file.")
@click.option('--no-timestamp', help="Omit the timestamp header line.", is_flag=True)
def run_sweep(config_path, graph, seed, workers, recovery_axis, output, database, no_timestamp):
    """Computes the certified decay rate over a grid of laws and means."""
    try:
        config = sweep.SweepConfig.load(config_path).replace(graph=graph, seed=seed, workers=workers,
                                                             recovery_axis=recovery_axis, output=output,
                                                             database=database)
    except (ValueError, OSError) as e:
        raise click.UsageError(str(e)) from e
    start = time.perf_counter()
    with progress_bar(None, "Computing cells", config.cell_count) as bar:
        table = sweep.run_sweep(config, progress=lambda done: bar.update(1))
    failed = sum(1 for row in table.rows if row["error"])
    if failed:
        status(f"\t{failed:,} cells failed, see the error column.", 31)
    content = table.to_csv(timestamp=not no_timestamp)
    if config.output:
        with open(config.output, "w", newline="") as f:
            f.write(content)
    else:
        click.echo(content, nl=False)
    if config.database:
        conn = sqlite3.connect(config.database)
        with conn:
            table.to_database(conn)
        conn.close()
    status(f"Computed {len(table):,} cells in {time.perf_counter() - start:.2f} seconds.")


@cli.command(name="render")
@click.argument('csv_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--panel', help="Panel to render as TRANS/REC, e.g. exp/lognormal:2. All panels by default.")
@click.option('-o', '--output-dir', help="Directory for the SVG files.", default=".", show_default=True)
def render_cmd(csv_path, panel, output_dir):
    """Renders sweep panels as SVG heatmaps from a sweep CSV or database."""
    selector = None
    if panel:
        if "/" not in panel:
            raise click.UsageError("--panel must be written TRANS/REC")
        selector = tuple(panel.split("/", 1))
    try:
        paths = render.render_heatmap(csv_path, selector, output_dir)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    for path in paths:
        click.echo(path)


def main(argv=None):
    """Runs the command line and returns its exit status.

    Returns 0 on success, 1 on usage errors and 2 on numerical failures or exceeded caps.
    """
    try:
        cli.main(args=argv, prog_name="phasesis", standalone_mode=False)
    except click.exceptions.Abort:
        status("Aborted.", 31)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except PhasesisError as e:
        status(f"{e.__class__.__name__}: {e}", 31)
        return EXIT_FAILURE
    return 0


cli_dispatch = main


if __name__ == "__main__":
    sys.exit(main())
