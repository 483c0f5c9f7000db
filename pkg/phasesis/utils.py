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
"""Parsing of the compact law and graph descriptions used on the command line and in sweep configurations."""

import os

import numpy as np
import scipy.stats

from phasesis.fitting import FitTarget, fit_phase_type
from phasesis.models.network import Network
from phasesis.models.phasetype import PhaseType


def format_float(value):
    """Formats a float with the shortest representation that reads back exactly.

    Parameters
    ----------
    value: :class:`float`
        The value.

    Returns
    -------
    :class:`str`
        The formatted value, or an empty string for ``None``.
    """
    if value is None:
        return ""
    return repr(float(value))


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"Invalid {what}: {text!r}") from None


def law_requires_seed(spec):
    """Whether building the law from ``spec`` involves a fit, for which the command line demands a seed."""
    return spec.split(":", 1)[0].lower() == "lognormal"


def parse_law(spec, *, order=10, rng=None, options=None, settings=None):
    """Builds a phase-type law from its compact description.

    Accepted forms are ``exp:RATE``, ``erlang:K:RATE``, ``hyperexp:W1,W2,…:R1,R2,…``,
    ``hypererlang:W1,…:K1,…:R1,…``, ``lognormal:MEAN:VARFACTOR[:ORDER]`` and ``ph:FILE.json``. A log-normal law has
    variance ``VARFACTOR × MEAN²`` and is fitted with ``ORDER`` phases, ``order`` when omitted.

    Parameters
    ----------
    spec: :class:`str`
        The description.
    order: :class:`int`
        Default fit order.
    rng: :class:`numpy.random.Generator`, optional
        Random source passed to the fit.
    options: :class:`phasesis.fitting.FitOptions`, optional
        Fit options.
    settings: :class:`phasesis.config.Settings`, optional
        Fit settings.

    Returns
    -------
    :class:`tuple`
        The :class:`PhaseType` and the :class:`phasesis.fitting.FitResult`, ``None`` unless the law was fitted.

    Raises
    ------
    ValueError
        The description is malformed.
    """
    kind, _, rest = spec.partition(":")
    kind = kind.lower()
    parts = rest.split(":") if rest else []
    try:
        if kind in ("exp", "exponential") and len(parts) == 1:
            return PhaseType.exponential(float(parts[0])), None
        if kind == "erlang" and len(parts) == 2:
            return PhaseType.erlang(int(parts[0]), float(parts[1])), None
        if kind == "hyperexp" and len(parts) == 2:
            return PhaseType.hyperexponential(_floats(parts[0], "weights"), _floats(parts[1], "rates")), None
        if kind == "hypererlang" and len(parts) == 3:
            shapes = [int(v) for v in parts[1].split(",")]
            return PhaseType.hyper_erlang(_floats(parts[0], "weights"), shapes, _floats(parts[2], "rates")), None
        if kind == "lognormal" and len(parts) in (2, 3):
            mean, factor = float(parts[0]), float(parts[1])
            if mean <= 0 or factor <= 0:
                raise ValueError("Log-normal mean and variance factor must be positive")
            fit_order = int(parts[2]) if len(parts) == 3 else order
            result = fit_phase_type(FitTarget.lognormal(mean, factor * mean ** 2), fit_order, rng=rng,
                                    options=options, settings=settings)
            return result.phase_type, result
        if kind == "ph" and rest:
            with open(rest) as f:
                return PhaseType.from_json(f.read()), None
    except (TypeError, KeyError) as e:
        raise ValueError(f"Invalid law {spec!r}: {e}") from e
    raise ValueError(f"Invalid law {spec!r}")


def parse_target(spec):
    """Builds a fit target from its compact description.

    Accepted forms are ``lognormal:MEAN:VARFACTOR``, ``exp:RATE``, ``erlang:K:RATE``, ``samples:FILE`` (whitespace
    separated values) and ``grid:FILE`` (two columns, time and density).

    Returns
    -------
    :class:`phasesis.fitting.FitTarget`

    Raises
    ------
    ValueError
        The description is malformed.
    """
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    kind = kind.lower()
    if kind == "lognormal" and len(parts) == 2:
        mean, factor = float(parts[0]), float(parts[1])
        if mean <= 0 or factor <= 0:
            raise ValueError("Log-normal mean and variance factor must be positive")
        return FitTarget.lognormal(mean, factor * mean ** 2)
    if kind in ("exp", "exponential") and len(parts) == 1:
        rate = float(parts[0])
        if rate <= 0:
            raise ValueError("Rate must be positive")
        return FitTarget.from_distribution(scipy.stats.expon(scale=1 / rate), f"exp:{rate!r}")
    if kind == "erlang" and len(parts) == 2:
        k, rate = int(parts[0]), float(parts[1])
        if k < 1 or rate <= 0:
            raise ValueError("Erlang shape and rate must be positive")
        return FitTarget.from_distribution(scipy.stats.gamma(k, scale=1 / rate), f"erlang:{k}:{rate!r}")
    if kind == "samples" and rest:
        return FitTarget.from_samples(np.loadtxt(rest, ndmin=1), label=f"samples:{os.path.basename(rest)}")
    if kind == "grid" and rest:
        table = np.loadtxt(rest, ndmin=2)
        if table.shape[1] != 2:
            raise ValueError("A density grid file needs two columns")
        return FitTarget.from_grid(table[:, 0], table[:, 1], label=f"grid:{os.path.basename(rest)}")
    raise ValueError(f"Invalid fit target {spec!r}")


def parse_graph(spec):
    """Builds a network from a generator description or an edge-list file.

    Generator descriptions are ``path:N``, ``cycle:N``, ``complete:N``, ``erdos_renyi:N:PROB:SEED`` and
    ``random_geometric:N:RADIUS:SEED``. Anything else is read as the path of an edge-list file.

    Returns
    -------
    :class:`Network`

    Raises
    ------
    ValueError
        Malformed description or invalid edge list.
    FileNotFoundError
        The file does not exist.
    """
    kind, _, rest = spec.partition(":")
    if kind in ("path", "cycle", "complete", "erdos_renyi", "random_geometric") and not os.path.exists(spec):
        parts = rest.split(":") if rest else []
        try:
            if kind in ("path", "cycle", "complete") and len(parts) == 1:
                return Network.generate(kind, int(parts[0]))
            if kind == "erdos_renyi" and len(parts) == 3:
                return Network.generate(kind, int(parts[0]), prob=float(parts[1]), seed=int(parts[2]))
            if kind == "random_geometric" and len(parts) == 3:
                return Network.generate(kind, int(parts[0]), radius=float(parts[1]), seed=int(parts[2]))
        except ValueError as e:
            raise ValueError(f"Invalid graph {spec!r}: {e}") from e
        raise ValueError(f"Invalid graph {spec!r}")
    with open(spec) as f:
        return Network.load(f.read())
