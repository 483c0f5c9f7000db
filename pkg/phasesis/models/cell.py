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

from phasesis import schema
from phasesis.models import abc


class SweepCell(abc.Row, table=schema.SweepCell):
    """A cell of a sweep: one transmission law, one recovery law and one point of each mean grid.

    Attributes
    ----------
    cell_id: :class:`int`
        Position of the cell in the sweep.
    panel_trans: :class:`str`
        Transmission law menu entry.
    panel_rec: :class:`str`
        Recovery law menu entry.
    mu_t: :class:`float`
        Transmission mean.
    mu_r_norm: :class:`float`
        Value on the recovery axis.
    eta_a: :class:`float`
        Spectral abscissa of the bound matrix.
    bound_rate: :class:`float`
        The certified decay rate, ``-eta_a``.
    fit_l1_trans: :class:`float`
        L1 error of the transmission fit, if fitted.
    fit_l1_rec: :class:`float`
        L1 error of the recovery fit, if fitted.
    graph_hash: :class:`str`
        Hash of the network's canonical edge list.
    seed: :class:`int`
        The sweep seed.
    order_trans: :class:`int`
        Fit order of the transmission law.
    order_rec: :class:`int`
        Fit order of the recovery law.
    recovery_axis: :class:`str`
        ``normalized`` or ``raw``.
    error: :class:`str`
        Why the cell has no value.
    """
    __slots__ = (
        "cell_id",
        "panel_trans",
        "panel_rec",
        "mu_t",
        "mu_r_norm",
        "eta_a",
        "bound_rate",
        "fit_l1_trans",
        "fit_l1_rec",
        "graph_hash",
        "seed",
        "order_trans",
        "order_rec",
        "recovery_axis",
        "error",
    )

    def __repr__(self):
        return f"{self.__class__.__name__}(cell_id={self.cell_id},panel_trans={self.panel_trans!r}," \
               f"panel_rec={self.panel_rec!r},bound_rate={self.bound_rate!r})"


class PhaseTypeFit(abc.Row, table=schema.PhaseTypeFit):
    """A fitted law stored alongside a sweep.

    Attributes
    ----------
    law: :class:`str`
        The cache key of the fit.
    phases: :class:`int`
        Order of the fitted law.
    digest: :class:`str`
        Content hash of the fitted law.
    l1_error: :class:`float`
        L1 density error.
    log_likelihood: :class:`float`
        Mean log-likelihood per sample.
    iterations: :class:`int`
        EM iterations.
    content: :class:`str`
        JSON serialization of the fitted law.
    """
    __slots__ = (
        "law",
        "phases",
        "digest",
        "l1_error",
        "log_likelihood",
        "iterations",
        "content",
    )

    def __repr__(self):
        return f"{self.__class__.__name__}(law={self.law!r},phases={self.phases},l1_error={self.l1_error!r})"
