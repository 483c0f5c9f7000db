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
"""Stochastic simulation of the phase-type SIS process.

Two simulators are provided. :class:`EventDrivenSimulator` runs the Markov chain of phases with the Gillespie
direct method and is the one used for estimates. :class:`ReferenceSimulator` keeps the full indicator vectors of
every channel and recovery clock and fires every Poisson counter, active or not, checking after each jump that the
state still has the expected structure. It is much slower and meant as a correctness oracle on small models.
"""

import csv
import functools
import io
import math
from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple

import numpy as np
import scipy.stats

from phasesis.config import resolve
from phasesis.errors import AuditError, InsufficientDataError, SizeError

PHASE_MOVE_TRANS = "phase-move-trans"
PHASE_MOVE_REC = "phase-move-rec"
INFECTION_ATTEMPT = "infection-attempt"
INFECTION = "infection"
RECOVERY = "recovery"

EVENT_KINDS = (PHASE_MOVE_TRANS, PHASE_MOVE_REC, INFECTION_ATTEMPT, INFECTION, RECOVERY)
STATUS_EVENTS = (INFECTION, RECOVERY)

# Largest instance accepted by the reference simulator.
REFERENCE_MAX_NODES = 10
REFERENCE_MAX_ORDER = 10


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("An explicit seed is required")
    return np.random.default_rng(seed)


def replica_seed(seed, index):
    """The seed sequence of replica ``index``, stable when the number of replicas changes."""
    return np.random.SeedSequence(seed, spawn_key=(int(index),))


def _jump_table(subgenerator, exit_rates):
    """Cumulative jump probabilities of every phase: other phases first, absorption in the last column."""
    p = subgenerator.shape[0]
    out_rates = -np.diag(subgenerator)
    jumps = np.zeros((p, p + 1))
    jumps[:, :p] = subgenerator / out_rates[:, None]
    jumps[np.arange(p), np.arange(p)] = 0.0
    jumps[:, p] = exit_rates / out_rates
    cumulative = np.cumsum(jumps, axis=1)
    cumulative[:, -1] = 1.0
    return out_rates, cumulative


def _pick(cumulative, u):
    return min(int(np.searchsorted(cumulative, u, side="right")), len(cumulative) - 1)


class Event(NamedTuple):
    """A logged transition. Phases that do not apply are ``-1``."""
    time: float
    kind: str
    src: int
    dst: int
    phase_from: int
    phase_to: int


class EventLog:
    """The events of one simulated trajectory, in time order.

    Attributes
    ----------
    n: :class:`int`
        Number of nodes.
    initial_infected: :class:`tuple`
        Nodes infected at time zero.
    full: :class:`bool`
        Whether phase moves and unsuccessful attempts were recorded, or only infections and recoveries.
    end_time: :class:`float`
        Clock value when the run stopped.
    extinct: :class:`bool`
        Whether the run stopped in the all-susceptible state.
    """
    __slots__ = ("n", "initial_infected", "full", "end_time", "extinct", "_events")

    def __init__(self, n, initial_infected, full=True):
        self.n = n
        self.initial_infected = tuple(initial_infected)
        self.full = full
        self.end_time = 0.0
        self.extinct = False
        self._events = []

    def __len__(self):
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def __getitem__(self, item):
        return self._events[item]

    def __repr__(self):
        return f"{self.__class__.__name__}(events={len(self)},end_time={self.end_time!r},extinct={self.extinct})"

    def record(self, time, kind, src, dst=-1, phase_from=-1, phase_to=-1):
        """Appends an event, dropping non-status events when the log is not full."""
        if self.full or kind in STATUS_EVENTS:
            self._events.append(Event(time, kind, src, dst, phase_from, phase_to))

    def of_kind(self, *kinds):
        """:class:`list` of :class:`Event`: The events of the given kinds."""
        return [e for e in self._events if e.kind in kinds]

    def infected_counts(self, grid):
        """Number of infected nodes at every time of ``grid``.

        Times past :attr:`end_time` report the final state.
        """
        grid = np.asarray(grid, dtype=float)
        status = self.of_kind(*STATUS_EVENTS)
        times = np.array([e.time for e in status])
        steps = np.array([1 if e.kind == INFECTION else -1 for e in status], dtype=int)
        counts = len(self.initial_infected) + np.concatenate(([0], np.cumsum(steps)))
        return counts[np.searchsorted(times, grid, side="right")]

    def to_text(self):
        """One event per line: time with 17 significant digits, kind, source, target, phase before and after."""
        lines = ["# time kind src dst phase-from phase-to"]
        for e in self._events:
            lines.append(f"{e.time:.17g} {e.kind} {e.src} {e.dst} {e.phase_from} {e.phase_to}")
        lines.append(f"# end {self.end_time:.17g} {'extinct' if self.extinct else 'horizon'}")
        return "\n".join(lines) + "\n"


class SimState:
    """Phases of every node.

    Attributes
    ----------
    clock: :class:`float`
        Current time.
    recovery: :class:`list` of :class:`int`
        Recovery phase of every node, ``-1`` for susceptible nodes.
    channels: :class:`list`
        Per node, ``None`` when susceptible, otherwise the transmission phase toward each neighbor, in neighbor
        order.
    """
    __slots__ = ("clock", "recovery", "channels")

    def __init__(self, n):
        self.clock = 0.0
        self.recovery = [-1] * n
        self.channels = [None] * n

    def __repr__(self):
        return f"{self.__class__.__name__}(clock={self.clock!r},infected={self.infected_count})"

    def is_infected(self, node):
        return self.recovery[node] >= 0

    @property
    def infected_count(self):
        """:class:`int`: Number of infected nodes."""
        return sum(1 for phase in self.recovery if phase >= 0)

    def check(self, neighbors, p, q):
        """Raises :class:`AuditError` unless susceptible nodes carry no phase and infected nodes carry all of them."""
        for i, phase in enumerate(self.recovery):
            channels = self.channels[i]
            if phase < 0:
                if channels is not None:
                    raise AuditError(f"Susceptible node {i} has channel phases", {"node": i, "clock": self.clock})
                continue
            if phase >= q or channels is None or len(channels) != len(neighbors[i]) or \
                    any(not 0 <= m < p for m in channels):
                raise AuditError(f"Infected node {i} has an invalid phase assignment",
                                 {"node": i, "clock": self.clock, "recovery": phase, "channels": channels})


class EventDrivenSimulator:
    """Gillespie direct-method simulation of the chain of phases.

    Every infected node carries a recovery clock and one transmission clock per neighbor. The waiting time is drawn
    at the total rate, then the clock is chosen by scanning nodes in order, the recovery clock of a node before its
    channels, and a second uniform draw picks the transition of that clock.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        The model. Its initial infected set starts with phases drawn from the initial vectors.
    rng: :class:`numpy.random.Generator`
        The random source.
    settings: :class:`phasesis.config.Settings`, optional
        Supplies the rate audit interval and tolerance.

    Attributes
    ----------
    state: :class:`SimState`
        The current state.
    total_rate: :class:`float`
        Incrementally maintained sum of active clock rates.
    events: :class:`int`
        Events simulated so far.
    max_drift: :class:`float`
        Largest difference found by the audits between the incremental and recomputed total.
    """

    def __init__(self, model, rng, settings=None):
        self.settings = resolve(settings)
        self.model = model
        self.rng = rng
        self.neighbors = model.network.neighbors
        self.n = model.network.n
        trans, rec = model.transmission, model.recovery
        self._trans_out, self._trans_jump = _jump_table(trans.subgenerator, trans.exit)
        self._rec_out, self._rec_jump = _jump_table(rec.subgenerator, rec.exit)
        self._phi = np.cumsum(trans.initial)
        self._psi = np.cumsum(rec.initial)
        self._p, self._q = trans.order, rec.order
        self.state = SimState(self.n)
        self.node_rate = np.zeros(self.n)
        self.events = 0
        self.max_drift = 0.0
        for i in model.initial_infected:
            self._infect(i)
        self.total_rate = float(self.node_rate.sum())

    def _draw(self, cumulative):
        return _pick(cumulative, self.rng.random())

    def _node_rate(self, i):
        if self.state.recovery[i] < 0:
            return 0.0
        return float(self._rec_out[self.state.recovery[i]] + sum(self._trans_out[m] for m in self.state.channels[i]))

    def _update(self, i):
        new = self._node_rate(i)
        self.total_rate += new - self.node_rate[i]
        self.node_rate[i] = new

    def _infect(self, j):
        self.state.recovery[j] = self._draw(self._psi)
        self.state.channels[j] = [self._draw(self._phi) for _ in self.neighbors[j]]
        self.node_rate[j] = self._node_rate(j)
        return self.state.recovery[j]

    def audit(self):
        """Recomputes every rate from scratch and resynchronises the total.

        Raises
        ------
        AuditError
            The incremental total drifted beyond ``settings.audit_tol``.
        """
        self.state.check(self.neighbors, self._p, self._q)
        rates = np.array([self._node_rate(i) for i in range(self.n)])
        recomputed = float(rates.sum())
        drift = abs(recomputed - self.total_rate)
        self.max_drift = max(self.max_drift, drift)
        if drift > self.settings.audit_tol * max(1.0, recomputed):
            raise AuditError(f"Rate total drifted by {drift:.3g}",
                             {"events": self.events, "clock": self.state.clock, "incremental": self.total_rate,
                              "recomputed": recomputed})
        self.node_rate = rates
        self.total_rate = recomputed

    def step(self, log=None):
        """Applies the next event, the clock must already be advanced."""
        state = self.state
        cumulative = np.cumsum(self.node_rate)
        u = self.rng.random() * cumulative[-1]
        i = min(int(np.searchsorted(cumulative, u, side="right")), self.n - 1)
        while self.node_rate[i] <= 0:
            i -= 1
        remainder = u - (cumulative[i] - self.node_rate[i])
        ell = state.recovery[i]
        channels = state.channels[i]
        rate = self._rec_out[ell]
        if remainder < rate or not channels:
            target = self._draw(self._rec_jump[ell])
            if target < self._q:
                state.recovery[i] = target
                if log is not None:
                    log.record(state.clock, PHASE_MOVE_REC, i, -1, ell, target)
            else:
                state.recovery[i] = -1
                state.channels[i] = None
                if log is not None:
                    log.record(state.clock, RECOVERY, i, -1, ell, -1)
            self._update(i)
            return
        remainder -= rate
        k = 0
        for k, m in enumerate(channels):
            remainder -= self._trans_out[m]
            if remainder < 0:
                break
        m = channels[k]
        j = self.neighbors[i][k]
        target = self._draw(self._trans_jump[m])
        if target < self._p:
            channels[k] = target
            if log is not None:
                log.record(state.clock, PHASE_MOVE_TRANS, i, j, m, target)
            self._update(i)
            return
        channels[k] = self._draw(self._phi)
        self._update(i)
        if state.recovery[j] >= 0:
            if log is not None:
                log.record(state.clock, INFECTION_ATTEMPT, i, j, m, channels[k])
            return
        phase = self._infect(j)
        self.total_rate += self.node_rate[j]
        if log is not None:
            log.record(state.clock, INFECTION, i, j, m, phase)

    def run(self, horizon=math.inf, log=None, max_events=None):
        """Simulates until ``horizon``, extinction or ``max_events`` events.

        Returns
        -------
        :class:`str`
            ``"extinct"``, ``"horizon"`` or ``"cap"``.
        """
        interval = self.settings.audit_interval
        while True:
            if self.total_rate <= 0 or self.state.infected_count == 0:
                reason = "extinct"
                break
            if max_events is not None and self.events >= max_events:
                reason = "cap"
                break
            dt = self.rng.exponential(1.0) / self.total_rate
            if self.state.clock + dt > horizon:
                self.state.clock = float(horizon)
                reason = "horizon"
                break
            self.state.clock += dt
            self.step(log)
            self.events += 1
            if self.events % interval == 0:
                self.audit()
        if log is not None:
            log.end_time = self.state.clock
            log.extinct = reason == "extinct"
        return reason


def simulate_event_driven(model, horizon, seed, *, full=True, settings=None):
    """Simulates one trajectory with the event-driven simulator.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        The model.
    horizon: :class:`float`
        Positive end time. The run stops earlier when every node is susceptible.
    seed: :class:`int`, :class:`numpy.random.SeedSequence` or :class:`numpy.random.Generator`
        Random source. Identical seeds give identical logs.
    full: :class:`bool`
        Record every event, not only infections and recoveries.
    settings: :class:`phasesis.config.Settings`, optional
        Audit settings.

    Returns
    -------
    :class:`EventLog`
    """
    if not horizon > 0:
        raise ValueError(f"Horizon must be positive, got {horizon!r}")
    simulator = EventDrivenSimulator(model, _rng(seed), settings)
    log = EventLog(model.network.n, model.initial_infected, full)
    simulator.run(horizon, log)
    return log


class ExtinctionTime(NamedTuple):
    """First time every node is susceptible. When ``censored``, the event cap was hit first and ``time`` is the
    clock at that point."""
    time: float
    censored: bool
    events: int


def extinction_time(model, seed, *, max_events=None, settings=None):
    """Simulates until extinction.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        The model.
    seed:
        Random source.
    max_events: :class:`int`, optional
        Event cap, ``settings.event_cap`` when omitted.
    settings: :class:`phasesis.config.Settings`, optional
        Audit settings and default cap.

    Returns
    -------
    :class:`ExtinctionTime`
    """
    settings = resolve(settings)
    simulator = EventDrivenSimulator(model, _rng(seed), settings)
    reason = simulator.run(max_events=max_events or settings.event_cap)
    return ExtinctionTime(simulator.state.clock, reason == "cap", simulator.events)


# region Reference simulator
_TRANS_MOVE, _TRANS_EXIT, _REC_MOVE, _REC_EXIT = range(4)


class AuditReport:
    """Summary of the checks done by :class:`ReferenceSimulator`.

    Attributes
    ----------
    jumps: :class:`int`
        Counter firings.
    noop_jumps: :class:`int`
        Firings that left the state unchanged.
    checks: :class:`int`
        Invariant checks passed.
    violations: :class:`int`
        Always zero, a violation raises :class:`AuditError`.
    """
    __slots__ = ("jumps", "noop_jumps", "checks", "violations")

    def __init__(self):
        self.jumps = 0
        self.noop_jumps = 0
        self.checks = 0
        self.violations = 0

    def __repr__(self):
        return f"{self.__class__.__name__}(jumps={self.jumps},noop_jumps={self.noop_jumps},checks={self.checks})"

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}


class ReferenceSimulator:
    """Simulation of the indicator-vector representation, firing every Poisson counter.

    Every directed channel from ``i`` to ``j`` holds ``x`` in ``{0, e_1, …, e_p}`` and every node holds ``y`` in
    ``{0, f_1, …, f_q}``. A counter exists for each off-diagonal entry and each exit rate of both subgenerators, on
    every channel and every node, and they all fire at constant rates whether their phase is active or not. After
    each jump the simulator checks that:

    * every vector is zero or a unit vector;
    * the sum of a channel's vector equals the sum of its source node's vector;
    * a node becomes infected only through an active exit counter of a channel pointing at it, and recovers only
      through the active exit counter of its recovery clock.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        A model with at most 10 nodes and laws of order at most 10.
    rng: :class:`numpy.random.Generator`
        The random source.

    Raises
    ------
    SizeError
        The model is too large.
    """

    def __init__(self, model, rng, settings=None):
        self.settings = resolve(settings)
        network = model.network
        if network.n > REFERENCE_MAX_NODES or model.p > REFERENCE_MAX_ORDER or model.q > REFERENCE_MAX_ORDER:
            raise SizeError(f"Reference simulator is limited to {REFERENCE_MAX_NODES} nodes and order "
                            f"{REFERENCE_MAX_ORDER}", network.n, REFERENCE_MAX_NODES)
        self.model = model
        self.rng = rng
        self.n = network.n
        self.p, self.q = model.p, model.q
        self.channel_src = []
        self.channel_dst = []
        self.outgoing = []
        for i, nbs in enumerate(network.neighbors):
            self.outgoing.append(list(range(len(self.channel_src), len(self.channel_src) + len(nbs))))
            self.channel_src.extend([i] * len(nbs))
            self.channel_dst.extend(nbs)
        self._phi = np.cumsum(model.transmission.initial)
        self._psi = np.cumsum(model.recovery.initial)
        T, b = model.transmission.subgenerator, model.transmission.exit
        R, d = model.recovery.subgenerator, model.recovery.exit
        counters = []
        for c in range(len(self.channel_src)):
            counters += [(_TRANS_MOVE, c, m, m2, T[m, m2]) for m in range(self.p) for m2 in range(self.p)
                         if m != m2 and T[m, m2] > 0]
            counters += [(_TRANS_EXIT, c, m, -1, b[m]) for m in range(self.p) if b[m] > 0]
        for i in range(self.n):
            counters += [(_REC_MOVE, i, l1, l2, R[l1, l2]) for l1 in range(self.q) for l2 in range(self.q)
                         if l1 != l2 and R[l1, l2] > 0]
            counters += [(_REC_EXIT, i, l1, -1, d[l1]) for l1 in range(self.q) if d[l1] > 0]
        self.counters = counters
        rates = np.array([c[4] for c in counters])
        self.total_rate = float(rates.sum())
        self._cumulative = np.cumsum(rates) / self.total_rate
        self._cumulative[-1] = 1.0
        self.clock = 0.0
        self.x = np.zeros((len(self.channel_src), self.p))
        self.y = np.zeros((self.n, self.q))
        for i in model.initial_infected:
            self.y[i, _pick(self._psi, rng.random())] = 1.0
            for c in self.outgoing[i]:
                self.x[c, _pick(self._phi, rng.random())] = 1.0
        self.report = AuditReport()
        self._check(None, np.zeros(self.n), {"jump": 0})

    def _unit(self, cumulative, size):
        e = np.zeros(size)
        e[_pick(cumulative, self.rng.random())] = 1.0
        return e

    def _check(self, before, expected_change, context):
        for name, vectors in (("x", self.x), ("y", self.y)):
            if not np.all((vectors == 0) | (vectors == 1)) or np.any(vectors.sum(axis=1) > 1):
                raise AuditError(f"A vector of {name} is neither zero nor a unit vector", self._context(context))
        status = self.y.sum(axis=1)
        if not np.array_equal(self.x.sum(axis=1), status[self.channel_src]):
            raise AuditError("A channel's activity differs from its source node's status", self._context(context))
        if before is not None and not np.array_equal(status - before, expected_change):
            raise AuditError("A node changed status without the matching counter", self._context(context))
        self.report.checks += 1

    def _context(self, context):
        return dict(context, clock=self.clock, x=self.x.tolist(), y=self.y.tolist())

    def fire(self, index, log=None):
        """Fires counter ``index`` and audits the result."""
        kind, owner, a, b, _ = self.counters[index]
        before = self.y.sum(axis=1)
        expected = np.zeros(self.n)
        context = {"jump": self.report.jumps + 1, "counter": (kind, owner, a, b)}
        active = False
        if kind == _TRANS_MOVE:
            xa = self.x[owner, a]
            self.x[owner, b] += xa
            self.x[owner, a] -= xa
            active = xa == 1
            if active and log is not None:
                log.record(self.clock, PHASE_MOVE_TRANS, self.channel_src[owner], self.channel_dst[owner], a, b)
        elif kind == _TRANS_EXIT:
            src, dst = self.channel_src[owner], self.channel_dst[owner]
            xa = self.x[owner, a]
            restart = self._unit(self._phi, self.p)
            self.x[owner] += (restart - np.eye(self.p)[a]) * xa
            free = 1.0 - self.y[dst].sum()
            recovery = self._unit(self._psi, self.q)
            self.y[dst] += free * recovery * xa
            for c in self.outgoing[dst]:
                self.x[c] += free * self._unit(self._phi, self.p) * xa
            active = xa == 1
            if active:
                expected[dst] = free
                if log is not None:
                    if free:
                        log.record(self.clock, INFECTION, src, dst, a, int(np.argmax(recovery)))
                    else:
                        log.record(self.clock, INFECTION_ATTEMPT, src, dst, a, int(np.argmax(restart)))
        elif kind == _REC_MOVE:
            ya = self.y[owner, a]
            self.y[owner, b] += ya
            self.y[owner, a] -= ya
            active = ya == 1
            if active and log is not None:
                log.record(self.clock, PHASE_MOVE_REC, owner, -1, a, b)
        else:
            ya = self.y[owner, a]
            self.y[owner, a] -= ya
            for c in self.outgoing[owner]:
                self.x[c] -= ya * self.x[c]
            active = ya == 1
            if active:
                expected[owner] = -1.0
                if log is not None:
                    log.record(self.clock, RECOVERY, owner, -1, a, -1)
        self.report.jumps += 1
        if not active:
            self.report.noop_jumps += 1
        self._check(before, expected, context)

    def run(self, horizon=math.inf, log=None, max_jumps=None):
        """Fires counters until ``horizon``, extinction or ``max_jumps``.

        Returns
        -------
        :class:`AuditReport`
        """
        max_jumps = max_jumps or self.settings.event_cap
        while self.y.any() and self.report.jumps < max_jumps:
            dt = self.rng.exponential(1.0) / self.total_rate
            if self.clock + dt > horizon:
                self.clock = float(horizon)
                break
            self.clock += dt
            self.fire(_pick(self._cumulative, self.rng.random()), log)
        if log is not None:
            log.end_time = self.clock
            log.extinct = not self.y.any()
        return self.report


def simulate_reference_sde(model, horizon, seed, *, full=True, max_jumps=None, settings=None):
    """Simulates one trajectory with the reference simulator.

    ``horizon`` may be infinite, the run then stops at extinction.

    Returns
    -------
    :class:`tuple`
        The :class:`EventLog` and the :class:`AuditReport`.

    Raises
    ------
    AuditError
        The state lost its expected structure, with the jump context attached.
    SizeError
        The model is too large for the reference simulator.
    """
    if not horizon > 0:
        raise ValueError(f"Horizon must be positive, got {horizon!r}")
    simulator = ReferenceSimulator(model, _rng(seed), settings)
    log = EventLog(model.network.n, model.initial_infected, full)
    report = simulator.run(horizon, log, max_jumps)
    return log, report
# endregion


# region Estimates
class PrevalenceSeries:
    """Monte Carlo prevalence on a time grid.

    Attributes
    ----------
    grid: :class:`numpy.ndarray`
        Increasing times.
    mean: :class:`numpy.ndarray`
        Mean fraction of infected nodes over replicas.
    se: :class:`numpy.ndarray`
        Standard error of the mean.
    replicas: :class:`int`
        Number of replicas.
    samples: :class:`numpy.ndarray`, optional
        Per-replica prevalence, ``replicas × len(grid)``, kept for bootstrapping.
    """
    __slots__ = ("grid", "mean", "se", "replicas", "samples")

    def __init__(self, grid, mean, se, replicas, samples=None):
        self.grid = np.asarray(grid, dtype=float)
        self.mean = np.asarray(mean, dtype=float)
        self.se = np.asarray(se, dtype=float)
        self.replicas = int(replicas)
        self.samples = samples

    def __repr__(self):
        return f"{self.__class__.__name__}(points={self.grid.size},replicas={self.replicas})"

    @classmethod
    def from_samples(cls, grid, samples):
        """Aggregates a ``replicas × len(grid)`` matrix of per-replica prevalence."""
        samples = np.asarray(samples, dtype=float)
        replicas = samples.shape[0]
        return cls(grid, samples.mean(axis=0), samples.std(axis=0, ddof=1) / math.sqrt(replicas), replicas,
                   samples)

    def to_csv(self):
        """CSV text with header ``t,mean,se,replicas``, floats written to round-trip exactly."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["t", "mean", "se", "replicas"])
        for t, m, s in zip(self.grid, self.mean, self.se):
            writer.writerow([repr(float(t)), repr(float(m)), repr(float(s)), self.replicas])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Reads :meth:`to_csv` output, lines starting with ``#`` are skipped."""
        rows = list(csv.DictReader(line for line in text.splitlines() if not line.startswith("#")))
        if not rows:
            raise ValueError("Prevalence table is empty")
        return cls([float(r["t"]) for r in rows], [float(r["mean"]) for r in rows],
                   [float(r["se"]) for r in rows], int(rows[0]["replicas"]))


def _prevalence_replica(model, horizon, grid, seed, settings, index):
    rng = np.random.default_rng(replica_seed(seed, index))
    simulator = EventDrivenSimulator(model, rng, settings)
    log = EventLog(model.network.n, model.initial_infected, full=False)
    simulator.run(float(horizon), log)
    return log.infected_counts(grid) / model.network.n


def estimate_prevalence(model, horizon, replicas, grid, seed, *, workers=None, settings=None):
    """Estimates the mean prevalence over independent replicas.

    Replica ``k`` is seeded with ``SeedSequence(seed, spawn_key=(k,))``, so adding replicas keeps the earlier ones.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        The model.
    horizon: :class:`float`
        Simulation end time, at least the last grid point.
    replicas: :class:`int`
        At least 2.
    grid: array-like
        Increasing non-negative times.
    seed: :class:`int`
        Master seed.
    workers: :class:`int`, optional
        Number of worker processes. Replicas run in this process when omitted.
    settings: :class:`phasesis.config.Settings`, optional
        Audit settings.

    Returns
    -------
    :class:`PrevalenceSeries`
    """
    if replicas < 2:
        raise ValueError(f"At least 2 replicas are needed, got {replicas}")
    if seed is None:
        raise ValueError("An explicit seed is required")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("Grid must be a non-empty increasing sequence of non-negative times")
    if grid[-1] > horizon:
        raise ValueError("Grid extends past the horizon")
    job = functools.partial(_prevalence_replica, model, horizon, grid, seed, settings)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(job, range(replicas), chunksize=max(1, replicas // (4 * workers))))
    else:
        rows = [job(k) for k in range(replicas)]
    return PrevalenceSeries.from_samples(grid, np.vstack(rows))


class DecayEstimate(NamedTuple):
    """Slope of log prevalence with its confidence interval."""
    slope: float
    low: float
    high: float
    points: int
    intercept: float

    @property
    def half_width(self):
        """:class:`float`: Half the width of the confidence interval."""
        return (self.high - self.low) / 2


def estimate_decay_rate(series, band=(1e-3, 0.5), *, resamples=1000, seed=0, confidence=0.95):
    """Least-squares slope of log mean prevalence over the grid points inside ``band``.

    The confidence interval bootstraps replicas when the series keeps its samples, and otherwise uses the
    regression standard error. The regression interval is also used when no resample keeps two positive means.

    Raises
    ------
    InsufficientDataError
        Fewer than 5 grid points have their mean prevalence inside the band.
    """
    low, high = band
    mask = (series.mean >= low) & (series.mean <= high)
    points = int(mask.sum())
    if points < 5:
        raise InsufficientDataError(f"Only {points} grid points have prevalence in [{low}, {high}], need 5")
    t = series.grid[mask]
    fit = scipy.stats.linregress(t, np.log(series.mean[mask]))
    alpha = (1 - confidence) / 2
    slopes = []
    if series.samples is not None:
        rng = np.random.default_rng(seed)
        subset = series.samples[:, mask]
        for _ in range(resamples):
            means = subset[rng.integers(0, series.replicas, series.replicas)].mean(axis=0)
            usable = means > 0
            if usable.sum() >= 2:
                slopes.append(scipy.stats.linregress(t[usable], np.log(means[usable])).slope)
    if slopes:
        lo, hi = np.quantile(slopes, [alpha, 1 - alpha])
    else:
        spread = scipy.stats.t.ppf(1 - alpha, points - 2) * fit.stderr
        lo, hi = fit.slope - spread, fit.slope + spread
    return DecayEstimate(float(fit.slope), float(lo), float(hi), points, float(fit.intercept))
# endregion
