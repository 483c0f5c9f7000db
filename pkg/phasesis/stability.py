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
"""Stability analysis of the infection-free state.

Two quantities are computed. The bound matrix gives a decay rate that certifies stability whenever it is positive,
at the cost of a matrix with ``n·p·q`` rows. The exact decay rate comes from the full Markov chain over every joint
configuration of phases, whose size grows like ``∏(1 + q·p^deg)`` and is only practical on small graphs.
"""

import itertools
import math

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

import phasesis
from phasesis import kernel
from phasesis.config import resolve
from phasesis.errors import NumericalError, SizeError
from phasesis.models.report import StabilityReport, Verdict


# region Bound matrix
def bound_dimension(model):
    """:class:`int`: Rows of the bound matrix, ``n·p·q``."""
    return model.network.n * model.p * model.q


def build_bound_matrix(model, settings=None, sparse=False):
    """Assembles the bound matrix.

    .. math::

        \\mathcal{A} = I_n \\otimes (T^T \\oplus R^T + (\\varphi b^T) \\otimes I_q)
        + A \\otimes (\\varphi b^T) \\otimes (\\psi 1_q^T)

    where ``b = -T1`` is the transmission exit vector. For exponential laws it reduces to ``βA - δI``.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        The model.
    settings: :class:`phasesis.config.Settings`, optional
        Supplies ``bound_cap``.
    sparse: :class:`bool`
        Return a CSR matrix instead of a dense array.

    Returns
    -------
    :class:`numpy.ndarray` or :class:`scipy.sparse.csr_matrix`
        A Metzler matrix of dimension ``n·p·q``.

    Raises
    ------
    SizeError
        The dimension exceeds ``settings.bound_cap``.
    """
    settings = resolve(settings)
    dim = bound_dimension(model)
    if dim > settings.bound_cap:
        raise SizeError(f"Bound matrix would have n·p·q = {dim} rows, above the cap of {settings.bound_cap}", dim,
                        settings.bound_cap)
    trans, rec = model.transmission, model.recovery
    q = rec.order
    restart = np.outer(trans.initial, trans.exit)
    local = kernel.kron_sum(trans.subgenerator.T, rec.subgenerator.T) + kernel.kron(restart, np.eye(q))
    coupling = kernel.kron(restart, np.outer(rec.initial, np.ones(q)))
    adjacency = model.network.adjacency
    if sparse:
        matrix = scipy.sparse.kron(scipy.sparse.identity(model.network.n), local) + \
            scipy.sparse.kron(scipy.sparse.csr_matrix(adjacency), coupling)
        return scipy.sparse.csr_matrix(matrix)
    return np.kron(np.eye(model.network.n), local) + np.kron(adjacency, coupling)


def bound_abscissa(model, settings=None):
    """The spectral abscissa ``η(𝓐)`` of the bound matrix."""
    settings = resolve(settings)
    sparse = bound_dimension(model) > settings.dense_eig_max
    return kernel.spectral_abscissa(build_bound_matrix(model, settings, sparse=sparse), settings=settings)


def decay_rate_bound(model, settings=None):
    """The certified decay rate ``-η(𝓐)``.

    A positive value certifies exponential mean stability with that rate, a non-positive value certifies nothing.

    Raises
    ------
    SizeError
        The bound matrix is above its cap.
    NumericalError
        The eigensolver failed.
    """
    return -bound_abscissa(model, settings)
# endregion


# region Exact chain
class ExactStateSpace:
    """Index of the joint states of the exact chain.

    A node is either susceptible (local code 0) or infected with a recovery phase ``ℓ`` and one transmission phase
    ``m_k`` for each neighbor, in increasing neighbor order. Its local code is then
    ``1 + ℓ·p^deg + Σ m_k·p^(deg-1-k)``. Global indices are mixed-radix over the local codes with node 0 as the
    most significant digit, so index 0 is the all-susceptible state.

    Attributes
    ----------
    radices: :class:`tuple`
        Number of local states of every node, ``1 + q·p^deg``.
    strides: :class:`tuple`
        Weight of every node's local code in the global index.
    count: :class:`int`
        Number of global states.
    """
    __slots__ = ("p", "q", "degrees", "radices", "strides", "count", "_locals", "_codes")

    def __init__(self, model, settings=None):
        settings = resolve(settings)
        self.p, self.q = model.p, model.q
        self.degrees = tuple(model.network.degrees)
        predicted = math.prod(1 + self.q * self.p ** d for d in self.degrees)
        if predicted > settings.enumeration_cap:
            raise SizeError(f"Exact chain would have ∏(1 + q·p^deg) = {predicted} states, above the cap of "
                            f"{settings.enumeration_cap}", predicted, settings.enumeration_cap)
        self.radices = tuple(1 + self.q * self.p ** d for d in self.degrees)
        strides = []
        acc = 1
        for radix in reversed(self.radices):
            strides.append(acc)
            acc *= radix
        self.strides = tuple(reversed(strides))
        self.count = acc
        self._locals = {}
        self._codes = {}
        for d in set(self.degrees):
            table = [None]
            for phase in range(self.q):
                for channels in itertools.product(range(self.p), repeat=d):
                    table.append((phase, channels))
            self._locals[d] = table
            self._codes[d] = {state: code for code, state in enumerate(table) if state is not None}

    def __len__(self):
        return self.count

    def __repr__(self):
        return f"{self.__class__.__name__}(count={self.count},radices={self.radices!r})"

    def local_state(self, node, code):
        """``None`` for a susceptible node, otherwise ``(recovery phase, channel phases)``."""
        return self._locals[self.degrees[node]][code]

    def local_code(self, node, state):
        """Inverse of :meth:`local_state`."""
        if state is None:
            return 0
        phase, channels = state
        return self._codes[self.degrees[node]][(int(phase), tuple(int(c) for c in channels))]

    def encode(self, codes):
        """Global index of a tuple of local codes."""
        return sum(c * s for c, s in zip(codes, self.strides))

    def decode(self, index):
        """Tuple of local codes of a global index."""
        if not 0 <= index < self.count:
            raise IndexError(f"State {index} is outside 0..{self.count - 1}")
        codes = []
        for stride in self.strides:
            code, index = divmod(index, stride)
            codes.append(code)
        return tuple(codes)

    def describe(self, index):
        """Per node, ``None`` or ``(recovery phase, channel phases)``."""
        return tuple(self.local_state(i, c) for i, c in enumerate(self.decode(index)))


def enumerate_exact_states(model, settings=None):
    """Enumerates the joint states of the exact chain.

    Returns
    -------
    :class:`ExactStateSpace`

    Raises
    ------
    SizeError
        ``∏(1 + q·p^deg)`` exceeds ``settings.enumeration_cap``.
    """
    return ExactStateSpace(model, settings)


def _fresh_infections(space, node, psi, phi):
    """Local codes and probabilities of a node that has just been infected."""
    d = space.degrees[node]
    recovery = [(ell, w) for ell, w in enumerate(psi) if w > 0]
    channel = [(m, w) for m, w in enumerate(phi) if w > 0]
    out = []
    for ell, w_ell in recovery:
        for combo in itertools.product(channel, repeat=d):
            weight = w_ell * math.prod(w for _, w in combo)
            out.append((space.local_code(node, (ell, tuple(m for m, _ in combo))), weight))
    return out


def build_exact_generator(model, settings=None, space=None):
    """Builds the generator of the exact chain.

    For every infected node the recovery phase moves at the rates of ``R`` and the node turns susceptible at rate
    ``d_ℓ``, clearing its channels. Every channel moves at the rates of ``T`` and is absorbed at rate ``b_m``,
    restarting from ``φ``. An absorption on a susceptible target also infects it, with a recovery phase drawn from
    ``ψ`` and all its channels drawn from ``φ``.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        The model.
    settings: :class:`phasesis.config.Settings`, optional
        Supplies ``enumeration_cap``.
    space: :class:`ExactStateSpace`, optional
        A previously enumerated state space of the same model.

    Returns
    -------
    :class:`scipy.sparse.csr_matrix`
        The generator, with zero row sums. The all-susceptible row is zero.

    Raises
    ------
    SizeError
        The state space is above its cap.
    """
    space = space or enumerate_exact_states(model, settings)
    trans, rec = model.transmission, model.recovery
    T, R = trans.subgenerator, rec.subgenerator
    b, d_exit = trans.exit, rec.exit
    phi, psi = trans.initial, rec.initial
    neighbors = model.network.neighbors
    n = model.network.n
    infections = [_fresh_infections(space, j, psi, phi) for j in range(n)]
    restarts = [(m, w) for m, w in enumerate(phi) if w > 0]
    rec_moves = [[(l2, R[l1, l2]) for l2 in range(rec.order) if l2 != l1 and R[l1, l2] > 0]
                 for l1 in range(rec.order)]
    trans_moves = [[(m2, T[m1, m2]) for m2 in range(trans.order) if m2 != m1 and T[m1, m2] > 0]
                   for m1 in range(trans.order)]

    rows, cols, vals = [], [], []

    def add(source, target, rate):
        if target != source and rate > 0:
            rows.append(source)
            cols.append(target)
            vals.append(rate)

    all_codes = np.array(np.unravel_index(np.arange(space.count), space.radices)).T
    for s, codes in enumerate(all_codes):
        for i in range(n):
            code = int(codes[i])
            if code == 0:
                continue
            ell, channels = space.local_state(i, code)
            stride = space.strides[i]
            for l2, rate in rec_moves[ell]:
                add(s, s + (space.local_code(i, (l2, channels)) - code) * stride, rate)
            add(s, s - code * stride, d_exit[ell])
            for k, j in enumerate(neighbors[i]):
                m = channels[k]
                for m2, rate in trans_moves[m]:
                    moved = channels[:k] + (m2,) + channels[k + 1:]
                    add(s, s + (space.local_code(i, (ell, moved)) - code) * stride, rate)
                if b[m] <= 0:
                    continue
                target_susceptible = codes[j] == 0
                for m2, w_restart in restarts:
                    reset = channels[:k] + (m2,) + channels[k + 1:]
                    base = s + (space.local_code(i, (ell, reset)) - code) * stride
                    if not target_susceptible:
                        add(s, base, b[m] * w_restart)
                        continue
                    for new_code, w_new in infections[j]:
                        add(s, base + new_code * space.strides[j], b[m] * w_restart * w_new)
    generator = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(space.count, space.count)).tocsr()
    generator.sum_duplicates()
    out_rates = np.asarray(generator.sum(axis=1)).ravel()
    generator = generator - scipy.sparse.diags(out_rates)
    return scipy.sparse.csr_matrix(generator)


def transient_block(generator):
    """The generator without the all-susceptible row and column."""
    return generator[1:, 1:]


def _check_eigensolve(space, settings):
    if space.count > settings.eigensolve_cap:
        raise SizeError(f"Exact chain has {space.count} states, above the eigensolve cap of "
                        f"{settings.eigensolve_cap}", space.count, settings.eigensolve_cap)


def exact_decay_rate(model, settings=None, space=None):
    """The exact decay rate ``-r``.

    ``r`` is the spectral abscissa of the transient block of the exact generator, which equals the largest real
    part among its non-zero eigenvalues. An already enumerated ``space`` of the model is reused.

    Raises
    ------
    SizeError
        The state space is above the enumeration or eigensolve cap.
    NumericalError
        The eigensolver failed.
    """
    settings = resolve(settings)
    if space is None:
        space = enumerate_exact_states(model, settings)
    _check_eigensolve(space, settings)
    block = transient_block(build_exact_generator(model, settings, space))
    return -kernel.spectral_abscissa(block.toarray(), method="dense", settings=settings)


def initial_distribution(model, space):
    """Distribution over the exact states at time zero.

    Nodes of the initial infected set start infected with a recovery phase drawn from ``ψ`` and channels from
    ``φ``, the others start susceptible.
    """
    phi, psi = model.transmission.initial, model.recovery.initial
    per_node = [_fresh_infections(space, i, psi, phi) for i in model.initial_infected]
    dist = np.zeros(space.count)
    for combo in itertools.product(*per_node):
        index = sum(code * space.strides[i] for (code, _), i in zip(combo, model.initial_infected))
        dist[index] += math.prod(w for _, w in combo)
    return dist


def mean_extinction_time(model, settings=None):
    """Expected time until every node is susceptible, started from the model's initial infected set.

    Solves ``(-Q) τ = 1`` on the transient block ``Q`` and averages ``τ`` over the initial distribution.

    Raises
    ------
    SizeError
        The state space is above its cap.
    NumericalError
        The linear solve failed.
    """
    settings = resolve(settings)
    space = enumerate_exact_states(model, settings)
    block = transient_block(build_exact_generator(model, settings, space))
    tau = scipy.sparse.linalg.spsolve(scipy.sparse.csc_matrix(-block), np.ones(space.count - 1))
    if not np.all(np.isfinite(tau)):
        raise NumericalError("Absorption time system is singular")
    return float(initial_distribution(model, space)[1:] @ tau)
# endregion


# region Verdicts
def _verdict(lam, bound_rate, exact_rate):
    if bound_rate is not None and lam <= bound_rate:
        return Verdict.BOUND_CERTIFIED
    if exact_rate is None:
        return Verdict.UNDETERMINED
    return Verdict.EXACT_CERTIFIED if lam <= exact_rate else Verdict.EXACT_REFUTED


def _check_rate(lam):
    lam = float(lam)
    if not lam > 0:
        raise ValueError(f"Decay rate must be positive, got {lam!r}")
    return lam


def certify_stability(model, lam, settings=None):
    """Decides whether the model is exponentially mean stable with decay rate ``lam``.

    The bound is tried first. When it does not certify the rate, the exact rate decides if the chain is small
    enough, otherwise the answer is undetermined.

    Returns
    -------
    :class:`Verdict`

    Raises
    ------
    ValueError
        ``lam`` is not positive.
    """
    lam = _check_rate(lam)
    try:
        bound_rate = decay_rate_bound(model, settings)
    except (SizeError, NumericalError):
        bound_rate = None
    if bound_rate is not None and lam <= bound_rate:
        return Verdict.BOUND_CERTIFIED
    try:
        exact_rate = exact_decay_rate(model, settings)
    except (SizeError, NumericalError):
        exact_rate = None
    return _verdict(lam, bound_rate, exact_rate)


def analyze(model, lambdas=(), settings=None, exact=True, space=None):
    """Computes every stability quantity of a model into a report.

    Parameters
    ----------
    model: :class:`phasesis.models.GenesisModel`
        The model.
    lambdas: iterable of :class:`float`
        Decay rates to check.
    settings: :class:`phasesis.config.Settings`, optional
        Caps and tolerances.
    exact: :class:`bool`
        Whether to attempt the exact chain.
    space: :class:`ExactStateSpace`, optional
        The model's already enumerated exact state space.

    Returns
    -------
    :class:`StabilityReport`

    Raises
    ------
    SizeError
        The bound matrix is above its cap.
    """
    settings = resolve(settings)
    lambdas = [_check_rate(lam) for lam in lambdas]
    eta = bound_abscissa(model, settings)
    exact_rate = state_count = error = None
    if exact:
        try:
            if space is None:
                space = enumerate_exact_states(model, settings)
            state_count = space.count
            exact_rate = exact_decay_rate(model, settings, space)
        except (SizeError, NumericalError) as e:
            error = str(e)
    verdicts = {lam: _verdict(lam, -eta, exact_rate) for lam in lambdas}
    inputs = {
        "graph_hash": model.network.graph_hash(),
        "n": model.network.n,
        "transmission": model.transmission.digest(),
        "recovery": model.recovery.digest(),
        "initial_infected": list(model.initial_infected),
        "settings": settings.to_dict(),
        "version": phasesis.__version__,
    }
    return StabilityReport(bound_dimension(model), eta, exact_rate=exact_rate, exact_state_count=state_count,
                           verdicts=verdicts, exact_error=error, inputs=inputs)
# endregion
