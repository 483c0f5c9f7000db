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

import math

import numpy as np
import scipy.linalg
import scipy.stats

from phasesis import kernel
from phasesis.config import resolve
from phasesis.errors import InvalidPhaseTypeError, NumericalError
from phasesis.models import abc


def lognormal_params(mean, variance):
    """Converts the mean and variance of a log-normal law into its location and scale.

    Parameters
    ----------
    mean: :class:`float`
        The mean, must be positive.
    variance: :class:`float`
        The variance, must be positive.

    Returns
    -------
    :class:`tuple` of (:class:`float`, :class:`float`)
        The location ``m`` and scale ``s`` of ``log X ~ N(m, s²)``.

    Raises
    ------
    ValueError
        Either input is not positive.
    """
    if not mean > 0 or not variance > 0:
        raise ValueError(f"Mean and variance must be positive, got {mean!r} and {variance!r}")
    s2 = math.log1p(variance / mean ** 2)
    return math.log(mean) - s2 / 2, math.sqrt(s2)


def lognormal(mean, variance):
    """A frozen :mod:`scipy.stats` log-normal law with the given mean and variance."""
    m, s = lognormal_params(mean, variance)
    return scipy.stats.lognorm(s=s, scale=math.exp(m))


def _positive(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidPhaseTypeError(f"{name} must be positive, got {values!r}")
    return arr


def _probabilities(values, name, tol):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.size == 0 or np.any(arr < 0) or abs(arr.sum() - 1.0) > tol:
        raise InvalidPhaseTypeError(f"{name} must be a probability vector, got {values!r}")
    return arr


class PhaseType(abc.Serializable):
    """The law of the absorption time of a finite Markov chain.

    The chain starts in a transient phase drawn from :attr:`initial`, moves among transient phases according to
    :attr:`subgenerator` and is absorbed at rate :attr:`exit` from each phase.

    Attributes
    ----------
    initial: :class:`numpy.ndarray`
        Initial distribution over the transient phases, sums to one.
    subgenerator: :class:`numpy.ndarray`
        The transient block, a Metzler matrix with non-positive row sums.
    exit: :class:`numpy.ndarray`
        Absorption rates, ``-subgenerator @ 1``.
    meta: :class:`dict`
        Free-form provenance, e.g. the family it was built from.
    """
    __slots__ = (
        "initial",
        "subgenerator",
        "exit",
        "meta",
    )

    def __init__(self, initial, subgenerator, *, meta=None, settings=None):
        settings = resolve(settings)
        initial = np.atleast_1d(np.asarray(initial, dtype=float)).copy()
        try:
            subgenerator = kernel.as_matrix(np.atleast_2d(subgenerator), "subgenerator").copy()
        except ValueError as e:
            raise InvalidPhaseTypeError(str(e)) from e
        p = subgenerator.shape[0]
        if subgenerator.shape != (p, p):
            raise InvalidPhaseTypeError(f"Subgenerator must be square, got shape {subgenerator.shape}")
        if initial.shape != (p,):
            raise InvalidPhaseTypeError(f"Initial vector has length {initial.size}, expected {p}")
        if np.any(initial < 0) or abs(initial.sum() - 1.0) > settings.sum_tol:
            raise InvalidPhaseTypeError("Initial vector must be non-negative and sum to one")
        if not kernel.is_metzler(subgenerator):
            raise InvalidPhaseTypeError("Subgenerator must have non-negative off-diagonal entries")
        exit_rates = -subgenerator.sum(axis=1)
        scale = max(1.0, float(np.max(np.abs(subgenerator))))
        if np.any(exit_rates < -settings.sum_tol * scale):
            raise InvalidPhaseTypeError("Subgenerator rows must have non-positive sums")
        exit_rates = np.maximum(exit_rates, 0.0)
        if not np.any(exit_rates > 0):
            raise InvalidPhaseTypeError("At least one phase must lead to absorption")
        norm = np.linalg.norm(subgenerator, 1)
        try:
            rcond = 1.0 / (norm * np.linalg.norm(np.linalg.inv(subgenerator), 1))
        except np.linalg.LinAlgError:
            rcond = 0.0
        if not rcond >= settings.rcond_min:
            raise InvalidPhaseTypeError(f"Subgenerator is singular (reciprocal condition {rcond:.3g})")
        initial.setflags(write=False)
        subgenerator.setflags(write=False)
        exit_rates.setflags(write=False)
        self.initial = initial
        self.subgenerator = subgenerator
        self.exit = exit_rates
        self.meta = dict(meta or {})

    def __repr__(self):
        family = self.meta.get("family", "ph")
        return f"{self.__class__.__name__}(order={self.order},family={family!r},mean={self.mean:.6g})"

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return np.array_equal(self.initial, other.initial) and \
                np.array_equal(self.subgenerator, other.subgenerator)
        return False

    def __hash__(self):
        return hash((self.initial.tobytes(), self.subgenerator.tobytes()))

    # region Constructors
    @classmethod
    def exponential(cls, rate):
        """Exponential law with the given rate, a single phase."""
        rate = float(_positive(rate, "rate")[0])
        return cls([1.0], [[-rate]], meta={"family": "exponential", "rate": rate})

    @classmethod
    def erlang(cls, k, rate):
        """Erlang law: ``k`` exponential stages of the given rate traversed in sequence."""
        if int(k) != k or k < 1:
            raise InvalidPhaseTypeError(f"Shape must be a positive integer, got {k!r}")
        k = int(k)
        rate = float(_positive(rate, "rate")[0])
        sub = np.diag(np.full(k, -rate)) + np.diag(np.full(k - 1, rate), 1)
        initial = np.zeros(k)
        initial[0] = 1.0
        return cls(initial, sub, meta={"family": "erlang", "shape": k, "rate": rate})

    @classmethod
    def hyperexponential(cls, weights, rates):
        """Mixture of exponential laws."""
        rates = _positive(rates, "rates")
        weights = _probabilities(weights, "weights", 1e-12)
        if weights.size != rates.size:
            raise InvalidPhaseTypeError("Weights and rates must have the same length")
        return cls(weights, np.diag(-rates),
                   meta={"family": "hyperexponential", "weights": weights.tolist(), "rates": rates.tolist()})

    @classmethod
    def hyper_erlang(cls, weights, shapes, rates):
        """Mixture of Erlang laws, one block of stages per branch."""
        rates = _positive(rates, "rates")
        weights = _probabilities(weights, "weights", 1e-12)
        shapes = [int(s) for s in np.atleast_1d(shapes)]
        if not (len(shapes) == weights.size == rates.size):
            raise InvalidPhaseTypeError("Weights, shapes and rates must have the same length")
        if any(s < 1 for s in shapes):
            raise InvalidPhaseTypeError(f"Shapes must be at least 1, got {shapes!r}")
        blocks = [cls.erlang(s, r).subgenerator for s, r in zip(shapes, rates)]
        sub = scipy.linalg.block_diag(*blocks)
        initial = np.zeros(sum(shapes))
        start = 0
        for w, s in zip(weights, shapes):
            initial[start] = w
            start += s
        return cls(initial, sub, meta={"family": "hyper_erlang", "weights": weights.tolist(), "shapes": shapes,
                                       "rates": rates.tolist()})

    @classmethod
    def construct(cls, kind, *args):
        """Builds one of the standard families by name.

        Parameters
        ----------
        kind: :class:`str`
            One of ``exponential``, ``erlang``, ``hyperexponential`` and ``hyper_erlang``.
        *args:
            The family's parameters, in the order of the matching constructor.

        Returns
        -------
        :class:`PhaseType`
        """
        constructors = {
            "exponential": cls.exponential,
            "erlang": cls.erlang,
            "hyperexponential": cls.hyperexponential,
            "hyper_erlang": cls.hyper_erlang,
        }
        try:
            return constructors[kind](*args)
        except KeyError:
            raise ValueError(f"Unknown phase-type family {kind!r}") from None
    # endregion

    @property
    def order(self):
        """:class:`int`: The number of transient phases."""
        return self.initial.size

    def moment(self, k):
        """The ``k``-th raw moment, ``(-1)^k k! φᵀ T^{-k} 1``.

        Raises
        ------
        ValueError
            ``k`` is not a positive integer.
        NumericalError
            The subgenerator could not be inverted.
        """
        if int(k) != k or k < 1:
            raise ValueError(f"Moment order must be a positive integer, got {k!r}")
        k = int(k)
        try:
            x = np.ones(self.order)
            for _ in range(k):
                x = np.linalg.solve(self.subgenerator, x)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Singular subgenerator: {e}") from e
        return float((-1) ** k * math.factorial(k) * (self.initial @ x))

    @property
    def mean(self):
        """:class:`float`: The expected value."""
        return self.moment(1)

    @property
    def variance(self):
        """:class:`float`: The variance."""
        return self.moment(2) - self.mean ** 2

    def _check_times(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("Times must be finite and non-negative")
        return arr

    def pdf(self, t, settings=None):
        """Density ``φᵀ e^{Tt} b`` at a time or an array of times.

        Raises
        ------
        ValueError
            A time is negative.
        """
        arr = self._check_times(t)
        values = kernel.expm_action(self.subgenerator, self.exit, arr.ravel(), settings) @ self.initial
        values = np.maximum(values, 0.0).reshape(arr.shape)
        return float(values) if values.ndim == 0 else values

    def sf(self, t, settings=None):
        """Survival function ``φᵀ e^{Tt} 1``."""
        arr = self._check_times(t)
        ones = np.ones(self.order)
        values = kernel.expm_action(self.subgenerator, ones, arr.ravel(), settings) @ self.initial
        values = np.clip(values, 0.0, 1.0).reshape(arr.shape)
        return float(values) if values.ndim == 0 else values

    def cdf(self, t, settings=None):
        """Distribution function ``1 - φᵀ e^{Tt} 1``.

        Raises
        ------
        ValueError
            A time is negative.
        """
        values = 1.0 - np.asarray(self.sf(t, settings))
        return float(values) if values.ndim == 0 else values

    def sample(self, rng, size=None):
        """Draws absorption times by simulating the underlying chain.

        Parameters
        ----------
        rng: :class:`numpy.random.Generator`
            The random source.
        size: :class:`int`, optional
            Number of samples. A single float is returned when omitted.

        Returns
        -------
        :class:`float` or :class:`numpy.ndarray`
        """
        count = 1 if size is None else int(size)
        p = self.order
        out_rates = -np.diag(self.subgenerator)
        # Row m: probabilities of moving to phase 0..p-1, then of absorption in the last column.
        jumps = np.zeros((p, p + 1))
        jumps[:, :p] = self.subgenerator / out_rates[:, None]
        jumps[np.arange(p), np.arange(p)] = 0.0
        jumps[:, p] = self.exit / out_rates
        cumulative = np.cumsum(jumps, axis=1)
        cumulative[:, -1] = 1.0
        phase = rng.choice(p, size=count, p=self.initial)
        times = np.zeros(count)
        active = np.arange(count)
        while active.size:
            current = phase[active]
            times[active] += rng.exponential(1.0, size=active.size) / out_rates[current]
            u = rng.random(active.size)
            nxt = (cumulative[current] <= u[:, None]).sum(axis=1)
            phase[active] = nxt
            active = active[nxt < p]
        return float(times[0]) if size is None else times

    def scaled(self, factor):
        """The law of ``X / factor``: every rate is multiplied by ``factor``."""
        factor = float(_positive(factor, "factor")[0])
        meta = dict(self.meta)
        meta["scaled_by"] = meta.get("scaled_by", 1.0) * factor
        return self.__class__(self.initial, self.subgenerator * factor, meta=meta)

    def to_dict(self):
        return {
            "order": self.order,
            "initial": [float(v) for v in self.initial],
            "subgenerator": [float(v) for v in self.subgenerator.ravel()],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data):
        p = int(data["order"])
        sub = np.asarray(data["subgenerator"], dtype=float)
        if sub.size != p * p:
            raise InvalidPhaseTypeError(f"Subgenerator has {sub.size} entries, expected {p * p}")
        return cls(data["initial"], sub.reshape(p, p), meta=data.get("meta"))
