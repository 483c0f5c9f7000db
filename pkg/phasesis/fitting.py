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
"""Fitting of phase-type laws to densities or samples.

Fits are built in two stages. A hyper-Erlang structure is first chosen by matching moments over every allocation of
at most ``order`` phases into a few Erlang branches, then the best candidates are refined by maximum likelihood with
the EM algorithm for Erlang mixtures of fixed shapes.
"""

import math

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.stats
from scipy.special import gammaln, logsumexp

from phasesis.config import resolve
from phasesis.errors import FitError
from phasesis.models.phasetype import PhaseType, lognormal

# Samples used to rank candidate structures before the EM refinement.
_RANKING_SAMPLES = 10_000


class FitTarget:
    """The law a phase-type distribution is fitted to.

    Build instances with :meth:`from_distribution`, :meth:`lognormal`, :meth:`from_grid` or :meth:`from_samples`.

    Attributes
    ----------
    label: :class:`str`
        A short description, echoed into fit provenance.
    mean: :class:`float`
        The target's mean.
    """
    __slots__ = ("label", "mean", "_distribution", "_grid", "_values", "_samples", "_kde")

    def __init__(self, label, mean, *, distribution=None, grid=None, values=None, samples=None):
        self.label = label
        self.mean = float(mean)
        self._distribution = distribution
        self._grid = grid
        self._values = values
        self._samples = samples
        self._kde = None

    def __repr__(self):
        return f"{self.__class__.__name__}(label={self.label!r},mean={self.mean:.6g})"

    @classmethod
    def from_distribution(cls, distribution, label=None):
        """Wraps a frozen :mod:`scipy.stats` continuous distribution on the positive half-line."""
        return cls(label or distribution.dist.name, distribution.mean(), distribution=distribution)

    @classmethod
    def lognormal(cls, mean, variance):
        """A log-normal target given by its mean and variance."""
        return cls(f"lognormal(mean={mean!r},variance={variance!r})", mean,
                   distribution=lognormal(mean, variance))

    @classmethod
    def from_grid(cls, grid, values, label="grid"):
        """A density tabulated on an increasing grid of non-negative points.

        Raises
        ------
        ValueError
            The grid is not increasing, the density is negative or it does not integrate to one.
        """
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("Grid and density values must be one-dimensional arrays of the same length")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ValueError("Grid must be non-negative and strictly increasing")
        if np.any(values < 0):
            raise ValueError("Density values must be non-negative")
        mass = scipy.integrate.trapezoid(values, grid)
        if abs(mass - 1.0) > 1e-2:
            raise ValueError(f"Density integrates to {mass:.4f} on its grid, expected 1")
        values = values / mass
        mean = scipy.integrate.trapezoid(grid * values, grid)
        return cls(label, mean, grid=grid, values=values)

    @classmethod
    def from_samples(cls, samples, label="samples"):
        """An empirical target.

        Raises
        ------
        ValueError
            Fewer than 1000 samples or non-positive values.
        """
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size < 1000:
            raise ValueError(f"At least 1000 samples are needed, got {samples.size}")
        if np.any(samples <= 0) or not np.all(np.isfinite(samples)):
            raise ValueError("Samples must be positive and finite")
        return cls(label, samples.mean(), samples=samples)

    @property
    def is_empirical(self):
        """:class:`bool`: Whether the target is only known through samples."""
        return self._samples is not None

    def moments(self, count):
        """The first ``count`` raw moments of the target."""
        if self._distribution is not None:
            return np.array([self._distribution.moment(k) for k in range(1, count + 1)], dtype=float)
        if self._samples is not None:
            return np.array([np.mean(self._samples ** k) for k in range(1, count + 1)])
        return np.array([scipy.integrate.trapezoid(self._grid ** k * self._values, self._grid)
                         for k in range(1, count + 1)])

    def density(self, t):
        """Evaluates the target density, a reflected kernel estimate for empirical targets."""
        t = np.asarray(t, dtype=float)
        if self._distribution is not None:
            return self._distribution.pdf(t)
        if self._grid is not None:
            return np.interp(t, self._grid, self._values, right=0.0)
        if self._kde is None:
            self._kde = scipy.stats.gaussian_kde(self._samples)
        return np.where(t >= 0, self._kde(t) + self._kde(-t), 0.0)

    def draw(self, count, rng=None, stratified=True):
        """Draws ``count`` points from the target.

        Analytic targets are drawn at the stratified quantiles ``(i - 1/2) / count`` unless ``stratified`` is false,
        empirical targets return their samples.
        """
        if self._samples is not None:
            return self._samples
        if stratified:
            u = (np.arange(count) + 0.5) / count
        else:
            if rng is None:
                raise ValueError("A seeded random generator is needed for random draws")
            u = np.sort(rng.random(count))
        if self._distribution is not None:
            x = self._distribution.ppf(u)
        else:
            cdf = scipy.integrate.cumulative_trapezoid(self._values, self._grid, initial=0.0)
            cdf /= cdf[-1]
            x = np.interp(u, cdf, self._grid)
        return x[x > 0]


class FitOptions:
    """Options of :func:`fit_phase_type`.

    Attributes
    ----------
    max_branches: :class:`int`
        Largest number of Erlang branches considered.
    starts: :class:`int`
        Number of candidate structures refined by EM.
    stratified: :class:`bool`
        Whether analytic targets are drawn at stratified quantiles.
    samples: :class:`int`, optional
        Number of draws, ``settings.fit_samples`` when omitted.
    """
    __slots__ = ("max_branches", "starts", "stratified", "samples")

    def __init__(self, max_branches=4, starts=4, stratified=True, samples=None):
        if max_branches < 1 or starts < 1:
            raise ValueError("max_branches and starts must be positive")
        self.max_branches = int(max_branches)
        self.starts = int(starts)
        self.stratified = bool(stratified)
        self.samples = None if samples is None else int(samples)

    def __repr__(self):
        return f"{self.__class__.__name__}({self.to_dict()!r})"

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}


class FitResult:
    """Outcome of a fit.

    Attributes
    ----------
    phase_type: :class:`PhaseType`
        The fitted law.
    l1_error: :class:`float`
        L1 distance between fitted and target densities on the diagnostics grid.
    log_likelihood: :class:`float`
        Mean log-likelihood per sample at the last iteration.
    iterations: :class:`int`
        EM iterations of the selected candidate.
    converged: :class:`bool`
        Whether the EM gain fell below tolerance before the iteration limit.
    shapes: :class:`tuple`
        Erlang shapes of the selected structure.
    moment_error: :class:`float`
        Residual of the moment-matching stage for the selected structure.
    """
    __slots__ = ("phase_type", "l1_error", "log_likelihood", "iterations", "converged", "shapes", "moment_error")

    def __init__(self, phase_type, *, l1_error=None, log_likelihood=None, iterations=0, converged=False,
                 shapes=(), moment_error=None):
        self.phase_type = phase_type
        self.l1_error = l1_error
        self.log_likelihood = log_likelihood
        self.iterations = iterations
        self.converged = converged
        self.shapes = tuple(shapes)
        self.moment_error = moment_error

    def __repr__(self):
        return f"{self.__class__.__name__}(shapes={self.shapes!r},l1_error={self.l1_error!r})"

    def to_dict(self):
        return {
            "phase_type": self.phase_type.to_dict() if self.phase_type is not None else None,
            "l1_error": self.l1_error,
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "shapes": list(self.shapes),
            "moment_error": self.moment_error,
        }


def shape_allocations(order, max_branches):
    """Every non-increasing tuple of positive shapes with at most ``max_branches`` parts summing to at most ``order``.

    Returns
    -------
    :class:`list` of :class:`tuple`
    """
    found = []

    def extend(prefix, remaining, largest):
        if prefix:
            found.append(tuple(prefix))
        if len(prefix) == max_branches:
            return
        for k in range(min(remaining, largest), 0, -1):
            extend(prefix + [k], remaining - k, k)

    extend([], order, order)
    return sorted(found, key=lambda s: (len(s), s))


def hyper_erlang_moments(weights, shapes, rates, count):
    """Raw moments ``Σ w Γ(k+j) / (Γ(k) λ^j)`` of an Erlang mixture."""
    shapes = np.asarray(shapes, dtype=float)
    return np.array([np.sum(weights * np.exp(gammaln(shapes + j) - gammaln(shapes)) / rates ** j)
                     for j in range(1, count + 1)])


def _unpack(theta, branches):
    logits = np.concatenate(([0.0], theta[:branches - 1]))
    weights = np.exp(logits - logsumexp(logits))
    rates = np.exp(theta[branches - 1:])
    return weights, rates


def match_moments(shapes, target_moments):
    """Chooses weights and rates of an Erlang mixture with the given shapes to match the target moments.

    Parameters
    ----------
    shapes: :class:`tuple` of :class:`int`
        Erlang shapes of the branches.
    target_moments: :class:`numpy.ndarray`
        The first two or three raw moments of the target.

    Returns
    -------
    :class:`tuple`
        Weights, rates and the residual norm of the relative log-moment errors.
    """
    branches = len(shapes)
    shapes_arr = np.asarray(shapes, dtype=float)
    mean = target_moments[0]
    spread = np.geomspace(0.3, 3.0, branches) if branches > 1 else np.ones(1)
    x0 = np.concatenate((np.zeros(branches - 1), np.log(shapes_arr / (mean * spread))))
    log_target = np.log(target_moments)

    def residuals(theta):
        weights, rates = _unpack(theta, branches)
        return np.log(hyper_erlang_moments(weights, shapes_arr, rates, target_moments.size)) - log_target

    solution = scipy.optimize.least_squares(residuals, x0, method="trf", max_nfev=2000)
    weights, rates = _unpack(solution.x, branches)
    return weights, rates, float(np.linalg.norm(solution.fun))


def _log_components(x, log_x, weights, shapes, rates):
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return (log_w + shapes * np.log(rates) - gammaln(shapes))[None, :] + \
        (shapes - 1)[None, :] * log_x[:, None] - rates[None, :] * x[:, None]


def log_likelihood(x, weights, shapes, rates):
    """Mean log-likelihood of the samples under an Erlang mixture."""
    x = np.asarray(x, dtype=float)
    shapes = np.asarray(shapes, dtype=float)
    components = _log_components(x, np.log(x), weights, shapes, rates)
    return float(np.mean(logsumexp(components, axis=1)))


def em_hyper_erlang(x, shapes, weights, rates, *, max_iter, tol):
    """Maximum likelihood refinement of an Erlang mixture with fixed shapes.

    Returns
    -------
    :class:`tuple`
        Weights, rates, the final mean log-likelihood, the number of iterations and whether it converged.

    Raises
    ------
    FitError
        The log-likelihood decreased by more than the tolerance.
    """
    x = np.asarray(x, dtype=float)
    log_x = np.log(x)
    shapes = np.asarray(shapes, dtype=float)
    weights = np.array(weights, dtype=float)
    rates = np.array(rates, dtype=float)
    components = _log_components(x, log_x, weights, shapes, rates)
    row = logsumexp(components, axis=1)
    current = float(np.mean(row))
    for iteration in range(1, max_iter + 1):
        responsibilities = np.exp(components - row[:, None])
        mass = responsibilities.sum(axis=0)
        alive = mass > 1e-300
        weights = mass / x.size
        rates = np.where(alive, shapes * mass / np.maximum(responsibilities.T @ x, 1e-300), rates)
        components = _log_components(x, log_x, weights, shapes, rates)
        row = logsumexp(components, axis=1)
        updated = float(np.mean(row))
        gain = updated - current
        current = updated
        if gain < -max(tol, 1e-12 * abs(current)):
            raise FitError(f"EM log-likelihood decreased by {-gain:.3g} at iteration {iteration}",
                           (weights, rates, current, iteration))
        if gain < tol:
            return weights, rates, current, iteration, True
    return weights, rates, current, max_iter, False


def _build(weights, shapes, rates, meta):
    keep = weights > 1e-12
    weights = weights[keep] / weights[keep].sum()
    shapes = [int(s) for s, k in zip(shapes, keep) if k]
    ph = PhaseType.hyper_erlang(weights, shapes, rates[keep])
    ph.meta.update(meta)
    return ph


def l1_distance(phase_type, target, settings=None):
    """L1 distance between fitted and target densities by trapezoid quadrature.

    The grid is uniform on ``[0, fit_grid_span × target mean]`` with ``fit_grid_points`` points.
    """
    settings = resolve(settings)
    grid = np.linspace(0.0, settings.fit_grid_span * target.mean, settings.fit_grid_points)
    fitted = phase_type.pdf(grid, settings)
    reference = np.nan_to_num(target.density(grid), nan=0.0, posinf=0.0)
    return float(scipy.integrate.trapezoid(np.abs(fitted - reference), grid))


def fit_phase_type(target, order, *, rng=None, options=None, settings=None):
    """Fits a phase-type law of at most ``order`` phases to a target.

    Parameters
    ----------
    target: :class:`FitTarget`
        The law to approximate.
    order: :class:`int`
        Maximum number of phases.
    rng: :class:`numpy.random.Generator`, optional
        Random source, required only when analytic targets are drawn at random.
    options: :class:`FitOptions`, optional
        Structure search and sampling options.
    settings: :class:`phasesis.config.Settings`, optional
        Sample count, EM limits and diagnostics grid.

    Returns
    -------
    :class:`FitResult`
        The fitted law and its diagnostics.

    Raises
    ------
    ValueError
        ``order`` is not a positive integer.
    FitError
        The EM refinement diverged; the exception carries the last iterate.
    """
    settings = resolve(settings)
    options = options or FitOptions()
    if int(order) != order or order < 1:
        raise ValueError(f"Order must be a positive integer, got {order!r}")
    order = int(order)
    x = target.draw(options.samples or settings.fit_samples, rng, options.stratified)
    ranking = x[::max(1, x.size // _RANKING_SAMPLES)]

    moments = target.moments(3)
    if not np.all(np.isfinite(moments)) or np.any(moments <= 0):
        moments = moments[:2]

    candidates = []
    for shapes in shape_allocations(order, options.max_branches):
        weights, rates, error = match_moments(shapes, moments)
        score = log_likelihood(ranking, weights, shapes, rates)
        candidates.append((round(error, 6), -score, shapes, weights, rates, error))
    candidates.sort(key=lambda c: c[:3])

    meta = {"fit": {"target": target.label, "order": order, "options": options.to_dict()}}
    best = None
    for _, _, shapes, weights, rates, error in candidates[:options.starts]:
        try:
            weights, rates, ll, iterations, converged = em_hyper_erlang(
                x, shapes, weights, rates, max_iter=settings.fit_max_iter, tol=settings.fit_tol)
        except FitError as e:
            last_weights, last_rates, ll, iterations = e.result
            partial = FitResult(_build(last_weights, shapes, last_rates, meta), log_likelihood=ll,
                                iterations=iterations, shapes=shapes, moment_error=error)
            raise FitError(str(e), partial) from e
        if best is None or ll > best[0]:
            best = (ll, shapes, weights, rates, iterations, converged, error)

    ll, shapes, weights, rates, iterations, converged, error = best
    phase_type = _build(weights, shapes, rates, meta)
    l1 = l1_distance(phase_type, target, settings)
    if not math.isfinite(l1):
        raise FitError("Fitted density could not be evaluated", FitResult(phase_type, shapes=shapes))
    return FitResult(phase_type, l1_error=l1, log_likelihood=ll, iterations=iterations, converged=converged,
                     shapes=shapes, moment_error=error)
