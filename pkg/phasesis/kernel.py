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
"""Dense matrix primitives: Kronecker operations, Metzler checks, spectral abscissa and exponential action."""

import math

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from phasesis.config import resolve
from phasesis.errors import NumericalError, SizeError

# Uniformization is applied in steps whose Poisson parameter stays below this value, so that e^{-Λh} never underflows.
_UNIFORMIZATION_STEP = 50.0


def as_matrix(m, name="matrix"):
    """Converts ``m`` into a finite two-dimensional float array.

    Parameters
    ----------
    m: array-like
        The matrix to convert.
    name: :class:`str`
        Name used in error messages.

    Returns
    -------
    :class:`numpy.ndarray`
        The matrix as a float array.

    Raises
    ------
    ValueError
        The input is not two-dimensional or has non-finite entries.
    """
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty two-dimensional matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _require_square(m, name):
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")


def kron(a, b):
    """Kronecker product of two matrices.

    Parameters
    ----------
    a: array-like
        Left factor, ``m×n``.
    b: array-like
        Right factor, ``p×q``.

    Returns
    -------
    :class:`numpy.ndarray`
        The ``mp×nq`` matrix whose block ``(i, j)`` is ``a[i, j] * b``.
    """
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def kron_sum(a, b):
    """Kronecker sum ``a ⊗ I + I ⊗ b`` of two square matrices.

    Raises
    ------
    ValueError
        Either input is not square.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    _require_square(a, "a")
    _require_square(b, "b")
    return np.kron(a, np.eye(b.shape[0])) + np.kron(np.eye(a.shape[0]), b)


def is_metzler(m):
    """Checks whether every off-diagonal entry is non-negative.

    The comparison is exact, inputs are assembled rather than measured.
    Sparse matrices are accepted.

    Returns
    -------
    :class:`bool`
    """
    if scipy.sparse.issparse(m):
        coo = m.tocoo()
        _require_square(coo, "matrix")
        off = coo.row != coo.col
        return bool(np.all(coo.data[off] >= 0))
    arr = as_matrix(m)
    _require_square(arr, "matrix")
    off = ~np.eye(arr.shape[0], dtype=bool)
    return bool(np.all(arr[off] >= 0))


def _dense_abscissa(m):
    try:
        eigenvalues = scipy.linalg.eigvals(m, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Eigensolver failed: {e}") from e
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericalError("Eigensolver returned non-finite eigenvalues")
    return float(np.max(eigenvalues.real))


def perron_abscissa(m, settings=None):
    """Spectral abscissa of a Metzler matrix by shifted power iteration.

    The matrix is shifted by ``s = max|diag| + 1`` so that ``m + sI`` is non-negative with a positive diagonal,
    its Perron value is found by power iteration and the shift is subtracted again.

    Parameters
    ----------
    m: array-like or sparse matrix
        A square Metzler matrix.
    settings: :class:`phasesis.config.Settings`, optional
        Supplies ``power_tol`` and ``power_max_iter``.

    Returns
    -------
    :class:`float`
        The spectral abscissa.

    Raises
    ------
    NumericalError
        The iteration did not converge.
    """
    settings = resolve(settings)
    if not scipy.sparse.issparse(m):
        m = as_matrix(m)
    _require_square(m, "matrix")
    if not is_metzler(m):
        raise ValueError("Power iteration needs a Metzler matrix")
    diag = m.diagonal()
    shift = float(np.max(np.abs(diag))) + 1.0
    n = m.shape[0]
    x = np.full(n, 1.0 / n)
    estimate = 0.0
    for _ in range(settings.power_max_iter):
        y = m @ x + shift * x
        norm = float(np.sum(y))
        if norm <= 0 or not math.isfinite(norm):
            raise NumericalError("Power iteration collapsed")
        y /= norm
        new = norm / float(np.sum(x))
        if abs(new - estimate) <= settings.power_tol * max(1.0, abs(new)):
            return new - shift
        estimate = new
        x = y
    raise NumericalError(f"Power iteration did not converge in {settings.power_max_iter} iterations")


def spectral_abscissa(m, *, method="auto", settings=None):
    """Maximum real part over the eigenvalues of ``m``.

    Parameters
    ----------
    m: array-like or sparse matrix
        A square matrix.
    method: :class:`str`
        ``"dense"`` for a full eigensolve, ``"power"`` for the shifted power iteration (Metzler matrices only) or
        ``"auto"`` to use the dense solver up to ``settings.dense_eig_max`` rows and the power iteration above.
    settings: :class:`phasesis.config.Settings`, optional
        Tolerances and limits.

    Returns
    -------
    :class:`float`
        The spectral abscissa.

    Raises
    ------
    NumericalError
        The solver failed.
    SizeError
        The matrix is too large for a dense solve and is not Metzler.
    """
    settings = resolve(settings)
    if not scipy.sparse.issparse(m):
        m = as_matrix(m)
    _require_square(m, "matrix")
    n = m.shape[0]
    if method == "power":
        return perron_abscissa(m, settings)
    if method == "auto" and n > settings.dense_eig_max:
        if is_metzler(m):
            return perron_abscissa(m, settings)
        raise SizeError(f"{n}×{n} non-Metzler matrix exceeds the dense eigensolver limit", n,
                        settings.dense_eig_max)
    if method not in ("auto", "dense"):
        raise ValueError(f"Unknown method {method!r}")
    if scipy.sparse.issparse(m):
        m = as_matrix(m.toarray())
    return _dense_abscissa(m)


def _uniformized_step(m, v, h, rate, tol):
    """Applies e^{mh} to the columns of ``v`` with the Poisson-weighted series of the uniformized matrix."""
    lam_h = rate * h
    weight = math.exp(-lam_h)
    term = v.copy()
    result = weight * term
    accumulated = weight
    k = 0
    while 1.0 - accumulated > tol or k < lam_h:
        k += 1
        term = term + (m @ term) / rate
        weight *= lam_h / k
        result += weight * term
        accumulated += weight
        if k > 10_000:
            raise NumericalError("Uniformization series did not converge")
    return result


def _expm_grid(m, v, times, settings):
    m_metzler = is_metzler(m)
    growth = 0.0
    rate = 0.0
    if m_metzler:
        # e^{mt} = e^{ct} e^{(m - cI)t}, with m - cI a subgenerator.
        growth = max(0.0, float(np.max(m.sum(axis=1))))
        m = m - growth * np.eye(m.shape[0])
        rate = float(np.max(np.abs(np.diag(m))))
    out = np.empty((len(times),) + v.shape)
    current = v.copy()
    previous = 0.0
    order = np.argsort(times, kind="stable")
    for idx in order:
        t = times[idx]
        dt = t - previous
        if dt > 0:
            if not m_metzler:
                current = scipy.sparse.linalg.expm_multiply(m * dt, current)
            else:
                if rate > 0:
                    steps = max(1, math.ceil(rate * dt / _UNIFORMIZATION_STEP))
                    h = dt / steps
                    for _ in range(steps):
                        current = _uniformized_step(m, current, h, rate, settings.expm_tol)
                if growth > 0:
                    current = current * math.exp(growth * dt)
        out[idx] = current
        previous = t
    return out


def expm_action(m, v, t, settings=None):
    """Computes ``e^{mt} v``.

    Metzler matrices are handled by uniformization, which keeps the result non-negative for non-negative ``v``.
    Other matrices fall back to the truncated Taylor series with scaling of
    :func:`scipy.sparse.linalg.expm_multiply`.

    Parameters
    ----------
    m: array-like
        A square matrix.
    v: array-like
        A vector (or a matrix whose columns are acted upon) with as many rows as ``m``.
    t: :class:`float` or array-like
        Non-negative time, or a one-dimensional array of times.
    settings: :class:`phasesis.config.Settings`, optional
        Supplies ``expm_tol``.

    Returns
    -------
    :class:`numpy.ndarray`
        ``e^{mt} v``, stacked along a leading axis when ``t`` is an array.

    Raises
    ------
    ValueError
        Dimensions do not match or a time is negative.
    """
    settings = resolve(settings)
    m = as_matrix(m)
    _require_square(m, "matrix")
    v = np.asarray(v, dtype=float)
    if v.shape[0] != m.shape[0]:
        raise ValueError(f"Vector of length {v.shape[0]} does not match a {m.shape[0]}×{m.shape[0]} matrix")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if times.ndim != 1 or np.any(times < 0) or not np.all(np.isfinite(times)):
        raise ValueError("Times must be finite and non-negative")
    out = _expm_grid(m, v, times, settings)
    if np.ndim(t) == 0:
        return out[0]
    return out
