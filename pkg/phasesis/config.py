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


class Settings:
    """Tolerances and size caps shared by every numerical routine.

    Instances are immutable in practice, use :meth:`replace` to obtain a modified copy.

    Attributes
    ----------
    dense_eig_max: :class:`int`
        Largest dimension solved with a full dense eigensolve.
    power_tol: :class:`float`
        Convergence tolerance of the shifted power iteration.
    power_max_iter: :class:`int`
        Iteration limit of the shifted power iteration.
    expm_tol: :class:`float`
        Truncation tolerance of the uniformization series.
    bound_cap: :class:`int`
        Maximum number of rows of the bound matrix.
    enumeration_cap: :class:`int`
        Maximum number of states enumerated for the exact chain.
    eigensolve_cap: :class:`int`
        Maximum number of states for which the exact decay rate is computed.
    rcond_min: :class:`float`
        Smallest accepted reciprocal condition number of a subgenerator.
    sum_tol: :class:`float`
        Tolerance for probability vectors summing to one and for row sums.
    audit_interval: :class:`int`
        Events between full recomputations of the simulator's rate totals.
    audit_tol: :class:`float`
        Accepted drift between incremental and recomputed rate totals.
    event_cap: :class:`int`
        Maximum number of events of an extinction-time run.
    fit_samples: :class:`int`
        Number of target samples used by the EM refinement.
    fit_max_iter: :class:`int`
        EM iteration limit.
    fit_tol: :class:`float`
        EM stops when the log-likelihood gain per sample falls below this.
    fit_grid_points: :class:`int`
        Points of the density grid used for fit diagnostics.
    fit_grid_span: :class:`float`
        The diagnostics grid covers ``[0, fit_grid_span * mean]``.
    """
    __slots__ = (
        "dense_eig_max",
        "power_tol",
        "power_max_iter",
        "expm_tol",
        "bound_cap",
        "enumeration_cap",
        "eigensolve_cap",
        "rcond_min",
        "sum_tol",
        "audit_interval",
        "audit_tol",
        "event_cap",
        "fit_samples",
        "fit_max_iter",
        "fit_tol",
        "fit_grid_points",
        "fit_grid_span",
    )

    _defaults = {
        "dense_eig_max": 2000,
        "power_tol": 1e-10,
        "power_max_iter": 10_000,
        "expm_tol": 1e-12,
        "bound_cap": 4096,
        "enumeration_cap": 20_000,
        "eigensolve_cap": 2000,
        "rcond_min": 1e-14,
        "sum_tol": 1e-12,
        "audit_interval": 1000,
        "audit_tol": 1e-9,
        "event_cap": 10_000_000,
        "fit_samples": 100_000,
        "fit_max_iter": 500,
        "fit_tol": 1e-7,
        "fit_grid_points": 2000,
        "fit_grid_span": 10.0,
    }

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self._defaults)
        if unknown:
            raise ValueError(f"Unknown settings: {', '.join(sorted(unknown))}")
        for name, default in self._defaults.items():
            value = kwargs.get(name, default)
            if value is None or value <= 0:
                raise ValueError(f"Setting '{name}' must be positive, got {value!r}")
            setattr(self, name, type(default)(value))

    def __repr__(self):
        changed = {k: getattr(self, k) for k, v in self._defaults.items() if getattr(self, k) != v}
        inner = ",".join(f"{k}={v!r}" for k, v in changed.items())
        return f"{self.__class__.__name__}({inner})"

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return self.to_dict() == other.to_dict()
        return False

    def replace(self, **kwargs):
        """Returns a copy with the given fields changed."""
        values = self.to_dict()
        values.update(kwargs)
        return self.__class__(**values)

    def to_dict(self):
        """:class:`dict`: Every setting keyed by name."""
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_dict(cls, values):
        """Builds settings from a mapping, ignoring ``None`` values."""
        return cls(**{k: v for k, v in (values or {}).items() if v is not None})


DEFAULT_SETTINGS = Settings()


def resolve(settings):
    """Returns ``settings`` or the defaults when ``None``."""
    return DEFAULT_SETTINGS if settings is None else settings
