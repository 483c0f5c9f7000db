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

import enum

from phasesis.models import abc


class Verdict(enum.Enum):
    """Outcome of checking a decay rate against a model."""
    BOUND_CERTIFIED = "bound-certified"
    EXACT_CERTIFIED = "exact-certified"
    EXACT_REFUTED = "exact-refuted"
    UNDETERMINED = "undetermined"

    def __str__(self):
        return self.value


class StabilityReport(abc.Serializable):
    """Stability quantities of a model, together with the inputs needed to reproduce them.

    Attributes
    ----------
    bound_dim: :class:`int`
        Rows of the bound matrix, ``n·p·q``.
    eta_a: :class:`float`
        Spectral abscissa of the bound matrix.
    exact_rate: :class:`float`, optional
        The exact decay rate ``-r``, when the exact chain was small enough.
    exact_state_count: :class:`int`, optional
        Number of states of the exact chain, when it could be enumerated.
    verdicts: :class:`dict`
        :class:`Verdict` per queried decay rate.
    exact_error: :class:`str`, optional
        Why the exact rate is missing.
    inputs: :class:`dict`
        Graph hash, law digests, settings and software version.
    first_order: :class:`bool`
        The bound ignores the higher-order correction terms, it is always ``True``.
    """
    __slots__ = (
        "bound_dim",
        "eta_a",
        "exact_rate",
        "exact_state_count",
        "verdicts",
        "exact_error",
        "inputs",
        "first_order",
    )

    def __init__(self, bound_dim, eta_a, *, exact_rate=None, exact_state_count=None, verdicts=None,
                 exact_error=None, inputs=None, first_order=True):
        self.bound_dim = bound_dim
        self.eta_a = eta_a
        self.exact_rate = exact_rate
        self.exact_state_count = exact_state_count
        self.verdicts = dict(verdicts or {})
        self.exact_error = exact_error
        self.inputs = dict(inputs or {})
        self.first_order = first_order

    def __repr__(self):
        return f"{self.__class__.__name__}(bound_rate={self.bound_rate!r},exact_rate={self.exact_rate!r})"

    @property
    def bound_rate(self):
        """:class:`float`: The certified decay rate ``-η(𝓐)``."""
        return None if self.eta_a is None else -self.eta_a

    @property
    def exact_abscissa(self):
        """:class:`float`: The spectral abscissa ``r`` of the transient block of the exact generator."""
        return None if self.exact_rate is None else -self.exact_rate

    def to_dict(self):
        return {
            "bound_dim": self.bound_dim,
            "eta_A": self.eta_a,
            "bound_rate": self.bound_rate,
            "exact_rate": self.exact_rate,
            "exact_state_count": self.exact_state_count,
            "exact_error": self.exact_error,
            "verdicts": [{"lambda": lam, "verdict": str(v)} for lam, v in self.verdicts.items()],
            "inputs": self.inputs,
            "first_order": self.first_order,
        }

    @classmethod
    def from_dict(cls, data):
        verdicts = {float(v["lambda"]): Verdict(v["verdict"]) for v in data.get("verdicts", [])}
        return cls(data["bound_dim"], data["eta_A"], exact_rate=data.get("exact_rate"),
                   exact_state_count=data.get("exact_state_count"), verdicts=verdicts,
                   exact_error=data.get("exact_error"), inputs=data.get("inputs"),
                   first_order=data.get("first_order", True))
