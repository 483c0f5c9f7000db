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

from phasesis.models import abc
from phasesis.models.network import Network
from phasesis.models.phasetype import PhaseType


class GenesisModel(abc.Serializable):
    """A networked SIS process with phase-type transmission and recovery times.

    Every infected node recovers after a time drawn from :attr:`recovery`. Meanwhile it attempts to infect each
    neighbor over a separate channel, attempts being separated by independent times drawn from
    :attr:`transmission`.

    Attributes
    ----------
    network: :class:`Network`
        The contact graph.
    transmission: :class:`PhaseType`
        Law of the time between infection attempts over an edge.
    recovery: :class:`PhaseType`
        Law of the infection duration.
    initial_infected: :class:`tuple`
        Nodes infected at time zero, sorted. Used only by the simulators.
    """
    __slots__ = (
        "network",
        "transmission",
        "recovery",
        "initial_infected",
    )

    def __init__(self, network, transmission, recovery, initial_infected=None):
        if not isinstance(network, Network):
            raise TypeError(f"network must be a Network, got {network.__class__.__name__}")
        if not isinstance(transmission, PhaseType) or not isinstance(recovery, PhaseType):
            raise TypeError("transmission and recovery must be PhaseType instances")
        if initial_infected is None:
            initial_infected = range(network.n)
        infected = tuple(sorted({int(i) for i in initial_infected}))
        if not infected:
            raise ValueError("The initial infected set must not be empty")
        if infected[0] < 0 or infected[-1] >= network.n:
            raise ValueError(f"Initial infected nodes must be in 0..{network.n - 1}")
        self.network = network
        self.transmission = transmission
        self.recovery = recovery
        self.initial_infected = infected

    def __repr__(self):
        return f"{self.__class__.__name__}(network={self.network!r},transmission={self.transmission!r}," \
               f"recovery={self.recovery!r},initial_infected={self.initial_infected!r})"

    @classmethod
    def exponential(cls, network, beta, delta, initial_infected=None):
        """The classical Markovian SIS model with infection rate ``beta`` and recovery rate ``delta``."""
        return cls(network, PhaseType.exponential(beta), PhaseType.exponential(delta), initial_infected)

    @property
    def p(self):
        """:class:`int`: Order of the transmission law."""
        return self.transmission.order

    @property
    def q(self):
        """:class:`int`: Order of the recovery law."""
        return self.recovery.order

    def scaled(self, factor):
        """The model with time sped up by ``factor``: both laws have their rates multiplied by it."""
        return self.__class__(self.network, self.transmission.scaled(factor), self.recovery.scaled(factor),
                              self.initial_infected)

    def with_initial(self, initial_infected):
        """The same model started from another infected set."""
        return self.__class__(self.network, self.transmission, self.recovery, initial_infected)

    def to_dict(self):
        return {
            "network": self.network.to_dict(),
            "transmission": self.transmission.to_dict(),
            "recovery": self.recovery.to_dict(),
            "initial_infected": list(self.initial_infected),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(Network.from_dict(data["network"]), PhaseType.from_dict(data["transmission"]),
                   PhaseType.from_dict(data["recovery"]), data["initial_infected"])
