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

import hashlib

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from phasesis.config import resolve
from phasesis.errors import NetworkFormatError
from phasesis.models import abc

GENERATORS = ("path", "cycle", "complete", "erdos_renyi", "random_geometric")


class Network(abc.Serializable):
    """An undirected simple graph where every node has at least one neighbor.

    Networks are immutable once built.

    Attributes
    ----------
    n: :class:`int`
        Number of nodes, labelled ``0`` to ``n - 1``.
    edges: :class:`tuple`
        Sorted pairs ``(i, j)`` with ``i < j``.
    adjacency: :class:`numpy.ndarray`
        Symmetric 0/1 matrix with zero diagonal.
    neighbors: :class:`tuple`
        Sorted neighbor ids of every node.
    labels: :class:`tuple`
        Original node names when the edge list was relabelled, ``None`` otherwise.
    meta: :class:`dict`
        How the network was obtained, e.g. the generator and its seed.
    """
    __slots__ = (
        "n",
        "edges",
        "adjacency",
        "neighbors",
        "labels",
        "meta",
        "_radius",
    )

    def __init__(self, n, edges, *, labels=None, meta=None):
        n = int(n)
        if n < 2:
            raise NetworkFormatError(f"A network needs at least 2 nodes, got {n}")
        canonical = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise NetworkFormatError(f"Self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise NetworkFormatError(f"Edge ({i}, {j}) references a node outside 0..{n - 1}")
            edge = (min(i, j), max(i, j))
            if edge in canonical:
                raise NetworkFormatError(f"Duplicate edge {edge}")
            canonical.add(edge)
        adjacency = np.zeros((n, n), dtype=float)
        for i, j in canonical:
            adjacency[i, j] = adjacency[j, i] = 1.0
        isolated = np.flatnonzero(adjacency.sum(axis=1) == 0)
        if isolated.size:
            raise NetworkFormatError(f"Isolated nodes are not allowed: {isolated.tolist()}")
        adjacency.setflags(write=False)
        self.n = n
        self.edges = tuple(sorted(canonical))
        self.adjacency = adjacency
        self.neighbors = tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in adjacency)
        self.labels = tuple(labels) if labels is not None else None
        self.meta = dict(meta or {})
        self._radius = None

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.n},edges={len(self.edges)})"

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return self.n == other.n and self.edges == other.edges
        return False

    def __hash__(self):
        return hash((self.n, self.edges))

    @property
    def degrees(self):
        """:class:`list` of :class:`int`: The degree of every node."""
        return [len(nb) for nb in self.neighbors]

    # region Constructors
    @classmethod
    def load(cls, text, relabel=False):
        """Parses an edge list.

        Every line holds two node ids separated by whitespace. Blank lines and anything after ``#`` are ignored.
        An optional ``nodes N`` line fixes the node count, otherwise it is one more than the largest id.

        Parameters
        ----------
        text: :class:`str`
            The edge list.
        relabel: :class:`bool`
            Accept arbitrary node names, numbered in order of first appearance. The names are kept in
            :attr:`labels`.

        Returns
        -------
        :class:`Network`

        Raises
        ------
        NetworkFormatError
            A line is malformed, or the edges contain a self-loop, a duplicate or leave a node isolated.
        """
        declared = None
        names = {}
        edges = []
        seen = {}
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if tokens[0].lower() == "nodes":
                if len(tokens) != 2 or declared is not None or edges:
                    raise NetworkFormatError("Malformed node count header", number)
                try:
                    declared = int(tokens[1])
                except ValueError:
                    raise NetworkFormatError(f"Invalid node count {tokens[1]!r}", number) from None
                continue
            if len(tokens) != 2:
                raise NetworkFormatError(f"Expected two node ids, got {len(tokens)} fields", number)
            if relabel:
                i, j = (names.setdefault(t, len(names)) for t in tokens)
            else:
                try:
                    i, j = int(tokens[0]), int(tokens[1])
                except ValueError:
                    raise NetworkFormatError(f"Node ids must be integers: {line!r}", number) from None
                if i < 0 or j < 0:
                    raise NetworkFormatError("Node ids must be non-negative", number)
            if i == j:
                raise NetworkFormatError(f"Self-loop on node {tokens[0]}", number)
            edge = (min(i, j), max(i, j))
            if edge in seen:
                raise NetworkFormatError(f"Duplicate edge {tokens[0]} {tokens[1]} (first seen at line {seen[edge]})",
                                         number)
            seen[edge] = number
            edges.append(edge)
        if not edges:
            raise NetworkFormatError("Edge list is empty")
        largest = max(max(e) for e in edges)
        n = largest + 1
        if declared is not None:
            if declared <= largest:
                raise NetworkFormatError(f"Node count {declared} is smaller than the largest id {largest}")
            n = declared
        labels = list(names) if relabel else None
        return cls(n, edges, labels=labels, meta={"source": "edge-list"})

    @classmethod
    def generate(cls, kind, n, *, prob=None, radius=None, seed=None):
        """Builds a network from one of the standard families.

        Random families are made deterministic by ``seed``. Nodes that a random draw leaves isolated are joined to
        one neighbor: a uniformly drawn node for ``erdos_renyi`` and the nearest node for ``random_geometric``.

        Parameters
        ----------
        kind: :class:`str`
            One of ``path``, ``cycle``, ``complete``, ``erdos_renyi`` or ``random_geometric``.
        n: :class:`int`
            Number of nodes.
        prob: :class:`float`, optional
            Edge probability of ``erdos_renyi``.
        radius: :class:`float`, optional
            Connection radius of ``random_geometric`` in the unit square.
        seed: :class:`int`, optional
            Required by the random families.

        Returns
        -------
        :class:`Network`

        Raises
        ------
        ValueError
            Unknown family or parameters out of range.
        """
        n = int(n)
        if n < 2:
            raise ValueError(f"Generated networks need at least 2 nodes, got {n}")
        meta = {"generator": kind, "n": n}
        if kind == "path":
            graph = nx.path_graph(n)
        elif kind == "cycle":
            if n < 3:
                raise ValueError("A cycle needs at least 3 nodes")
            graph = nx.cycle_graph(n)
        elif kind == "complete":
            graph = nx.complete_graph(n)
        elif kind == "erdos_renyi":
            if prob is None or not 0 < prob <= 1:
                raise ValueError(f"Edge probability must be in (0, 1], got {prob!r}")
            if seed is None:
                raise ValueError("erdos_renyi needs a seed")
            rng = np.random.default_rng(seed)
            graph = nx.gnp_random_graph(n, prob, seed=int(rng.integers(2 ** 31)))
            for node in sorted(nx.isolates(graph)):
                if graph.degree(node) == 0:
                    other = int(rng.integers(n - 1))
                    graph.add_edge(node, other if other < node else other + 1)
            meta.update(prob=prob, seed=seed)
        elif kind == "random_geometric":
            if radius is None or radius <= 0:
                raise ValueError(f"Radius must be positive, got {radius!r}")
            if seed is None:
                raise ValueError("random_geometric needs a seed")
            graph = nx.random_geometric_graph(n, radius, seed=seed)
            positions = np.array([graph.nodes[v]["pos"] for v in range(n)])
            for node in sorted(nx.isolates(graph)):
                if graph.degree(node) == 0:
                    distances = np.linalg.norm(positions - positions[node], axis=1)
                    distances[node] = np.inf
                    graph.add_edge(node, int(np.argmin(distances)))
            meta.update(radius=radius, seed=seed)
        else:
            raise ValueError(f"Unknown generator {kind!r}, expected one of {', '.join(GENERATORS)}")
        return cls(n, graph.edges(), meta=meta)
    # endregion

    def spectral_radius(self, settings=None):
        """Largest eigenvalue of the adjacency matrix.

        A dense symmetric solve is used up to ``settings.dense_eig_max`` nodes, a Lanczos solve above.

        Returns
        -------
        :class:`float`
        """
        if self._radius is None:
            settings = resolve(settings)
            if self.n <= settings.dense_eig_max:
                radius = scipy.linalg.eigvalsh(self.adjacency)[-1]
            else:
                sparse = scipy.sparse.csr_matrix(self.adjacency)
                radius = scipy.sparse.linalg.eigsh(sparse, k=1, which="LA", return_eigenvectors=False)[0]
            self._radius = float(radius)
        return self._radius

    def graph_hash(self):
        """:class:`str`: A short hash of the canonical edge list, independent of how the network was built."""
        return hashlib.sha256(self.to_edge_list().encode()).hexdigest()[:16]

    def to_edge_list(self):
        """The canonical edge list, with a node count header, accepted back by :meth:`load`."""
        lines = [f"nodes {self.n}"]
        lines.extend(f"{i} {j}" for i, j in self.edges)
        return "\n".join(lines) + "\n"

    def permuted(self, permutation):
        """The same graph with node ``i`` renamed ``permutation[i]``."""
        permutation = [int(v) for v in permutation]
        if sorted(permutation) != list(range(self.n)):
            raise ValueError("Not a permutation of the node ids")
        edges = [(permutation[i], permutation[j]) for i, j in self.edges]
        return self.__class__(self.n, edges, meta=dict(self.meta, permuted=True))

    def to_networkx(self):
        """:class:`networkx.Graph`: The network as a networkx graph."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    def to_dict(self):
        return {
            "n": self.n,
            "edges": [list(e) for e in self.edges],
            "labels": list(self.labels) if self.labels is not None else None,
            "meta": self.meta,
            "hash": self.graph_hash(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["n"], data["edges"], labels=data.get("labels"), meta=data.get("meta"))
