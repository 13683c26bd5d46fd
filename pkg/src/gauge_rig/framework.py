"""Rod-and-mass frameworks: point masses joined by ideal rods.

A :class:`RodFramework` holds the combinatorial and metric data of a system:
labelled vertices with masses and unordered edges with rest lengths.
Coordinates live in separate containers, :class:`Configuration` for positions
alone and :class:`PhasePoint` for a full state (positions and momenta per
vertex, one tension and one multiplier momentum per edge).

Conventions used by every matrix in the package:

* vertex labels are arbitrary strings mapped to dense indices in input order;
* edges are stored with the lower-index endpoint first and sorted
  lexicographically by endpoint indices, so the reference system lists its
  edges as 1-2, 1-3, 1-4, 2-3, 2-4, 3-4;
* all arrays handed out are read-only; types are immutable after
  construction and safe to share across threads.
"""

import math

import numpy as np

from .errors import FrameworkError

__all__ = [
    "RodFramework",
    "Configuration",
    "PhasePoint",
    "validate",
    "reference_framework",
    "rigidity_matrix",
]


def _readonly(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class RodFramework:
    """Immutable description of a bar-joint system with point masses.

    Parameters
    ----------
    vertices : iterable of (label, mass)
        Order defines the internal vertex indexing.
    edges : iterable of ((label_a, label_b), rest_length)
        Unordered pairs of distinct vertex labels.
    dimension : int
        Spatial dimension of the ambient space (2 for all bundled systems).
    """

    def __init__(self, vertices, edges, dimension=2):
        vertex_list = [(str(vid), float(m)) for vid, m in vertices]
        self.vertex_ids = tuple(vid for vid, _ in vertex_list)
        self.masses = _readonly([m for _, m in vertex_list])
        self.dimension = int(dimension)
        self._index = {vid: k for k, vid in enumerate(self.vertex_ids)}
        if len(self._index) != len(self.vertex_ids):
            raise FrameworkError("duplicate vertex label")

        pairs = []
        lengths = []
        for (a, b), length in edges:
            a, b = str(a), str(b)
            for vid in (a, b):
                if vid not in self._index:
                    raise FrameworkError(f"edge endpoint {vid!r} is not a vertex")
            ia, ib = self._index[a], self._index[b]
            if ia == ib:
                raise FrameworkError(f"self-loop on vertex {a!r}")
            pairs.append((min(ia, ib), max(ia, ib)))
            lengths.append(float(length))
        order = sorted(range(len(pairs)), key=pairs.__getitem__)
        pairs = [pairs[k] for k in order]
        lengths = [lengths[k] for k in order]

        self.edge_pairs = _readonly(pairs, dtype=int).reshape(len(pairs), 2)
        self.rest_lengths = _readonly(lengths)
        self.edges = tuple(
            (self.vertex_ids[i], self.vertex_ids[j]) for i, j in pairs
        )
        self._edge_index = {pair: k for k, pair in enumerate(map(tuple, pairs))}
        validate(self)

    # -- basic queries ----------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertex_ids)

    @property
    def n_edges(self):
        return len(self.edges)

    def vertex_index(self, label):
        try:
            return self._index[str(label)]
        except KeyError:
            raise FrameworkError(f"unknown vertex {label!r}") from None

    def edge_index(self, edge):
        """Index of an edge given as a (label, label) pair, either order."""
        ia, ib = (self.vertex_index(v) for v in edge)
        key = (min(ia, ib), max(ia, ib))
        try:
            return self._edge_index[key]
        except KeyError:
            a, b = edge
            raise FrameworkError(f"no edge between {a!r} and {b!r}") from None

    def edge_label(self, k):
        a, b = self.edges[k]
        return f"{a}-{b}"

    @property
    def edge_labels(self):
        return tuple(self.edge_label(k) for k in range(self.n_edges))

    def without_edge(self, a, b):
        """A new framework with the edge between ``a`` and ``b`` removed."""
        drop = self.edge_index((a, b))
        kept = [
            (self.edges[k], self.rest_lengths[k])
            for k in range(self.n_edges)
            if k != drop
        ]
        return RodFramework(
            zip(self.vertex_ids, self.masses), kept, dimension=self.dimension
        )

    # -- cached derived arrays --------------------------------------------

    def incidence(self):
        """Signed vertex-edge incidence: +1 at the lower-index endpoint."""
        cached = self.__dict__.get("_incidence")
        if cached is None:
            B = np.zeros((self.n_vertices, self.n_edges))
            cols = np.arange(self.n_edges)
            B[self.edge_pairs[:, 0], cols] = 1.0
            B[self.edge_pairs[:, 1], cols] = -1.0
            B.setflags(write=False)
            cached = self.__dict__["_incidence"] = B
        return cached

    def pair_weights(self):
        """Edge-pair mass weights sum_v B[v,e] B[v,e'] / m_v."""
        cached = self.__dict__.get("_pair_weights")
        if cached is None:
            B = self.incidence()
            W = (B / self.masses[:, None]).T @ B
            W.setflags(write=False)
            cached = self.__dict__["_pair_weights"] = W
        return cached

    @property
    def squared_lengths(self):
        cached = self.__dict__.get("_sq_lengths")
        if cached is None:
            cached = self.__dict__["_sq_lengths"] = _readonly(self.rest_lengths**2)
        return cached

    def __repr__(self):
        return (
            f"RodFramework({self.n_vertices} vertices, {self.n_edges} edges, "
            f"dimension={self.dimension})"
        )


def validate(framework):
    """Check every structural invariant; return the framework unchanged.

    Raises :class:`FrameworkError` naming the first violated invariant:
    non-positive mass or rest length, self-loops, duplicate edges, dangling
    endpoints, or a disconnected graph.
    """
    if framework.n_vertices == 0:
        raise FrameworkError("framework has no vertices")
    if framework.dimension < 1:
        raise FrameworkError("dimension must be at least 1")
    for vid, m in zip(framework.vertex_ids, framework.masses):
        if not (m > 0.0) or not math.isfinite(m):
            raise FrameworkError(f"non-positive mass on vertex {vid!r}")
    seen = set()
    for k, (i, j) in enumerate(framework.edge_pairs):
        i, j = int(i), int(j)
        if i == j:
            raise FrameworkError(f"self-loop on vertex {framework.vertex_ids[i]!r}")
        if not (0 <= i < framework.n_vertices and 0 <= j < framework.n_vertices):
            raise FrameworkError("edge endpoint out of range")
        if (i, j) in seen:
            raise FrameworkError(f"duplicate edge {framework.edge_label(k)}")
        seen.add((i, j))
        length = framework.rest_lengths[k]
        if not (length > 0.0) or not math.isfinite(length):
            raise FrameworkError(
                f"non-positive rest length on edge {framework.edge_label(k)}"
            )
    # connectivity by breadth-first search
    if framework.n_vertices > 1:
        adjacency = [[] for _ in range(framework.n_vertices)]
        for i, j in framework.edge_pairs:
            adjacency[int(i)].append(int(j))
            adjacency[int(j)].append(int(i))
        reached = {0}
        queue = [0]
        while queue:
            v = queue.pop()
            for w in adjacency[v]:
                if w not in reached:
                    reached.add(w)
                    queue.append(w)
        if len(reached) != framework.n_vertices:
            missing = sorted(
                framework.vertex_ids[v]
                for v in range(framework.n_vertices)
                if v not in reached
            )
            raise FrameworkError(f"disconnected graph, unreachable vertices {missing}")
    return framework


class Configuration:
    """Positions for every vertex, one row per vertex in framework order."""

    def __init__(self, coords):
        coords = np.array(coords, dtype=float)
        if coords.ndim != 2:
            raise FrameworkError("configuration must be a 2-D array of positions")
        coords.setflags(write=False)
        self.coords = coords

    @classmethod
    def from_mapping(cls, framework, mapping):
        """Build from a label -> position mapping covering every vertex."""
        missing = [v for v in framework.vertex_ids if v not in mapping]
        if missing:
            raise FrameworkError(f"positions missing for vertices {missing}")
        extra = [v for v in mapping if v not in framework._index]
        if extra:
            raise FrameworkError(f"positions given for unknown vertices {sorted(extra)}")
        rows = []
        for vid in framework.vertex_ids:
            row = np.asarray(mapping[vid], dtype=float).ravel()
            if row.size != framework.dimension:
                raise FrameworkError(
                    f"position of vertex {vid!r} must have {framework.dimension} components"
                )
            rows.append(row)
        return cls(rows)

    def __repr__(self):
        return f"Configuration({self.coords.shape[0]} vertices)"


class PhasePoint:
    """One state: positions, momenta, tensions, and multiplier momenta.

    Multiplier momenta are identically zero for every admissible state; the
    constructor rejects nonzero values.  All arrays are copied and read-only.
    """

    __slots__ = ("positions", "momenta", "tensions", "edge_momenta")

    def __init__(self, positions, momenta, tensions, edge_momenta=None):
        self.positions = _readonly(positions)
        self.momenta = _readonly(momenta)
        self.tensions = _readonly(tensions)
        if self.positions.ndim != 2 or self.momenta.shape != self.positions.shape:
            raise ValueError("positions and momenta must be matching 2-D arrays")
        if self.tensions.ndim != 1:
            raise ValueError("tensions must be a 1-D array")
        if edge_momenta is None:
            zeros = np.zeros_like(self.tensions)
            zeros.setflags(write=False)
            self.edge_momenta = zeros
        else:
            self.edge_momenta = _readonly(edge_momenta)
            if self.edge_momenta.shape != self.tensions.shape:
                raise ValueError("edge momenta must match tensions in shape")
            if np.any(self.edge_momenta != 0.0):
                raise ValueError("multiplier momenta must vanish identically")

    def replace(self, positions=None, momenta=None, tensions=None):
        return PhasePoint(
            self.positions if positions is None else positions,
            self.momenta if momenta is None else momenta,
            self.tensions if tensions is None else tensions,
        )

    def __repr__(self):
        nv, d = self.positions.shape
        return f"PhasePoint({nv} vertices x {d}d, {self.tensions.size} tensions)"


def check_point(framework, point):
    """Raise if the point's index sets do not match the framework."""
    nv, ne, d = framework.n_vertices, framework.n_edges, framework.dimension
    if point.positions.shape != (nv, d):
        raise ValueError(
            f"positions shape {point.positions.shape} does not match "
            f"framework ({nv}, {d})"
        )
    if point.tensions.shape != (ne,):
        raise ValueError(
            f"tension count {point.tensions.size} does not match framework ({ne})"
        )


def as_coords(framework, positions):
    """Coerce a Configuration or array-like to a validated (nv, d) array."""
    coords = positions.coords if isinstance(positions, Configuration) else positions
    coords = np.asarray(coords, dtype=float)
    expected = (framework.n_vertices, framework.dimension)
    if coords.shape != expected:
        raise ValueError(f"positions shape {coords.shape} does not match {expected}")
    return coords


def reference_framework(ell=1.0, m=1.0):
    """The bundled four-mass, six-rod system and its standard placement.

    One mass sits at the barycenter of an equilateral triangle of side
    ``ell * sqrt(3)`` formed by the other three; the central rods have length
    ``ell``.  Returns ``(framework, configuration)`` with the central vertex
    labelled "1" and outer vertices "2", "3", "4".
    """
    if not ell > 0:
        raise FrameworkError("ell must be positive")
    if not m > 0:
        raise FrameworkError("m must be positive")
    outer = ell * math.sqrt(3.0)
    vertices = [("1", m), ("2", m), ("3", m), ("4", m)]
    edges = [
        (("1", "2"), ell),
        (("1", "3"), ell),
        (("1", "4"), ell),
        (("2", "3"), outer),
        (("2", "4"), outer),
        (("3", "4"), outer),
    ]
    framework = RodFramework(vertices, edges)
    half = 0.5 * ell
    s = math.sqrt(3.0) / 2.0 * ell
    coords = Configuration([[0.0, 0.0], [0.0, ell], [s, -half], [-s, -half]])
    return framework, coords


def rigidity_matrix(framework, positions):
    """Gradient of the squared edge lengths with respect to all positions.

    Row e (edge i-j) holds ``+2 (q_i - q_j)`` in the columns of vertex i,
    ``-2 (q_i - q_j)`` in the columns of vertex j, zero elsewhere, so the
    velocity-level length conditions read ``R @ velocities == 0``.
    """
    coords = as_coords(framework, positions)
    nv, d = coords.shape
    ne = framework.n_edges
    R = np.zeros((ne, nv * d))
    for e, (i, j) in enumerate(framework.edge_pairs):
        i, j = int(i), int(j)
        delta = 2.0 * (coords[i] - coords[j])
        R[e, d * i : d * i + d] = delta
        R[e, d * j : d * j + d] = -delta
    return R
