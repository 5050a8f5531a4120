"""Weighted graphs and the discrete calculus on them.

A graph carries a positive vertex measure ``mu`` and symmetric positive edge
weights ``w``. Vertex functions are plain float arrays indexed by the graph's
vertex order; :class:`VertexFunction` is the labelled form used at the I/O
boundary.

All operators here follow the usual conventions::

    lap u(x)     = 1/mu(x) * sum_{y~x} w_xy (u(y) - u(x))
    gamma(u,v)(x) = 1/(2 mu(x)) * sum_{y~x} w_xy (u(y)-u(x)) (v(y)-v(x))
    int f dmu    = sum_x mu(x) f(x)
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from .errors import DomainMismatchError, GraphError

# Above this size the Laplacian is applied as a sparse matrix.
DENSE_LIMIT = 256


class WeightedGraph:
    """Connected finite graph with vertex measure and symmetric edge weights.

    Parameters
    ----------
    vertices : sequence of str
        Vertex ids. Their order fixes the indexing of every vector.
    mu : sequence or mapping of float
        Positive measure per vertex.
    edges : iterable of (a, b, w)
        Unordered edges with positive weight. Self-loops and duplicates
        (in either orientation) are rejected.
    """

    def __init__(self, vertices: Sequence[str], mu, edges: Iterable[tuple[str, str, float]]):
        vertices = tuple(str(v) for v in vertices)
        if not vertices:
            raise GraphError("graph needs at least one vertex")
        index = {v: i for i, v in enumerate(vertices)}
        if len(index) != len(vertices):
            raise GraphError("duplicate vertex ids")

        if isinstance(mu, Mapping):
            if set(mu) != set(vertices):
                raise GraphError("mu must be given for exactly the graph's vertices")
            mu = [mu[v] for v in vertices]
        mu = np.array(mu, dtype=float)
        if mu.shape != (len(vertices),):
            raise GraphError("mu must have one entry per vertex")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise GraphError("vertex measure must be finite and positive")

        src, dst, wts = [], [], []
        seen = set()
        for a, b, w in edges:
            a, b, w = str(a), str(b), float(w)
            if a not in index or b not in index:
                raise GraphError(f"edge ({a}, {b}) references an unknown vertex")
            if a == b:
                raise GraphError(f"self-loop at vertex {a}")
            if not np.isfinite(w) or w <= 0:
                raise GraphError(f"edge ({a}, {b}) has non-positive weight {w}")
            key = frozenset((a, b))
            if key in seen:
                raise GraphError(f"duplicate edge ({a}, {b})")
            seen.add(key)
            src.append(index[a])
            dst.append(index[b])
            wts.append(w)

        self.vertices = vertices
        self.index = index
        self.mu = mu
        self.mu.flags.writeable = False
        self.edge_src = np.array(src, dtype=np.intp)
        self.edge_dst = np.array(dst, dtype=np.intp)
        self.edge_w = np.array(wts, dtype=float)
        for arr in (self.edge_src, self.edge_dst, self.edge_w):
            arr.flags.writeable = False

        n = len(vertices)
        W = sp.coo_matrix(
            (np.concatenate([self.edge_w, self.edge_w]),
             (np.concatenate([self.edge_src, self.edge_dst]),
              np.concatenate([self.edge_dst, self.edge_src]))),
            shape=(n, n),
        ).tocsr()
        self.weights = W
        self.degree = np.asarray(W.sum(axis=1)).ravel()

        if n > 1:
            order = breadth_first_order(W, 0, directed=False, return_predecessors=False)
            if len(order) != n:
                raise GraphError("graph is not connected")

        lap = sp.diags(1.0 / mu) @ (W - sp.diags(self.degree))
        self._lap_op = lap.toarray() if n <= DENSE_LIMIT else lap.tocsr()

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def volume(self) -> float:
        """Total measure |V|."""
        return float(self.mu.sum())

    @property
    def edges(self) -> list[tuple[str, str, float]]:
        return [(self.vertices[i], self.vertices[j], float(w))
                for i, j, w in zip(self.edge_src, self.edge_dst, self.edge_w)]

    def laplacian_matrix(self) -> np.ndarray:
        """Dense matrix L with ``L @ u == laplacian(g, u)``."""
        op = self._lap_op
        return op.copy() if isinstance(op, np.ndarray) else op.toarray()

    def apply_laplacian(self, u: np.ndarray) -> np.ndarray:
        """Unchecked Laplacian on a raw array; hot path for the integrators."""
        return self._lap_op @ u

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": v, "mu": float(m)} for v, m in zip(self.vertices, self.mu)],
            "edges": [{"a": a, "b": b, "w": w} for a, b, w in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> WeightedGraph:
        try:
            verts = [(str(v["id"]), float(v["mu"])) for v in data["vertices"]]
            edges = [(e["a"], e["b"], float(e["w"])) for e in data["edges"]]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: {exc!r}") from exc
        return cls([v for v, _ in verts], [m for _, m in verts], edges)

    @classmethod
    def load(cls, path) -> WeightedGraph:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, edges={len(self.edge_w)}, volume={self.volume:g})"


@dataclass(frozen=True)
class VertexFunction:
    """A real value per vertex, labelled by vertex id."""

    vertices: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.vertices),):
            raise DomainMismatchError("one value per vertex required")
        if not np.all(np.isfinite(vals)):
            raise DomainMismatchError("vertex function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "values", vals)

    @classmethod
    def on(cls, g: WeightedGraph, values) -> VertexFunction:
        return cls(g.vertices, as_values(g, values))

    def to_dict(self) -> dict[str, float]:
        return {v: float(x) for v, x in zip(self.vertices, self.values)}

    def __getitem__(self, vertex: str) -> float:
        return float(self.values[self.vertices.index(vertex)])


def as_values(g: WeightedGraph, u) -> np.ndarray:
    """Coerce ``u`` to a float array in ``g``'s vertex order, checking its domain.

    Accepts a :class:`VertexFunction`, a mapping vertex -> value, or an array
    of length ``g.n``.
    """
    if isinstance(u, VertexFunction):
        if u.vertices == g.vertices:
            return np.asarray(u.values, dtype=float)
        u = u.to_dict()
    if isinstance(u, Mapping):
        keys = set(u)
        if keys != set(g.vertices):
            missing = sorted(set(g.vertices) - keys)
            extra = sorted(keys - set(g.vertices))
            raise DomainMismatchError(f"domain mismatch: missing {missing}, extra {extra}")
        arr = np.array([float(u[v]) for v in g.vertices])
    else:
        arr = np.asarray(u, dtype=float)
        if arr.ndim == 0:
            raise DomainMismatchError("expected a vertex function, got a scalar")
        if arr.shape != (g.n,):
            raise DomainMismatchError(f"expected {g.n} values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainMismatchError("vertex function values must be finite")
    return arr


def laplacian(g: WeightedGraph, u) -> np.ndarray:
    return g.apply_laplacian(as_values(g, u))


def gamma(g: WeightedGraph, u, v) -> np.ndarray:
    """Gradient form Gamma(u, v), pointwise."""
    u = as_values(g, u)
    v = as_values(g, v)
    i, j, w = g.edge_src, g.edge_dst, g.edge_w
    # product of differences first so that gamma(u, v) == gamma(v, u) bitwise
    prod = w * ((u[j] - u[i]) * (v[j] - v[i]))
    acc = np.bincount(i, weights=prod, minlength=g.n) + np.bincount(j, weights=prod, minlength=g.n)
    return acc / (2.0 * g.mu)


def grad_length_sq(g: WeightedGraph, u) -> np.ndarray:
    """|grad u|^2 = Gamma(u, u)."""
    return gamma(g, u, u)


def integrate(g: WeightedGraph, f) -> float:
    return float(np.dot(g.mu, as_values(g, f)))


def mean_value(g: WeightedGraph, u) -> float:
    return integrate(g, u) / g.volume


def dirichlet_energy(g: WeightedGraph, u) -> float:
    """int |grad u|^2 dmu, summed edge-wise: sum_edges w (u_j - u_i)^2."""
    u = as_values(g, u)
    d = u[g.edge_dst] - u[g.edge_src]
    return float(np.dot(g.edge_w, d * d))


def sobolev_norm(g: WeightedGraph, u) -> float:
    u = as_values(g, u)
    return float(np.sqrt(dirichlet_energy(g, u) + np.dot(g.mu, u * u)))


def first_eigenpair(g: WeightedGraph) -> tuple[float, np.ndarray]:
    """Smallest nonzero eigenvalue of -lap and a mu-normalised eigenfunction.

    -lap is self-adjoint in L^2(mu); the similarity D^{1/2} (-lap) D^{-1/2}
    with D = diag(mu) makes it symmetric so a dense symmetric solver applies.
    """
    if g.n < 2:
        raise GraphError("first eigenvalue needs at least two vertices")
    s = np.sqrt(g.mu)
    A = g.weights.toarray()
    sym = (np.diag(g.degree) - A) / np.outer(s, s)
    sym = 0.5 * (sym + sym.T)
    evals, evecs = np.linalg.eigh(sym)
    lam1 = float(evals[1])
    if lam1 <= 1e-12 * max(1.0, float(evals[-1])):
        raise GraphError("graph is not connected (zero eigenvalue is repeated)")
    v = evecs[:, 1] / s
    v /= np.sqrt(np.dot(g.mu, v * v))
    return lam1, v


def first_eigenvalue(g: WeightedGraph) -> float:
    return first_eigenpair(g)[0]


def complete_graph(n: int, weight: float = 1.0, mu: float = 1.0) -> WeightedGraph:
    names = [f"v{i}" for i in range(n)]
    edges = [(names[i], names[j], weight) for i in range(n) for j in range(i + 1, n)]
    return WeightedGraph(names, [mu] * n, edges)


def random_connected_graph(
    n: int,
    rng: np.random.Generator,
    extra_edge_prob: float = 0.2,
    weight_range: tuple[float, float] = (0.5, 2.0),
    mu_range: tuple[float, float] = (0.5, 2.0),
) -> WeightedGraph:
    """Random spanning tree plus independent extra edges; always connected."""
    names = [f"v{i}" for i in range(n)]
    pairs = set()
    perm = rng.permutation(n)
    for k in range(1, n):
        parent = perm[rng.integers(0, k)]
        pairs.add(tuple(sorted((int(perm[k]), int(parent)))))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs and rng.random() < extra_edge_prob:
                pairs.add((i, j))
    pairs = sorted(pairs)
    w = rng.uniform(*weight_range, size=len(pairs))
    mu = rng.uniform(*mu_range, size=n)
    return WeightedGraph(names, mu, [(names[i], names[j], wk) for (i, j), wk in zip(pairs, w)])
