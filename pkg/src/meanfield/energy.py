"""Energy functional, flow vector field and conserved mass.

For data (G, rho, Q, phi) with int Q dmu = rho::

    J(u) = 1/2 int |grad u|^2 + int Q u - rho log int e^u
    M(u) = lap u - Q + rho e^u / int e^u
    mass(u) = int phi(u)

M is minus the L^2(mu) gradient of J, has zero mean, and is invariant under
adding a constant to u; so is J.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityError
from .graph import WeightedGraph, as_values
from .phi import Phi


def log_integral_exp(g: WeightedGraph, u: np.ndarray) -> float:
    """log int e^u dmu, shifted by max(u) against overflow."""
    m = float(u.max())
    return m + float(np.log(np.dot(g.mu, np.exp(u - m))))


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Graph, rho, source term Q and nonlinearity phi.

    Construction enforces |int Q - rho| <= 1e-10 max(1, |rho|); pass
    ``normalize=True`` to :meth:`build` to shift Q by a constant instead.
    """

    graph: WeightedGraph
    rho: float
    Q: np.ndarray
    phi: Phi

    def __post_init__(self):
        Q = as_values(self.graph, self.Q).copy()
        Q.flags.writeable = False
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "rho", float(self.rho))
        total = float(np.dot(self.graph.mu, Q))
        if abs(total - self.rho) > 1e-10 * max(1.0, abs(self.rho)):
            raise CompatibilityError(
                f"compatibility condition violated: int Q dmu = {total!r} but rho = {self.rho!r}")

    @classmethod
    def build(cls, graph: WeightedGraph, rho: float, Q, phi: Phi, normalize: bool = False):
        Q = as_values(graph, Q)
        if normalize:
            Q = Q + (float(rho) - float(np.dot(graph.mu, Q))) / graph.volume
        return cls(graph, rho, Q, phi)

    @classmethod
    def uniform(cls, graph: WeightedGraph, rho: float, phi: Phi):
        """Q = rho / |V| everywhere."""
        return cls(graph, rho, np.full(graph.n, float(rho) / graph.volume), phi)

    # Unchecked array kernels used by the integrators.

    def dirichlet(self, u: np.ndarray) -> float:
        g = self.graph
        d = u[g.edge_dst] - u[g.edge_src]
        return float(np.dot(g.edge_w, d * d))

    def energy(self, u: np.ndarray) -> float:
        g = self.graph
        return (0.5 * self.dirichlet(u) + float(np.dot(g.mu, self.Q * u))
                - self.rho * log_integral_exp(g, u))

    def field(self, u: np.ndarray) -> np.ndarray:
        g = self.graph
        e = np.exp(u - u.max())
        return g.apply_laplacian(u) - self.Q + self.rho * e / np.dot(g.mu, e)

    def mass(self, u: np.ndarray) -> float:
        return float(np.dot(self.graph.mu, self.phi.value(u)))


def j_rho(p: ProblemData, u) -> float:
    return p.energy(as_values(p.graph, u))


def field_m(p: ProblemData, u) -> np.ndarray:
    return p.field(as_values(p.graph, u))


def mass(p: ProblemData, u) -> float:
    return p.mass(as_values(p.graph, u))


def dj_pairing(p: ProblemData, u, h) -> float:
    """<dJ(u), h> = -int M(u) h dmu."""
    u = as_values(p.graph, u)
    h = as_values(p.graph, h)
    return -float(np.dot(p.graph.mu, p.field(u) * h))


def l2_norm(g: WeightedGraph, f: np.ndarray) -> float:
    return float(np.sqrt(np.dot(g.mu, f * f)))
