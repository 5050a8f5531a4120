"""Time integration of the heat flow d/dt phi(u) = M(u).

In ODE form the flow reads du/dt = M(u) / phi'(u). It is integrated with the
Dormand-Prince 5(4) embedded pair. A step is accepted only if

1. the embedded error estimate is within the per-step tolerance,
2. the relative mass drift of the step is within ``mass_drift_tol``,
3. J does not increase by more than ``ENERGY_SLACK``.

Rejected steps halve dt. After acceptance, u is shifted by the constant that
restores the initial mass exactly; J and M are invariant under that shift.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .energy import ProblemData, l2_norm
from .errors import StiffnessError
from .graph import as_values

log = logging.getLogger(__name__)

ENERGY_SLACK = 1e-10

# Dormand-Prince 5(4) tableau; the last row of A equals the 5th-order weights
_A = np.array([
    [0, 0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0],
])
_B5 = _A[6].copy()
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class StepFailure(RuntimeError):
    """dt fell below the minimum without an acceptable step."""


@dataclass
class FlowProblem:
    data: ProblemData
    u0: np.ndarray
    tol_residual: float = 1e-8
    t_max: float = 1e6
    dt_init: float = 1e-2
    mass_drift_tol: float = 1e-8
    record_every: int = 10
    rk_tol: float = 1e-10

    def __post_init__(self):
        self.u0 = as_values(self.data.graph, self.u0).copy()
        for name in ("tol_residual", "t_max", "dt_init", "mass_drift_tol", "rk_tol"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val!r}")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be a positive integer")
        self.record_every = int(self.record_every)


@dataclass(frozen=True)
class Sample:
    t: float
    u: np.ndarray
    j: float
    residual_inf: float
    mass: float
    residual_l2: float


@dataclass(frozen=True)
class TrajectoryRecord:
    samples: tuple[Sample, ...]
    status: str  # "converged" | "horizon_reached" | "step_failure"
    accepted_steps: int = 0
    rejected_steps: int = 0
    max_abs_u: float = 0.0
    # max over accepted states of (1/4) int |grad u|^2 - J(u)
    coercivity_gap: float = -np.inf
    message: str = ""

    @property
    def final(self) -> Sample:
        return self.samples[-1]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])


class StepResult(NamedTuple):
    u_next: np.ndarray
    dt_accepted: float
    error_estimate: float
    dt_next: float
    rejected: int


def _rhs(p: ProblemData, u: np.ndarray) -> np.ndarray:
    d = p.phi.fast_deriv(u)
    if not d.min() > 0.0:
        k = int(np.argmin(d))
        vertex = p.graph.vertices[k]
        raise StiffnessError(f"phi'(u) underflowed to 0 at vertex {vertex!r} (u={u[k]!r})", vertex)
    return p.field(u) / d


def rhs(p: ProblemData, u) -> np.ndarray:
    """du/dt = M(u) / phi'(u), pointwise."""
    return _rhs(p, as_values(p.graph, u))


def dissipation(p: ProblemData, u) -> float:
    """dJ/dt along the flow: -int phi'(u) (du/dt)^2 dmu."""
    u = as_values(p.graph, u)
    v = _rhs(p, u)
    return -float(np.dot(p.graph.mu, p.phi.deriv(u) * v * v))


def dopri_step(p: ProblemData, u: np.ndarray, dt: float, k1: np.ndarray | None = None):
    """One Dormand-Prince step. Returns (u5, u5 - u4, rhs(u5))."""
    K = np.empty((7, u.size))
    K[0] = _rhs(p, u) if k1 is None else k1
    for i in range(1, 7):
        K[i] = _rhs(p, u + dt * (_A[i, :i] @ K[:i]))
    # stage 7 is evaluated at the 5th-order solution
    return u + dt * (_B5 @ K), dt * (_E @ K), K[6]


def restore_mass(p: ProblemData, u: np.ndarray, target: float, iters: int = 4) -> np.ndarray:
    """Shift u by the constant c solving int phi(u + c) dmu = target (Newton)."""
    mu = p.graph.mu
    c = 0.0
    for _ in range(iters):
        w = u + c
        r = float(np.dot(mu, p.phi.value(w))) - target
        if abs(r) <= 1e-16 * target:
            break
        c -= r / float(np.dot(mu, p.phi.deriv(w)))
    return u + c


def step(p: ProblemData, u, dt: float, *, rk_tol: float = 1e-10, mass_drift_tol: float = 1e-8,
         dt_min: float = 1e-8, k1: np.ndarray | None = None, j_u: float | None = None,
         ) -> StepResult:
    """Take one accepted adaptive step from u, trying dt first.

    Raises :class:`StepFailure` if dt drops below ``dt_min``.
    """
    u = as_values(p.graph, u)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if k1 is None:
        k1 = _rhs(p, u)
    if j_u is None:
        j_u = p.energy(u)
    m_u = p.mass(u)
    scale = rk_tol * (1.0 + float(np.abs(u).max()))
    rejected = 0
    while True:
        if dt < dt_min:
            raise StepFailure(f"step size {dt:.3e} fell below {dt_min:.3e}")
        try:
            u5, err_vec, _ = dopri_step(p, u, dt, k1)
        except (StiffnessError, FloatingPointError, ArithmeticError) as exc:
            log.debug("stage evaluation failed at dt=%g: %s", dt, exc)
            dt *= 0.5
            rejected += 1
            continue
        err = float(np.abs(err_vec).max()) / scale
        # NaN anywhere makes err NaN and fails the comparison
        ok = err <= 1.0 and np.isfinite(u5).all()
        if ok:
            drift = abs(p.mass(u5) - m_u) / m_u
            ok = drift <= mass_drift_tol and p.energy(u5) <= j_u + ENERGY_SLACK
        if ok:
            grow = 2.0 if err == 0.0 else min(2.0, 0.9 * err ** -0.2)
            if rejected:
                grow = min(grow, 1.0)
            return StepResult(u5, dt, err, dt * max(grow, 0.2), rejected)
        dt *= 0.5
        rejected += 1


def integrate(fp: FlowProblem) -> TrajectoryRecord:
    """Run the flow from u0 until ||M||_inf < tol_residual or t >= t_max."""
    p = fp.data
    g = p.graph
    u = fp.u0.copy()
    m0 = p.mass(u)
    t = 0.0
    dt = fp.dt_init
    dt_min = 1e-14 * fp.t_max

    def sample(t, u, M, j):
        return Sample(t, u.copy(), j, float(np.abs(M).max()), p.mass(u), l2_norm(g, M))

    M = p.field(u)
    j = p.energy(u)
    samples = [sample(t, u, M, j)]
    accepted = rejected = 0
    max_abs = float(np.max(np.abs(u)))
    gap = _coercivity_gap(p, u, j)

    def finish(status, message=""):
        if samples[-1].t != t:
            samples.append(sample(t, u, M, j))
        return TrajectoryRecord(tuple(samples), status, accepted, rejected, max_abs, gap, message)

    if np.abs(M).max() < fp.tol_residual:
        return finish("converged")
    try:
        k1 = _rhs(p, u)
    except StiffnessError as exc:
        return finish("step_failure", str(exc))

    while True:
        if t >= fp.t_max:
            return finish("horizon_reached")
        h = min(dt, fp.t_max - t)
        try:
            res = step(p, u, h, rk_tol=fp.rk_tol, mass_drift_tol=fp.mass_drift_tol,
                       dt_min=dt_min, k1=k1, j_u=j)
        except StepFailure as exc:
            return finish("step_failure", f"{exc} at t={t:.6g}")
        u = restore_mass(p, res.u_next, m0)
        t = t + res.dt_accepted
        # keep the controller's dt when the step was shortened only to hit t_max
        dt = res.dt_next if h == dt or res.rejected else dt
        accepted += 1
        rejected += res.rejected
        M = p.field(u)
        j = p.energy(u)
        max_abs = max(max_abs, float(np.abs(u).max()))
        gap = max(gap, _coercivity_gap(p, u, j))
        if np.abs(M).max() < fp.tol_residual:
            return finish("converged")
        if accepted % fp.record_every == 0:
            samples.append(sample(t, u, M, j))
        try:
            k1 = _rhs(p, u)
        except StiffnessError as exc:
            return finish("step_failure", str(exc))


def _coercivity_gap(p: ProblemData, u: np.ndarray, j: float) -> float:
    return 0.25 * p.dirichlet(u) - j


def run_flow(data: ProblemData, u0, **options) -> TrajectoryRecord:
    """Convenience wrapper: ``integrate(FlowProblem(data, u0, **options))``."""
    return integrate(FlowProblem(data, u0, **options))
