"""Flow-free solution of the mean field equation, and convergence diagnostics.

``newton_solve`` finds u with M(u) = 0 and int phi(u) dmu = m. Because
M(u + c) = M(u), the l equations M(u) = 0 only determine u up to a constant
(one of them is redundant: the mu-weighted sum of M vanishes). The mass row
pins the constant; the (l+1) x l system is solved in least-squares form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .energy import ProblemData, log_integral_exp
from .errors import FitError
from .flow import TrajectoryRecord, restore_mass
from .graph import as_values


@dataclass(frozen=True)
class SteadyResult:
    u_star: np.ndarray
    residual_inf: float
    mass_error: float  # relative: (mass(u*) - target) / target
    newton_iters: int
    converged: bool
    jacobian_cond: float = math.nan
    message: str = ""


def field_jacobian(p: ProblemData, u: np.ndarray) -> np.ndarray:
    """dM/du: L + rho (diag(s) - s (mu s)^T) with s = e^u / int e^u."""
    g = p.graph
    e = np.exp(u - np.max(u))
    s = e / np.dot(g.mu, e)
    return g.laplacian_matrix() + p.rho * (np.diag(s) - np.outer(s, g.mu * s))


def augmented_jacobian(p: ProblemData, u, mass_target: float) -> np.ndarray:
    """Jacobian of (M(u), (mass(u) - m) / m), shape (l+1, l)."""
    u = as_values(p.graph, u)
    row = p.graph.mu * p.phi.deriv(u) / mass_target
    return np.vstack([field_jacobian(p, u), row])


def newton_solve(p: ProblemData, mass_target: float, u_init, *, tol: float = 1e-10,
                 max_iter: int = 100, max_halvings: int = 30) -> SteadyResult:
    """Damped Gauss-Newton on M(u) = 0, int phi(u) = mass_target.

    The seed is first translated so that its mass matches the target; this
    leaves M unchanged. Backtracking halves the step until the merit
    ||M||_2^2 + (relative mass error)^2 decreases.
    """
    mass_target = float(mass_target)
    if not (mass_target > 0 and math.isfinite(mass_target)):
        raise ValueError(f"mass_target must be positive and finite, got {mass_target!r}")
    u = restore_mass(p, as_values(p.graph, u_init).copy(), mass_target, iters=50)

    def residual(u):
        return np.append(p.field(u), (p.mass(u) - mass_target) / mass_target)

    def done(r):
        return bool(np.max(np.abs(r[:-1])) <= tol and abs(r[-1]) <= tol)

    r = residual(u)
    merit = float(r @ r)
    message = ""
    it = 0
    while not done(r) and it < max_iter:
        it += 1
        Jac = augmented_jacobian(p, u, mass_target)
        delta, *_ = np.linalg.lstsq(Jac, -r, rcond=None)
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = u + lam * delta
            try:
                r_trial = residual(trial)
            except ArithmeticError:
                r_trial = None
            if r_trial is not None and np.all(np.isfinite(r_trial)):
                with np.errstate(over="ignore"):
                    m_trial = float(r_trial @ r_trial)
                if m_trial < merit or done(r_trial):
                    break
            lam *= 0.5
        else:
            message = f"line search failed at iteration {it} (merit {merit:.3e})"
            break
        u, r, merit = trial, r_trial, m_trial
    else:
        if not done(r):
            message = f"no convergence in {max_iter} iterations (merit {merit:.3e})"

    try:
        cond = float(np.linalg.cond(augmented_jacobian(p, u, mass_target)))
    except (ArithmeticError, np.linalg.LinAlgError):
        cond = math.inf
    return SteadyResult(u, float(np.max(np.abs(r[:-1]))), float(r[-1]), it, done(r), cond, message)


def kazdan_warner_residual(p: ProblemData, u_star) -> float:
    """||lap v - Q + rho e^v||_inf at v = u* - log int e^{u*} dmu."""
    u = as_values(p.graph, u_star)
    v = u - log_integral_exp(p.graph, u)
    return float(np.max(np.abs(p.graph.apply_laplacian(v) - p.Q + p.rho * np.exp(v))))


class LojasiewiczFit(NamedTuple):
    theta: float
    c: float
    fit_quality: float


def fit_lojasiewicz(j_values, grad_norms, j_limit: float, min_samples: int = 10,
                    gap_floor: float = 1e-14) -> LojasiewiczFit:
    """Fit |J - J_inf|^(1 - theta) <= C ||M|| over the tail of a trajectory.

    Samples with J - J_inf at or below ``gap_floor`` (or the roundoff level of
    J itself) carry no information and are dropped; of the rest, the later
    half is used. The exponent comes from a least-squares slope in log-log
    coordinates, clipped to theta in (0, 1/2]; C is the smallest constant for
    which every tail sample satisfies the inequality.
    """
    j = np.asarray(j_values, dtype=float)
    m = np.asarray(grad_norms, dtype=float)
    floor = max(gap_floor, 64 * np.finfo(float).eps * max(1.0, abs(j_limit)))
    gap = j - j_limit
    usable = np.flatnonzero((gap > floor) & (m > 0))
    if usable.size < min_samples:
        raise FitError(f"only {usable.size} usable samples (need {min_samples})")
    tail = usable[usable.size // 2:]
    x = np.log(gap[tail])
    y = np.log(m[tail])
    if np.ptp(x) == 0.0:
        raise FitError("energy gap is constant over the tail")
    slope = np.polyfit(x, y, 1)[0]
    theta = float(np.clip(1.0 - slope, 1e-6, 0.5))
    log_c = float(np.max((1.0 - theta) * x - y))
    c = math.exp(log_c)
    # re-check pointwise in the original (non-log) form
    lhs = gap[tail] ** (1.0 - theta)
    ok = lhs <= c * m[tail] * (1.0 + 1e-9)
    return LojasiewiczFit(theta, c, float(np.mean(ok)))


def lojasiewicz_fit(traj: TrajectoryRecord, j_limit: float) -> LojasiewiczFit:
    """Lojasiewicz fit using J and ||M||_{L^2} from a recorded trajectory."""
    return fit_lojasiewicz(traj.column("j"), traj.column("residual_l2"), j_limit)
