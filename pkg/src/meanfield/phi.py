"""Admissible nonlinearities phi for the flow d/dt phi(u) = M(u).

Admissible means C^1 with

* phi'(s) > 0 everywhere,
* inf over s >= 0 of phi'(s) > 0,
* phi(s) -> 0 as s -> -inf (hence phi > 0).

Three built-in families are provided plus a user-supplied ``CustomPhi``.
Every instance is validated numerically on a uniform grid at construction.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import PhiAdmissibilityError, PhiRangeError

S_MAX = 500.0
EXP_ARG_MAX = 700.0
GRID = np.linspace(-50.0, 50.0, 2001)


class Phi:
    """Base class. Subclasses implement ``_value`` and ``_deriv`` on arrays."""

    kind = "abstract"
    _fast_limit = S_MAX
    # Analytic inf_{s>=0} phi'(s) where known; otherwise the grid estimate.
    inf_deriv_nonneg: float

    def __call__(self, s):
        return self.value(s)

    def value(self, s):
        s = self._checked(s)
        out = self._value(s)
        return float(out) if out.ndim == 0 else out

    def deriv(self, s):
        s = self._checked(s)
        out = self._deriv(s)
        return float(out) if out.ndim == 0 else out

    def fast_deriv(self, s: np.ndarray) -> np.ndarray:
        """phi' on a float array with only the range check; integrator hot path."""
        if not s.max() <= self._fast_limit:
            self._checked(s)
        return self._deriv(s)

    def _checked(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        top = s.max() if s.size else 0.0
        if not top <= self._fast_limit:
            if np.isnan(s).any() or (s > S_MAX).any():
                raise PhiRangeError(f"phi argument outside (-inf, {S_MAX}]: max {np.nanmax(s)}")
            self._range_hook(s)
        return s

    def _range_hook(self, s: np.ndarray) -> None:
        """Family-specific overflow check, run only when max(s) is large."""

    def invert(self, y: float) -> float:
        """The unique s with phi(s) = y, by bracketing and Brent refinement."""
        y = float(y)
        if not (y > 0.0 and math.isfinite(y)):
            raise PhiRangeError(f"{y} is outside the range (0, inf) of phi")
        f = lambda s: self.value(s) - y  # noqa: E731
        lo, hi = -1.0, 1.0
        while f(lo) > 0:
            lo *= 2.0
            if lo < -1e6:
                raise PhiRangeError(f"could not bracket phi^-1({y}) from below")
        while f(hi) < 0:
            if hi >= S_MAX:
                raise PhiRangeError(f"{y} exceeds phi({S_MAX}); outside the evaluable range")
            hi = min(2.0 * hi, S_MAX)
        s = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        # one Newton polish step; brentq stops on the bracket width, not on |f|
        d = self.deriv(s)
        if d > 0:
            cand = s - f(s) / d
            if abs(f(cand)) < abs(f(s)):
                s = cand
        return float(s)

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} is not serializable")

    def _validate(self, check_vanishing: bool = False) -> None:
        v = self._value(GRID)
        d = self._deriv(GRID)
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(d)):
            raise PhiAdmissibilityError(f"{self.kind}: non-finite values on the validation grid")
        if np.any(v <= 0):
            raise PhiAdmissibilityError(f"{self.kind}: phi must be positive")
        if np.any(d <= 0):
            raise PhiAdmissibilityError(f"{self.kind}: phi' must be positive")
        if np.any(np.diff(v) <= 0):
            raise PhiAdmissibilityError(f"{self.kind}: phi must be strictly increasing")
        if d[GRID >= 0].min() <= 0:
            raise PhiAdmissibilityError(f"{self.kind}: inf of phi' on [0, inf) must be positive")
        if check_vanishing and not v[0] < 1e-6 * float(self._value(np.array(0.0))):
            raise PhiAdmissibilityError(f"{self.kind}: phi(-50) is not small against phi(0)")

    def grid_inf_deriv_nonneg(self) -> float:
        return float(self._deriv(GRID[GRID >= 0]).min())

    def __repr__(self) -> str:
        try:
            params = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items() if k != "kind")
        except TypeError:
            params = "..."
        return f"{type(self).__name__}({params})"


class ExpPhi(Phi):
    """phi(s) = exp(alpha s)."""

    kind = "exp"

    def __init__(self, alpha: float = 1.0):
        alpha = float(alpha)
        if not alpha > 0:
            raise PhiAdmissibilityError("exp: alpha must be > 0")
        self.alpha = alpha
        self._fast_limit = min(S_MAX, EXP_ARG_MAX / alpha)
        self.inf_deriv_nonneg = alpha
        self._validate()

    def _range_hook(self, s):
        if (self.alpha * s > EXP_ARG_MAX).any():
            raise PhiRangeError("exp(alpha s) would overflow")

    def _value(self, s):
        return np.exp(self.alpha * s)

    def _deriv(self, s):
        return self.alpha * np.exp(self.alpha * s)

    def invert(self, y):
        # closed form agrees with the generic route; kept for speed
        y = float(y)
        if not (y > 0.0 and math.isfinite(y)):
            raise PhiRangeError(f"{y} is outside the range (0, inf) of phi")
        s = math.log(y) / self.alpha
        if s > S_MAX:
            raise PhiRangeError(f"{y} exceeds phi({S_MAX})")
        return s

    def to_dict(self):
        return {"kind": "exp", "alpha": self.alpha}


class ExpPolyPhi(Phi):
    """phi(s) = exp(alpha s) + beta s^p for s > 0, exp(alpha s) for s <= 0."""

    kind = "exp_poly"

    def __init__(self, alpha: float = 1.0, beta: float = 0.0, p: float = 2.0):
        alpha, beta, p = float(alpha), float(beta), float(p)
        if not alpha > 0:
            raise PhiAdmissibilityError("exp_poly: alpha must be > 0")
        if not beta >= 0:
            raise PhiAdmissibilityError("exp_poly: beta must be >= 0")
        if not p > 1:
            raise PhiAdmissibilityError("exp_poly: p must be > 1")
        self.alpha, self.beta, self.p = alpha, beta, p
        self._fast_limit = min(S_MAX, EXP_ARG_MAX / alpha)
        # both terms of phi' are nondecreasing on [0, inf); minimum at s = 0
        self.inf_deriv_nonneg = alpha
        self._validate()

    def _range_hook(self, s):
        if (self.alpha * s > EXP_ARG_MAX).any():
            raise PhiRangeError("exp(alpha s) would overflow")

    def _value(self, s):
        pos = np.maximum(s, 0.0)
        return np.exp(self.alpha * s) + np.where(s > 0, self.beta * pos**self.p, 0.0)

    def _deriv(self, s):
        pos = np.maximum(s, 0.0)
        return self.alpha * np.exp(self.alpha * s) + np.where(
            s > 0, self.beta * self.p * pos ** (self.p - 1.0), 0.0)

    def to_dict(self):
        return {"kind": "exp_poly", "alpha": self.alpha, "beta": self.beta, "p": self.p}


class QuadLogPhi(Phi):
    """phi(s) = s^2 + log(a) (s + cos s - 1) + 1 for s > 0, a^s for s <= 0."""

    kind = "quad_log"

    def __init__(self, a: float = math.e):
        a = float(a)
        if not a > 1:
            raise PhiAdmissibilityError("quad_log: a must be > 1")
        self.a = a
        self.log_a = math.log(a)
        L = self.log_a
        # phi'(s) = 2s + L(1 - sin s) on s > 0; phi'' = 2 - L cos s.
        if L <= 2.0:
            self.inf_deriv_nonneg = L
        else:
            s_star = math.acos(2.0 / L)
            self.inf_deriv_nonneg = 2.0 * s_star + L * (1.0 - math.sin(s_star))
        self._validate()

    def _value(self, s):
        L = self.log_a
        pos = np.maximum(s, 0.0)
        neg = np.minimum(s, 0.0)
        return np.where(s > 0, pos * pos + L * (pos + np.cos(pos) - 1.0) + 1.0, np.exp(L * neg))

    def _deriv(self, s):
        L = self.log_a
        pos = np.maximum(s, 0.0)
        neg = np.minimum(s, 0.0)
        return np.where(s > 0, 2.0 * pos + L * (1.0 - np.sin(pos)), L * np.exp(L * neg))

    def to_dict(self):
        return {"kind": "quad_log", "a": self.a}


class CustomPhi(Phi):
    """User-supplied phi with derivative.

    The asymptotic conditions cannot be machine-checked; the caller declares
    ``vanishes_at_minus_infinity`` and the grid checks cover the rest.
    """

    kind = "custom"

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        deriv: Callable[[np.ndarray], np.ndarray],
        vanishes_at_minus_infinity: bool,
        inf_deriv_nonneg: float | None = None,
    ):
        if not vanishes_at_minus_infinity:
            raise PhiAdmissibilityError("custom: phi must vanish at -infinity")
        self._f = func
        self._df = deriv
        self._validate()
        grid_inf = self.grid_inf_deriv_nonneg()
        self.inf_deriv_nonneg = grid_inf if inf_deriv_nonneg is None else float(inf_deriv_nonneg)
        if not self.inf_deriv_nonneg > 0:
            raise PhiAdmissibilityError("custom: declared inf of phi' must be positive")

    def _value(self, s):
        return np.asarray(self._f(s), dtype=float)

    def _deriv(self, s):
        return np.asarray(self._df(s), dtype=float)


_KINDS = {"exp": ExpPhi, "exp_poly": ExpPolyPhi, "quad_log": QuadLogPhi}


def phi_from_dict(data: Mapping) -> Phi:
    """Build a built-in phi from its JSON form, e.g. ``{"kind": "exp", "alpha": 1.0}``."""
    if not isinstance(data, Mapping) or "kind" not in data:
        raise PhiAdmissibilityError("phi spec must be an object with a 'kind' field")
    kind = data["kind"]
    if kind not in _KINDS:
        raise PhiAdmissibilityError(f"unknown phi kind {kind!r}; expected one of {sorted(_KINDS)}")
    params = {k: v for k, v in data.items() if k != "kind"}
    try:
        return _KINDS[kind](**params)
    except TypeError as exc:
        raise PhiAdmissibilityError(f"bad parameters for phi kind {kind!r}: {exc}") from exc


def phi_eval(spec: Phi, s):
    return spec.value(s)


def phi_deriv(spec: Phi, s):
    return spec.deriv(s)


def phi_invert(spec: Phi, y: float) -> float:
    return spec.invert(y)
