import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanfield.errors import PhiAdmissibilityError, PhiRangeError
from meanfield.phi import (GRID, CustomPhi, ExpPhi, ExpPolyPhi, QuadLogPhi, phi_deriv, phi_eval,
                           phi_from_dict, phi_invert)

from conftest import builtin_phis

ALL = builtin_phis() + [ExpPhi(2.5), ExpPolyPhi(0.5, 3.0, 1.5), QuadLogPhi(20.0), QuadLogPhi(1.5)]
ids = [repr(p) for p in ALL]


def test_exp_values():
    phi = ExpPhi(1.0)
    assert phi_eval(phi, 0.0) == 1.0
    assert phi_deriv(phi, 0.0) == 1.0
    assert phi_deriv(phi, 1.3) == pytest.approx(math.exp(1.3), rel=1e-15)


def test_exp_poly_values():
    phi = ExpPolyPhi(alpha=1.0, beta=2.0, p=2.0)
    assert phi(1.0) == pytest.approx(math.e + 2, rel=1e-15)
    assert phi.deriv(1.0) == pytest.approx(math.e + 4, rel=1e-15)
    assert phi(-1.0) == pytest.approx(math.exp(-1), rel=1e-15)


def test_quad_log_branches_meet_at_zero():
    phi = QuadLogPhi(a=math.e)
    L = 1.0
    assert phi(0.0) == 1.0
    # positive-branch formula evaluated at 0: 0 + L (0 + 1 - 1) + 1
    assert 0.0 + L * (0.0 + math.cos(0.0) - 1.0) + 1.0 == 1.0
    assert phi(2.0) == pytest.approx(4 + (2 + math.cos(2) - 1) + 1, rel=1e-15)
    assert phi(-2.0) == pytest.approx(math.exp(-2), rel=1e-15)


@pytest.mark.parametrize("phi", [ExpPolyPhi(1.0, 2.0, 2.0), ExpPolyPhi(0.7, 1.0, 1.3),
                                 QuadLogPhi(math.e), QuadLogPhi(30.0)], ids=repr)
def test_c1_matching_at_zero(phi):
    if isinstance(phi, ExpPolyPhi):
        pos_v = math.exp(0.0) + phi.beta * 0.0**phi.p
        neg_v = math.exp(0.0)
        pos_d = phi.alpha + phi.beta * phi.p * 0.0 ** (phi.p - 1)
        neg_d = phi.alpha
    else:
        L = phi.log_a
        pos_v, neg_v = 0.0 + L * (0.0 + 1.0 - 1.0) + 1.0, 1.0
        pos_d, neg_d = 0.0 + L * (1.0 - 0.0), L
    assert abs(pos_v - neg_v) <= 1e-12 and abs(pos_d - neg_d) <= 1e-12
    h = 1e-9
    # p = 1.3 is only C^{1,0.3} at 0, so the symmetric quotient converges slowly
    assert phi(h) - phi(-h) == pytest.approx(2 * h * phi.deriv(0.0), rel=5e-3)
    h = 1e-40  # phi' is only Holder continuous at 0 when p < 2
    assert phi.deriv(h) == pytest.approx(phi.deriv(-h), abs=1e-10)


@pytest.mark.parametrize("phi", ALL, ids=ids)
def test_positive_monotone_on_grid(phi):
    v = phi(GRID)
    d = phi.deriv(GRID)
    assert np.all(v > 0) and np.all(d > 0)
    assert np.all(np.diff(v) > 0)


@pytest.mark.parametrize("phi", builtin_phis(), ids=repr)
def test_vanishing_gate_for_default_builtins(phi):
    assert phi(-50.0) < 1e-6 * phi(0.0)


@pytest.mark.parametrize("phi", ALL, ids=ids)
def test_central_difference(phi):
    # stay clear of the kink at 0, where the piecewise families are only C^1
    s = np.concatenate([np.linspace(-5, -0.1, 20), np.linspace(0.1, 5, 20)])
    errs = []
    for h in (1e-2, 5e-3):
        fd = (phi(s + h) - phi(s - h)) / (2 * h)
        errs.append(np.max(np.abs(fd - phi.deriv(s)) / (1 + np.abs(phi.deriv(s)))))
    assert errs[0] < 1e-3
    # second order: halving h divides the error by about 4
    assert errs[1] < errs[0] / 3


@pytest.mark.parametrize("phi", ALL, ids=ids)
def test_linear_lower_bound(phi):
    a = float(phi.deriv(GRID[GRID >= 0]).min())
    assert a == pytest.approx(phi.inf_deriv_nonneg, rel=1e-3)
    assert np.all(phi(GRID) >= a * GRID)


def test_quad_log_analytic_inf_deriv():
    phi = QuadLogPhi(30.0)
    s = np.linspace(0, 10, 2_000_001)
    assert phi.inf_deriv_nonneg == pytest.approx(phi.deriv(s).min(), rel=1e-9)
    assert phi.inf_deriv_nonneg < math.log(30.0)


@settings(max_examples=200)
@given(st.floats(-60, 60), st.floats(-60, 60))
def test_strict_monotonicity_random_pairs(s1, s2):
    lo, hi = min(s1, s2), max(s1, s2)
    for phi in ALL[:3]:
        assert phi(lo) <= phi(hi)
        if hi - lo > 1e-12 * (1 + abs(lo)):
            assert phi(lo) < phi(hi)


class TestInvert:
    def test_exp(self):
        phi = ExpPhi()
        assert phi_invert(phi, 1.0) == 0.0
        assert phi_invert(phi, 2.0) == pytest.approx(math.log(2), abs=1e-15)

    @pytest.mark.parametrize("phi", ALL, ids=ids)
    def test_round_trip(self, phi):
        for s in np.linspace(-20, 20, 81):
            y = phi(s)
            back = phi.invert(y)
            assert abs(back - s) <= 1e-10
            assert abs(phi(back) - y) <= 1e-12 * max(1.0, y)

    @pytest.mark.parametrize("phi", ALL, ids=ids)
    def test_generic_route(self, phi):
        # the base-class bracketing + Brent path, also for exp
        from meanfield.phi import Phi

        for y in (1e-7, 0.3, 1.0, 2.0, 1e3):
            s = Phi.invert(phi, y)
            assert abs(phi(s) - y) <= 1e-12 * max(1.0, y)

    @pytest.mark.parametrize("y", [0.0, -1.0, math.inf, math.nan])
    def test_out_of_range(self, y):
        for phi in builtin_phis():
            with pytest.raises(PhiRangeError):
                phi.invert(y)

    def test_beyond_evaluable_range(self):
        with pytest.raises(PhiRangeError):
            QuadLogPhi().invert(1e300)


class TestValidation:
    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=-1.0)])
    def test_exp_bad(self, kw):
        with pytest.raises(PhiAdmissibilityError):
            ExpPhi(**kw)

    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(beta=-1.0), dict(p=1.0), dict(p=0.5)])
    def test_exp_poly_bad(self, kw):
        with pytest.raises(PhiAdmissibilityError):
            ExpPolyPhi(**kw)

    @pytest.mark.parametrize("a", [1.0, 0.5, -2.0])
    def test_quad_log_bad(self, a):
        with pytest.raises(PhiAdmissibilityError):
            QuadLogPhi(a)

    def test_custom_ok(self):
        phi = CustomPhi(lambda s: np.exp(s) + np.where(s > 0, np.maximum(s, 0) ** 2, 0.0),
                        lambda s: np.exp(s) + np.where(s > 0, 2 * np.maximum(s, 0), 0.0),
                        vanishes_at_minus_infinity=True)
        assert phi.inf_deriv_nonneg == pytest.approx(1.0)
        assert phi.invert(phi(1.5)) == pytest.approx(1.5, abs=1e-12)
        with pytest.raises(TypeError):
            phi.to_dict()

    def test_custom_rejects_degenerate_derivative(self):
        with pytest.raises(PhiAdmissibilityError):
            # logistic: phi' -> 0 as s -> inf, so inf over [0, inf) is ~0 on the grid
            CustomPhi(lambda s: 1 / (1 + np.exp(-s)), lambda s: np.exp(-s) / (1 + np.exp(-s)) ** 2,
                      vanishes_at_minus_infinity=True)

    def test_custom_rejects_nonmonotone(self):
        with pytest.raises(PhiAdmissibilityError):
            CustomPhi(lambda s: np.exp(s) * (1.5 + np.sin(3 * s)),
                      lambda s: np.exp(s) * (1.5 + np.sin(3 * s) + 3 * np.cos(3 * s)),
                      vanishes_at_minus_infinity=True)

    def test_custom_requires_declaration(self):
        with pytest.raises(PhiAdmissibilityError):
            CustomPhi(np.exp, np.exp, vanishes_at_minus_infinity=False)

    def test_range_error(self):
        with pytest.raises(PhiRangeError):
            ExpPolyPhi(1.0, 1.0, 2.0)(501.0)
        with pytest.raises(PhiRangeError):
            ExpPhi(2.0)(400.0)  # exp(800) overflows
        with pytest.raises(PhiRangeError):
            ExpPhi().deriv(np.array([0.0, math.nan]))
        assert math.isfinite(QuadLogPhi()(500.0))


class TestJson:
    @pytest.mark.parametrize("data", [
        {"kind": "exp", "alpha": 1.0},
        {"kind": "exp_poly", "alpha": 1.0, "beta": 0.0, "p": 2.0},
        {"kind": "quad_log", "a": 2.718281828},
    ])
    def test_round_trip(self, data):
        phi = phi_from_dict(data)
        assert phi.to_dict() == data

    @pytest.mark.parametrize("data", [{}, {"kind": "cubic"}, {"kind": "exp", "gamma": 1},
                                      {"kind": "exp", "alpha": -1}, []])
    def test_bad(self, data):
        with pytest.raises(PhiAdmissibilityError):
            phi_from_dict(data)
