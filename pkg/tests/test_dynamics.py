import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from bubblelab.dynamics import (
    DecayParams, decay_envelope, ode_decay_check, extinction_time_lower,
    eig_competitor_bound, small_window_lambda1, window_ladder,
    capacity_blowup_bound, euclidean_leading_constant,
)
from bubblelab.moments import fde_exponents


def params(n=2, m=0.5, E0=1.0, M0=1.0, C=1.0):
    return DecayParams(n=n, m=m, E0=E0, M0=M0, C=C)


# independent Bessel oracle: J0 by power series, first root by bisection
def j0_series(x: float) -> float:
    total, term = 1.0, 1.0
    for k in range(1, 60):
        term *= -(x * x / 4.0) / (k * k)
        total += term
        if abs(term) < 1e-18:
            break
    return total


def j0_first_root() -> float:
    lo, hi = 2.0, 3.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if j0_series(lo) * j0_series(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestDecayEnvelope:
    def test_alpha_half_unit_kappa(self):
        # kappa = (m+1) C^(-2) M0^(-2): choose C, M0 so kappa = 1
        par = params(C=1.5 ** 0.5, M0=1.0)
        assert par.alpha == 0.5
        assert par.kappa == pytest.approx(1.0, rel=1e-12)
        t = np.linspace(0.0, 30.0, 7)
        assert np.allclose(decay_envelope(par, t), 1.0 / (1.0 + t), rtol=1e-14)

    def test_t0_returns_E0(self):
        for m in (0.3, 0.5, 0.8):
            par = params(m=m, E0=2.7)
            assert decay_envelope(par, 0.0) == pytest.approx(2.7, rel=1e-14)

    def test_large_time_rate_n2(self):
        # n = 2: envelope * t -> 1/kappa
        par = params(m=0.4)
        t = 1e8
        assert decay_envelope(par, t) * t == pytest.approx(1.0 / par.kappa, rel=1e-6)

    def test_no_bernoulli_regime_rejected(self):
        bad = DecayParams(n=3, m=1.0 / 3.0, E0=1.0, M0=1.0, C=1.0)  # alpha = 1
        with pytest.raises(ValueError, match="Bernoulli"):
            decay_envelope(bad, 1.0)

    @settings(max_examples=20, deadline=None)
    @given(m=st.floats(0.15, 0.85))
    def test_envelope_continuous_in_m(self, m):
        t = 3.0
        e1 = decay_envelope(params(m=m), t)
        e2 = decay_envelope(params(m=m + 1e-7), t)
        assert abs(e1 - e2) < 1e-4


class TestODECheck:
    def test_alpha_half_closed_form(self):
        par = params()
        chk = ode_decay_check(par, 100.0)
        assert chk["sup_gap"] <= 1e-8
        assert chk["majorized"]

    def test_alpha_07(self):
        # n = 3, m chosen so alpha = 0.7: alpha = 3m/(6m-1) -> m = 7/11... use
        # any admissible pair and read alpha off the params
        par = DecayParams(n=3, m=0.7, E0=1.0, M0=1.0, C=1.0)
        assert 0 < par.alpha < 1
        chk = ode_decay_check(par, 50.0)
        assert chk["sup_gap"] <= 1e-8
        assert chk["majorized"]

    def test_near_exponential_flagged(self):
        # alpha -> 1^-: n = 3, m slightly above 1/3
        par = DecayParams(n=3, m=0.3404, E0=1.0, M0=1.0, C=1.0)
        assert par.alpha > 0.95
        chk = ode_decay_check(par, 5.0)
        assert chk["near_exponential"]

    def test_euclidean_leading_mode(self):
        par = DecayParams(n=2, m=0.5, E0=1.0, M0=1.0)
        assert par.C == pytest.approx(euclidean_leading_constant(2, 0.5), rel=1e-9)
        assert par.C > 0

    def test_kappa_formula(self):
        par = DecayParams(n=2, m=0.5, E0=2.0, M0=3.0, C=1.7)
        ex = fde_exponents(2, 0.5)
        expect = 1.5 * 1.7 ** (-1.0 / ex.alpha) * 3.0 ** (-ex.beta / ex.alpha)
        assert par.kappa == pytest.approx(expect, rel=1e-12)


class TestExtinction:
    def test_arithmetic(self):
        assert extinction_time_lower(1.0, 0.5, 1.0) == pytest.approx(2.0)

    @settings(max_examples=20, deadline=None)
    @given(y0=st.floats(0.1, 10.0))
    def test_scaling_in_y0(self, y0):
        m, lam = 0.4, 2.0
        base = extinction_time_lower(1.0, m, lam)
        assert extinction_time_lower(y0, m, lam) == pytest.approx(
            base * y0 ** (1 - m), rel=1e-12)

    def test_ode_witness_crossing(self):
        # z = y^(1-m) falls linearly; its numerical crossing time matches
        y0, m, lam = 1.7, 0.5, 1.3
        bound = extinction_time_lower(y0, m, lam)

        def rhs(t, z):
            return [-(1.0 - m) * lam]

        def hit(t, z):
            return z[0]
        hit.terminal = True

        sol = solve_ivp(rhs, (0.0, 10 * bound), [y0 ** (1 - m)], events=[hit],
                        rtol=1e-12, atol=1e-14)
        assert sol.t_events[0][0] == pytest.approx(bound, abs=1e-8)

    def test_domain(self):
        with pytest.raises(ValueError):
            extinction_time_lower(1.0, 1.2, 1.0)
        with pytest.raises(ValueError):
            extinction_time_lower(-1.0, 0.5, 1.0)


class TestEigCompetitor:
    def test_unit_volume(self):
        # vol = 1: bound = lambda^(-beta/2)
        lam, n, p = 2.3, 2, 3.0
        beta = n * (p - 1) / 2.0
        assert eig_competitor_bound(1.0, lam, n, p) == pytest.approx(lam ** (-beta / 2))

    def test_lambda_halving_scales(self):
        n, p = 3, 3.0
        beta = n * (p - 1) / 2.0
        b1 = eig_competitor_bound(2.0, 1.0, n, p)
        b2 = eig_competitor_bound(2.0, 0.5, n, p)
        assert b2 == pytest.approx(b1 * 2 ** (beta / 2), rel=1e-12)

    def test_unit_disk(self):
        # n = 2, p = 3 (beta = 2): bound = 1/(pi lambda_1) with the disk value
        lam = small_window_lambda1(2, 0.0)
        b = eig_competitor_bound(math.pi, lam, 2, 3.0)
        assert b == pytest.approx(1.0 / (math.pi * lam), rel=1e-10)


class TestWindowEigenvalues:
    def test_full_disk_vs_bessel_oracle(self):
        lam = small_window_lambda1(2, 0.0)
        j01 = j0_first_root()
        assert abs(lam - j01 ** 2) / j01 ** 2 < 1e-6

    def test_n3_exact_transcendental(self):
        # mixed problem in n = 3 solves tan(k(1-d)) = k exactly
        d = 0.2
        lam = small_window_lambda1(3, d)
        k = math.sqrt(lam)
        assert math.tan(k * (1 - d)) == pytest.approx(k, rel=1e-6)

    def test_monotone_in_window_radius(self):
        lams = [small_window_lambda1(2, d) for d in (0.05, 0.2, 0.5, 0.8)]
        assert np.all(np.diff(lams) > 0)

    def test_thin_annulus_blows_up(self):
        assert small_window_lambda1(2, 0.9) > small_window_lambda1(2, 0.5) * 5

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            small_window_lambda1(4, 0.1)


class TestCapacityScaling:
    def test_n2_ladder_stabilizes(self):
        lad = window_ladder(2, [1e-2, 1e-3, 1e-4, 1e-5])
        assert lad["tail_variation"] < 0.15

    def test_n3_ladder_stabilizes(self):
        lad = window_ladder(3, [1e-2, 1e-3, 1e-4, 1e-5])
        assert lad["tail_variation"] < 0.15
        # the scaled column converges to the exact capacity constant 3
        assert lad["scaled"][-1] == pytest.approx(3.0, rel=1e-3)

    def test_capacity_blowup_exponent_n3(self):
        cap = capacity_blowup_bound(3, 3.0, [1e-2, 1e-3, 1e-4, 1e-5])
        assert abs(cap["fitted_exponent"] - cap["expected_exponent"]) \
            <= 0.1 * abs(cap["expected_exponent"])

    def test_fixed_window_bound_finite(self):
        cap = capacity_blowup_bound(2, 3.0, [1e-2, 1e-3])
        assert np.all(np.isfinite(cap["bound"])) and np.all(cap["bound"] > 0)
