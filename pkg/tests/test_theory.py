import math

import numpy as np
import pytest

from sqzphase import theory as th

LN2_HALF = 0.5 * math.log(2.0)  # e^{2r} = 2


def test_wrap_angle_range():
    for x in [0.0, 0.5, -0.5, math.pi, -math.pi, 3 * math.pi, -3 * math.pi, 7.1, 2 * math.pi]:
        w = th.wrap_angle(x)
        assert -math.pi < w <= math.pi
        assert abs(math.sin(w - x)) < 1e-12 and math.cos(w - x) > 0.99
    assert th.wrap_angle(math.pi) == pytest.approx(math.pi)
    assert th.wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_epsilon_from_r():
    assert th.epsilon_from_r(0.0) == 0.0
    # algebraic inversion of the defining relation at e^{2r} = 2
    expect = (math.sqrt(2) - 1) / (math.sqrt(2) + 1)
    assert th.epsilon_from_r(LN2_HALF) == pytest.approx(expect, abs=1e-12)
    for r in (0.1, 1.0, 3.0):
        assert th.r_from_epsilon(th.epsilon_from_r(r)) == pytest.approx(r, abs=1e-12)
    with pytest.raises(ValueError):
        th.epsilon_from_r(-0.1)


def test_photon_flux():
    assert th.photon_flux(2.0, 123.0, 0.0) == pytest.approx(1.0)
    # sinh^2(ln2 / 2) = 1/8 so the squeezing part alone gives 8 * 1/8 = 1
    assert th.photon_flux(0.0, 16.0, LN2_HALF) == pytest.approx(1.0, abs=1e-12)
    for n, g, r in [(1.0, 0.0, 0.0), (5.0, 3.0, 0.7), (2.0, 10.0, 0.2)]:
        e = th.amplitude_from_flux(n, g, r)
        assert th.photon_flux(e, g, r) == pytest.approx(n, abs=1e-12)
    with pytest.raises(ValueError):
        th.amplitude_from_flux(1.0, 100.0, 2.0)


def test_beam_params_validation():
    p = th.BeamParams.coherent(1000.0)
    assert p.e_amp == pytest.approx(2.0 * math.sqrt(1000.0))
    assert p.epsilon == 0.0
    with pytest.raises(ValueError):
        th.BeamParams(n_flux=1.0, gamma=100.0, r=2.0)  # squeezing flux > N
    with pytest.raises(ValueError):
        th.BeamParams(n_flux=1.0, gamma=0.0, r=0.5)  # squeezing needs a cavity
    p2 = th.BeamParams.from_amplitude(2.0, 16.0, LN2_HALF)
    assert p2.n_flux == pytest.approx(2.0)
    assert p2.e_scaled == pytest.approx(0.5)


def test_scheme_config():
    assert len(th.ALL_SCHEMES) == 6
    assert len({s.label for s in th.ALL_SCHEMES}) == 6
    ad_arb = th.SchemeConfig("adaptive", "arbitrary")
    assert ad_arb.free_parameters == ("chi", "delta", "r", "gamma")
    het_coh = th.SchemeConfig("heterodyne", "coherent")
    assert het_coh.free_parameters == ("chi",)
    assert het_coh.r_max == 0.0
    lim = th.SchemeConfig("adaptive", "limited")
    assert lim.r_max == pytest.approx(LN2_HALF)
    with pytest.raises(ValueError):
        lim.validate_point(r=0.9 * math.log(2.0), gamma=1.0)
    with pytest.raises(ValueError):
        het_coh.validate_point(r=0.1, gamma=0.0)
    with pytest.raises(ValueError):
        th.SchemeConfig("homodyne", "arbitrary")


class TestSteadyState:
    def test_coherent_is_identity(self):
        for ang in (0.0, 0.3, 1.2):
            st = th.steady_state_g_matrix(0.0, ang)
            assert st.a == pytest.approx(1.0, abs=1e-12)
            assert st.b == pytest.approx(0.0, abs=1e-12)
            assert st.d == pytest.approx(1.0, abs=1e-12)

    def test_aligned_angle_closed_form(self):
        for r in (0.3, 1.0, 2.5):
            eps = th.epsilon_from_r(r)
            st = th.steady_state_g_matrix(r, 0.0)
            assert st.a == pytest.approx(1.0 - eps, abs=1e-12)
            assert st.d == pytest.approx(1.0 / (1.0 - eps), abs=1e-12)
            assert st.b == pytest.approx(0.0, abs=1e-12)
            assert st.lam.real == pytest.approx(1.0 / (math.exp(r) + 1.0), abs=1e-12)

    def test_residuals_on_grid(self):
        worst = 0.0
        for r in np.linspace(0.0, 3.0, 50):
            for ang in np.linspace(0.0, math.pi, 50, endpoint=False):
                worst = max(worst, *map(abs, th.steady_state_g_matrix(r, ang).equation_residuals()))
        assert worst < 1e-10

    def test_positivity_and_delta(self):
        for r in (0.5, 1.5, 3.0):
            for ang in np.linspace(-math.pi, math.pi, 23):
                st = th.steady_state_g_matrix(r, ang)
                assert st.a > 0 and st.d > 0 and st.delta >= 0
                t = st.x_aux**2 + st.y_aux**2
                assert 0.5 * st.delta**2 == pytest.approx(
                    math.sqrt(t * t + st.y_aux**2) - t, abs=1e-12
                )
                assert st.lam == pytest.approx(0.5 * (st.a + 1j * st.delta))

    def test_omega_limit_continuity(self):
        # Y -> 0 limit Omega = a - 1; continuity from Y = 1e-6
        for r in (0.5, 1.0, 2.0):
            eps = th.epsilon_from_r(r)
            st0 = th.steady_state_g_matrix(r, 0.0)
            assert st0.omega == pytest.approx(st0.a - 1.0, abs=1e-14)
            ang = 1e-6 / eps  # makes Y = eps*s*c ~ 1e-6
            st1 = th.steady_state_g_matrix(r, ang)
            assert abs(st1.omega - st0.omega) < 1e-4

    def test_regression_values(self):
        st = th.steady_state_g_matrix(1.0, 0.5)
        assert st.a == pytest.approx(0.9407648184673288, abs=1e-12)
        assert st.b == pytest.approx(0.46075043431132306, abs=1e-12)
        assert st.d == pytest.approx(1.2886227662011294, abs=1e-12)
        assert st.omega == pytest.approx(-0.059235181532671155 + 0.460750434311323j, abs=1e-12)
        assert st.lam == pytest.approx(0.4703824092336644 + 0.2066713017870525j, abs=1e-12)


class TestInfoIdentity:
    def test_trivial_and_pinned(self):
        assert th.info_identity_check(0.0, 0.7) < 1e-10
        st = th.steady_state_g_matrix(1.0, 0.0)
        lhs = (1.0 - (st.omega / st.lam).real) ** 2
        assert lhs == pytest.approx(math.exp(2.0), rel=1e-10)
        assert th.info_identity_check(1.0, 0.0) < 1e-10
        assert th.info_identity_check(2.0, math.pi / 4) < 1e-8

    def test_grid(self):
        for r in np.linspace(0.0, 3.0, 50):
            for ang in np.linspace(0.0, math.pi, 50, endpoint=False):
                assert th.info_identity_check(r, ang) < 1e-8


class TestNoiseInfo:
    def test_f_constant_at_r0(self):
        vals = [th.noise_info_f(0.0, 0.7, v) for v in (-0.4, -0.1, 0.0, 0.2, 0.5)]
        assert max(vals) - min(vals) < 1e-8

    def test_f_regression(self):
        # regression anchor, recorded from the first verified evaluation
        assert th.noise_info_f(1.0, 0.3, 0.1) == pytest.approx(-0.22630151536768017, abs=1e-12)

    def test_g_equals_half_curvature_of_f(self):
        h = 1e-3
        for r, u in [(0.5, 0.2), (1.0, 0.5)]:
            fd = 0.5 * (
                th.noise_info_f(r, u, h) - 2.0 * th.noise_info_f(r, u, 0.0) + th.noise_info_f(r, u, -h)
            ) / h**2
            assert th.noise_info_g(r, u) == pytest.approx(fd, rel=1e-4)

    def test_g_trivial_and_regression(self):
        assert th.noise_info_g(0.0, 0.9) == 0.0
        assert th.noise_info_g(1.0, 0.0) == 0.0
        assert th.noise_info_g(1.0, 0.5) == pytest.approx(0.8216320713723363, abs=1e-12)
        assert th.noise_info_g(0.5, 0.2) == pytest.approx(0.16514339042246703, abs=1e-12)

    def test_g_bound_and_sign(self):
        # Fig.2-style bound: max over the LO angle of g/e^{3r} stays below 1/4
        grid = np.linspace(-math.pi, math.pi, 4096, endpoint=False)
        for r in np.arange(0.25, 3.01, 0.25):
            vals = np.array([th.noise_info_g(r, u) for u in grid]) / math.exp(3.0 * r)
            assert vals.max() <= 0.25
            assert vals.min() >= 0.0

    def test_h(self):
        assert th.noise_info_h(0.0) == 0.0
        assert th.noise_info_h(1.0) == pytest.approx(
            math.cosh(1.0) - (th.epsilon_from_r(1.0) ** 2 + 1.0) ** -0.5, abs=1e-14
        )
        # h scales as e^r: the ratio flattens
        r4 = th.noise_info_h(4.0) / math.exp(4.0)
        r6 = th.noise_info_h(6.0) / math.exp(6.0)
        assert abs(r4 - r6) / r6 < 0.10
        rs = np.linspace(0.0, 4.0, 40)
        hv = [th.noise_info_h(r) for r in rs]
        assert all(b >= a >= 0.0 for a, b in zip(hv, hv[1:]))


class TestInfoRates:
    def test_adaptive(self):
        coh = th.BeamParams.coherent(1000.0)
        assert th.adaptive_info_rate(coh, 0.0) == pytest.approx(4.0 * 1000.0)
        p = th.BeamParams.from_amplitude(2.0, 1.0, 1.0)
        assert th.adaptive_info_rate(p, 0.0) == pytest.approx(
            4.0 * math.exp(2.0) + 1.0 * th.noise_info_g(1.0, 0.0)
        )
        # coherent term vanishes at pi/2
        assert th.adaptive_info_rate(p, math.pi / 2) == pytest.approx(
            p.gamma * th.noise_info_g(1.0, math.pi / 2)
        )

    def test_heterodyne(self):
        coh = th.BeamParams.coherent(1000.0)
        assert th.heterodyne_info_rate(coh) == pytest.approx(2.0 * 1000.0)
        p = th.BeamParams.from_amplitude(2.0, 1.0, 1.0)
        assert th.heterodyne_info_rate(p) == pytest.approx(4.79383077213029, abs=1e-12)
        # large-r limit of the coherent term is E^2
        p20 = th.BeamParams.from_amplitude(2.0, 1e-10, 20.0)
        assert p20.e_amp**2 / (1.0 + math.exp(-40.0)) == pytest.approx(4.0, rel=1e-12)


def test_predicted_variance_table():
    adapt_coh = th.SchemeConfig("adaptive", "coherent")
    het_coh = th.SchemeConfig("heterodyne", "coherent")
    adapt_lim = th.SchemeConfig("adaptive", "limited")
    het_lim = th.SchemeConfig("heterodyne", "limited")
    p0 = th.BeamParams.coherent(1e4)
    plim = th.BeamParams(n_flux=1e4, gamma=100.0, r=LN2_HALF)
    assert th.predicted_variance(adapt_coh, p0) == pytest.approx(0.5)
    assert th.predicted_variance(het_coh, p0) == pytest.approx(1.0 / math.sqrt(2.0))
    assert th.predicted_variance(adapt_lim, plim) == pytest.approx(1.0 / math.sqrt(8.0))
    assert th.predicted_variance(het_lim, plim) == pytest.approx(math.sqrt(3.0 / 8.0))
    assert th.predicted_variance(th.SchemeConfig("adaptive", "arbitrary"), plim) == 0.0
    assert th.predicted_variance(th.SchemeConfig("heterodyne", "arbitrary"), plim) == 0.5
    # ratio identity: adaptive squeezed over coherent heterodyne = e^{-r}/sqrt(2)
    for r in (0.2, 0.8, 1.7):
        pr = th.BeamParams(n_flux=1e4, gamma=10.0, r=r)
        ratio = th.predicted_variance(adapt_lim, pr) / th.predicted_variance(het_coh, p0)
        assert ratio == pytest.approx(math.exp(-r) / math.sqrt(2.0), abs=1e-12)


def test_heterodyne_variance_product():
    # steady conditional variances sqrt(eps^2+1) -+ eps multiply to exactly 1
    for r in (0.0, 0.5, 1.0, 2.0, 3.0):
        eps = th.epsilon_from_r(r)
        sx2 = math.sqrt(eps**2 + 1.0) - eps
        sy2 = math.sqrt(eps**2 + 1.0) + eps
        assert sx2 * sy2 == pytest.approx(1.0, abs=1e-12)


def test_gamma_bounds():
    gb = th.gamma_bounds(1e6, 1.0, LN2_HALF)
    assert gb.lower == pytest.approx(2e3)
    assert gb.upper == pytest.approx(16e6)
    assert not gb.crossed
    assert th.gamma_bounds(100.0, 1.0, 0.0).upper == math.inf
    # crossing point scales as e^{8r}
    xstar = lambda r: math.exp(4.0 * r) * math.sinh(r) ** 4 / 4.0
    for r in (2.0, 3.0):
        assert th.gamma_bounds(0.99 * xstar(r), 1.0, r).crossed
        assert not th.gamma_bounds(1.01 * xstar(r), 1.0, r).crossed
    assert xstar(3.0) / xstar(2.0) == pytest.approx(math.exp(8.0), rel=0.15)


def test_scaling_predictions():
    sp1 = th.scaling_predictions(1.0)
    assert (sp1.sigma2, sp1.e_r, sp1.gamma_over_kappa, sp1.chi_over_kappa, sp1.delta) == (1.0,) * 5
    sp = th.scaling_predictions(1e8)
    assert sp.e_r == pytest.approx(10.0)
    assert sp.gamma_over_kappa == pytest.approx(1e6)
    assert sp.chi_over_kappa == pytest.approx(1e5)
    assert sp.sigma2 == pytest.approx(1e-5)
    # exponent table
    lo, hi = th.scaling_predictions(1e2), th.scaling_predictions(1e4)
    step = math.log(1e4 / 1e2)
    assert math.log(hi.sigma2 / lo.sigma2) / step == pytest.approx(-0.625)
    assert math.log(hi.e_r / lo.e_r) / step == pytest.approx(0.125)
    assert math.log(hi.gamma_over_kappa / lo.gamma_over_kappa) / step == pytest.approx(0.75)
    assert math.log(hi.chi_over_kappa / lo.chi_over_kappa) / step == pytest.approx(0.625)
    assert math.log(hi.delta / lo.delta) / step == pytest.approx(0.25)


def test_squeezing_timescale():
    assert th.squeezing_timescale(0.0, 4.0) == pytest.approx(0.5)
    assert th.squeezing_timescale(LN2_HALF, 1.0) == pytest.approx(math.sqrt(2.0) + 1.0, abs=1e-12)
    for r in (0.3, 1.0, 2.0):
        gamma = 3.7
        st = th.steady_state_g_matrix(r, 0.0)
        assert th.squeezing_timescale(r, gamma) == pytest.approx(
            1.0 / (gamma * st.lam.real), abs=1e-12
        )


def test_current_covariance():
    p0 = th.BeamParams.coherent(25.0)
    for tau in (0.0, 0.5, 3.0):
        cc = th.analytic_current_covariance(p0, 0.6, 0.1, tau)
        assert cc.value == pytest.approx(0.25 * p0.e_amp**2)  # (S-s)^2 E^2 only
        assert cc.shot_noise_at_zero_lag
    p = th.BeamParams.from_amplitude(2.0, 1.0, 1.0)
    eps = p.epsilon
    cc0 = th.analytic_current_covariance(p, 0.0, 0.0, 0.0)
    assert cc0.value == pytest.approx(-eps / (1.0 + eps))
    assert cc0.value < 0.0  # squeezing below shot noise
    with pytest.raises(ValueError):
        th.analytic_current_covariance(p, 1.5, 0.0, 0.0)
