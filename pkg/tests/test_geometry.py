import math

import numpy as np
import pytest

from bubblelab.geometry import (
    BoundaryPointData, InteriorPointData, fermi_jet, boundary_area_element,
    renormalized_mass, theta_coefficient, geometry_catalog,
)


def rng_data(n, seed=7):
    rng = np.random.default_rng(seed)
    m = n - 1
    A = rng.normal(size=(m, m))
    II = 0.5 * (A + A.T)
    gII = rng.normal(size=(m, m, m))
    gII = 0.5 * (gII + np.transpose(gII, (0, 2, 1)))
    return BoundaryPointData(n=n, II=II, ric_nn=0.37, scal_bdy=1.4,
                             gradT_II=gII, gradT_H=rng.normal(size=m))


class TestBoundaryPointData:
    def test_symmetry_enforced(self):
        with pytest.raises(ValueError, match="symmetric"):
            BoundaryPointData(n=4, II=np.array([[0.0, 1.0, 0], [0, 0, 0], [0, 0, 0]]))

    def test_trace_and_ring(self):
        d = rng_data(5)
        assert d.H == pytest.approx(np.trace(d.II), abs=1e-12)
        assert d.II_ring_sq == pytest.approx(d.II_sq - d.H ** 2 / d.m, abs=1e-12)
        assert d.II_ring_sq >= 0

    def test_n2_scalar_geodesic_curvature(self):
        d = BoundaryPointData(n=2, II=np.array([[1.3]]))
        assert d.H == pytest.approx(1.3)
        assert d.II_ring_sq == 0.0  # enforced identically in n = 2

    def test_gauss_ambient_scalar(self):
        ball = geometry_catalog("euclidean-ball", 5).data
        assert ball.scal_ambient == pytest.approx(0.0, abs=1e-12)
        probe = geometry_catalog("ricci-only", 5).data
        assert probe.scal_ambient == 0.0  # channel probes dial it off
        free = BoundaryPointData(n=5, ric_nn=1.0)
        assert free.scal_ambient == pytest.approx(2.0)

    def test_riemann_consistency_check(self):
        d = rng_data(6)
        d.validate()
        d.scal_bdy = d.scal_bdy + 1.0   # now inconsistent with riemann_bdy
        with pytest.raises(ValueError, match="Riemann"):
            d.validate()


class TestFermiJet:
    def test_flat_jet_is_identity(self):
        jet = fermi_jet(BoundaryPointData(n=5), order=2)
        y = np.array([0.2, -0.1, 0.05, 0.3])
        assert np.allclose(jet.g_lower(y[:4], 0.23), np.eye(4))
        assert jet.sqrt_det(y[:4], 0.23) == 1.0

    def test_first_order_consistency(self):
        d = rng_data(5)
        jet = fermi_jet(d, order=2)
        h = 1e-7
        m = d.m
        z = np.zeros(m)
        dg = (jet.g_lower(z, h) - jet.g_lower(z, -h)) / (2 * h)
        assert np.allclose(dg, -2.0 * d.II, atol=1e-6)
        ds = (jet.sqrt_det(z, h) - jet.sqrt_det(z, -h)) / (2 * h)
        assert ds == pytest.approx(-d.H, abs=1e-6)
        assert np.allclose(jet.g_lower(z, 0.0), np.eye(m))
        assert jet.sqrt_det(z, 0.0) == 1.0

    def test_ball_volume_jet_matches_power_expansion(self):
        # sqrt|g| along the normal must Taylor-match (1-t)^(n-1) through t^2
        for n in (3, 5, 7):
            ball = geometry_catalog("euclidean-ball", n).data
            jet = fermi_jet(ball, order=2)
            m = n - 1
            coeff = jet.kappa_vol
            assert coeff == pytest.approx(m * (m - 1) / 2.0, abs=1e-12)
            t = 0.05
            exact = (1 - t) ** m
            cubic = math.comb(m, 3) if m >= 3 else 0
            assert jet.sqrt_det(np.zeros(m), t) == pytest.approx(
                exact, abs=(cubic + 1) * t ** 3)

    def test_inverse_jet_residual_cubic(self):
        # g^ab g_bc - delta must vanish through total degree 2
        d = rng_data(6, seed=3)
        jet = fermi_jet(d, order=2)
        rng = np.random.default_rng(0)
        yp0 = rng.normal(size=d.m)
        res = []
        for s in (1e-1, 5e-2, 2.5e-2):
            prod = jet.g_upper(s * yp0, s * 0.7) @ jet.g_lower(s * yp0, s * 0.7)
            res.append(np.max(np.abs(prod - np.eye(d.m))))
        # second-order cancellation is exact: residual scales like s^3
        slope = np.polyfit(np.log([1e-1, 5e-2, 2.5e-2]), np.log(res), 1)[0]
        assert slope > 2.9

    def test_order_flag(self):
        d = rng_data(5)
        with pytest.raises(ValueError):
            fermi_jet(d, order=3)
        j1 = fermi_jet(d, order=1)
        assert np.all(j1.A_up == 0.0)
        assert j1.kappa_vol == 0.0


class TestBoundaryAreaElement:
    def test_flat(self):
        d = BoundaryPointData(n=4)
        assert boundary_area_element(d, [0.3, -0.2, 0.1]) == 1.0

    def test_isotropic_ric(self):
        # Ricbar = c Id at |y'|^2 = s gives 1 - c s / 6
        n, c = 6, 0.9
        m = n - 1
        scal = c * m  # constant-curvature closure with Ricbar = c Id
        d = BoundaryPointData(n=n, scal_bdy=scal)
        yp = np.zeros(m); yp[0] = 0.5; yp[1] = 0.3
        s = float(yp @ yp)
        assert boundary_area_element(d, yp) == pytest.approx(1.0 - c * s / 6.0, rel=1e-12)

    def test_ball_n3_against_exact_sphere(self):
        geo = geometry_catalog("euclidean-ball", 3)
        jet = fermi_jet(geo.data, order=2)
        r = 0.1
        exact = geo.exact_boundary_density(r)
        approx = jet.boundary_density(np.array([r, 0.0]))
        assert abs(approx - exact) < 1e-3


class TestCurvatureCombinations:
    def test_renormalized_mass_zero_data(self, constants, channel_fit_n5):
        import copy
        C = copy.copy(constants[5])
        C.kappa1, C.kappa2 = channel_fit_n5.kappa1, channel_fit_n5.kappa2
        val, parts = renormalized_mass(BoundaryPointData(n=5), C)
        assert val == 0.0

    def test_ring_channel_sign(self, constants, channel_fit_n5):
        import copy
        C = copy.copy(constants[5])
        C.kappa1, C.kappa2 = channel_fit_n5.kappa1, channel_fit_n5.kappa2
        data = geometry_catalog("anisotropic-cylinder-like", 5, scale=1.0).data
        val, parts = renormalized_mass(data, C)
        assert parts["II_ring"] == pytest.approx(C.kappa3 * 2.0, rel=1e-12)
        assert parts["II_ring"] < 0

    def test_h_independence(self, constants, channel_fit_n5):
        # perturbing H at fixed (II_ring, ric, scal) leaves the mass unchanged
        import copy
        C = copy.copy(constants[5])
        C.kappa1, C.kappa2 = channel_fit_n5.kappa1, channel_fit_n5.kappa2
        m = 4
        base = np.diag([1.0, -1.0, 0.0, 0.0])
        d1 = BoundaryPointData(n=5, II=base, ric_nn=0.3, scal_bdy=0.7)
        d2 = BoundaryPointData(n=5, II=base + 0.9 * np.eye(m) / m * m / m,
                               ric_nn=0.3, scal_bdy=0.7)
        # adding a pure-trace part changes H but not II_ring
        d2 = BoundaryPointData(n=5, II=base + (0.9 / m) * np.eye(m),
                               ric_nn=0.3, scal_bdy=0.7)
        assert d1.II_ring_sq == pytest.approx(d2.II_ring_sq, abs=1e-12)
        v1, _ = renormalized_mass(d1, C)
        v2, _ = renormalized_mass(d2, C)
        assert v1 == pytest.approx(v2, abs=1e-12)

    def test_mass_requires_constants(self, constants):
        import copy
        C = copy.copy(constants[6])
        C.kappa1 = C.kappa2 = None
        with pytest.raises(ValueError, match="unfit"):
            renormalized_mass(BoundaryPointData(n=6), C)

    def test_theta_channels(self, constants):
        import copy
        C = copy.copy(constants[6])
        with pytest.raises(ValueError, match="unconfigured"):
            theta_coefficient(BoundaryPointData(n=6), C)
        C.alpha_channels = (2.0, 3.0, 5.0, 7.0)
        zero, _ = theta_coefficient(BoundaryPointData(n=6), C)
        assert zero == 0.0
        umb = BoundaryPointData(n=6, II=np.eye(5), dnu_ric_nn=1.1, dnu_scal_bdy=-0.4)
        val, parts = theta_coefficient(umb, C)
        assert parts["dnu_IIring_IIring"] == 0.0
        assert parts["lap_H"] == 0.0
        assert val == pytest.approx(2.0 * 1.1 + 3.0 * (-0.4), rel=1e-12)
        only2 = BoundaryPointData(n=6, dnu_scal_bdy=1.0)
        val2, _ = theta_coefficient(only2, C)
        assert val2 == pytest.approx(3.0, rel=1e-12)

    def test_theta_warns_below_n6(self, constants):
        import copy
        C = copy.copy(constants[5])
        C.alpha_channels = (1.0, 1.0, 1.0, 1.0)
        with pytest.warns(UserWarning, match="n >= 6"):
            theta_coefficient(BoundaryPointData(n=5), C)


class TestCatalog:
    def test_ball_invariants(self):
        for n in (2, 3, 5):
            geo = geometry_catalog("euclidean-ball", n)
            assert geo.data.H == pytest.approx(n - 1)
            assert geo.data.II_ring_sq == pytest.approx(0.0, abs=1e-14)
            assert np.allclose(geo.data.II, np.eye(n - 1))
            assert np.allclose(geo.exact_fermi_gab(0.25), (0.75) ** 2 * np.eye(n - 1))

    def test_channel_probes(self):
        aniso = geometry_catalog("anisotropic-cylinder-like", 6)
        assert aniso.data.H == 0.0
        assert aniso.data.II_ring_sq == pytest.approx(2.0)
        ric = geometry_catalog("ricci-only", 6)
        assert ric.data.ric_nn == 1.0 and ric.data.H == 0.0
        scal = geometry_catalog("boundary-scal-only", 6)
        assert scal.data.scal_bdy == 1.0 and scal.data.II_sq == 0.0

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            geometry_catalog("mystery", 5)

    def test_interior_point(self):
        d = InteriorPointData(n=3, scal=6.0)
        assert d.ric_trace == pytest.approx(6.0)


class TestJetDeterminism:
    def test_bit_reproducible(self):
        d1 = rng_data(6, seed=11)
        d2 = rng_data(6, seed=11)
        j1, j2 = fermi_jet(d1, order=2), fermi_jet(d2, order=2)
        y = np.array([0.13, -0.25, 0.4, 0.02, -0.17])
        assert np.array_equal(j1.g_upper(y, 0.21), j2.g_upper(y, 0.21))
        assert j1.sqrt_det(y, 0.21) == j2.sqrt_det(y, 0.21)
