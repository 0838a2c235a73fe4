import math

import numpy as np
import pytest

from wavebranch import stream as st
from wavebranch.errors import (
    BelowCriticalError,
    NoRootError,
    SingularIntegrandError,
)
from wavebranch.vorticity import VorticitySpec


def irrot_R(theta):
    return theta**2 / 2 + 1 / theta


def irrot_S(theta):
    return theta + 1 / (2 * theta**2)


class TestIrrotationalClosedForms:
    def test_stream_at_theta1(self, irrot):
        s = st.stream_at(irrot, 1.0)
        assert s.depth == pytest.approx(1.0, abs=1e-12)
        assert s.R == pytest.approx(1.5, abs=1e-12)
        assert s.froude == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(s.profile, s.p, atol=1e-12)

    def test_stream_at_theta2(self, irrot):
        s = st.stream_at(irrot, 2.0)
        assert s.depth == pytest.approx(0.5, abs=1e-12)
        assert s.R == pytest.approx(2.5, abs=1e-12)
        assert s.froude == pytest.approx(2.0**1.5, abs=1e-10)
        assert s.flow_force == pytest.approx(irrot_S(2.0), abs=1e-10)

    def test_full_family_closed_forms(self, irrot):
        for theta in (1.1, 1.5, 2.7):
            assert st.depth(irrot, theta) == pytest.approx(1 / theta, abs=1e-10)
            assert st.R_of_theta(irrot, theta) == pytest.approx(irrot_R(theta), abs=1e-10)
            assert st.froude_of_theta(irrot, theta) == pytest.approx(theta**1.5, abs=1e-10)
            assert st.flow_force_of_theta(irrot, theta) == pytest.approx(
                irrot_S(theta), abs=1e-10
            )


def test_constant_vorticity_closed_forms(const_one):
    # H(p) = theta - sqrt(theta^2 - 2p) for omega = 1
    theta = 2.0
    s = st.stream_at(const_one, theta)
    assert s.depth == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-12)
    H_exact = theta - np.sqrt(theta**2 - 2.0 * s.p)
    assert np.abs(s.profile - H_exact).max() < 1e-11


class TestDispersion:
    def test_irrotational_critical(self, irrot):
        ds = st.dispersion_summary(irrot)
        assert ds.theta_c == pytest.approx(1.0, abs=1e-10)
        assert ds.R_c == pytest.approx(1.5, abs=1e-10)
        assert math.isinf(ds.R_0)

    def test_constant_vorticity_critical_vs_scan_oracle(self, const_one):
        # closed form for omega = 1: R(theta) = theta^2/2 + theta - sqrt(theta^2-2) - 1
        ds = st.dispersion_summary(const_one)
        thetas = np.linspace(math.sqrt(2.0) + 1e-9, 5.0, 10**6)
        Rvals = thetas**2 / 2 + thetas - np.sqrt(thetas**2 - 2.0) - 1.0
        k = int(np.argmin(Rvals))
        assert abs(ds.theta_c - thetas[k]) < 2 * (thetas[1] - thetas[0])
        assert ds.R_c == pytest.approx(Rvals[k], abs=1e-9)

    def test_constant_vorticity_R0_closed_form(self, const_one):
        ds = st.dispersion_summary(const_one)
        assert ds.R_0 == pytest.approx(math.sqrt(2.0), abs=1e-9)

    def test_interior_max_vorticity_R0_infinite(self):
        # omega = 1 - 2p: Omega peaks in the interior, depth integral diverges
        spec = VorticitySpec([1.0, -2.0])
        ds = st.dispersion_summary(spec)
        assert math.isinf(ds.R_0)


class TestRootsOfR:
    def test_supercritical_root_oracle(self, irrot):
        # theta^3 - 4 theta + 2 = 0, root above 1 (bisection oracle)
        roots = np.roots([1.0, 0.0, -4.0, 2.0])
        sup = max(r.real for r in roots if abs(r.imag) < 1e-12)
        theta = st.solve_theta_for_R(irrot, 2.0, "supercritical")
        assert theta == pytest.approx(sup, abs=1e-10)
        assert theta == pytest.approx(1.6752, abs=1e-4)
        assert 1 / theta == pytest.approx(0.5969, abs=1e-4)

    def test_subcritical_root_oracle(self, irrot):
        roots = sorted(
            r.real for r in np.roots([1.0, 0.0, -4.0, 2.0]) if abs(r.imag) < 1e-12 and r.real > 0
        )
        theta = st.solve_theta_for_R(irrot, 2.0, "subcritical")
        assert theta == pytest.approx(roots[0], abs=1e-10)
        assert 1 / theta == pytest.approx(1.8546, abs=1e-4)

    def test_critical_degeneracy(self, irrot):
        assert st.solve_theta_for_R(irrot, 1.5, "supercritical") == pytest.approx(1.0, abs=1e-9)
        assert st.solve_theta_for_R(irrot, 1.5, "subcritical") == pytest.approx(1.0, abs=1e-9)

    def test_below_critical_error(self, irrot):
        with pytest.raises(BelowCriticalError):
            st.solve_theta_for_R(irrot, 1.4, "supercritical")

    def test_subcritical_above_R0_error(self, const_one):
        # R_0 = sqrt(2) for omega = 1
        with pytest.raises(NoRootError):
            st.solve_theta_for_R(const_one, 1.45, "subcritical")

    def test_singular_below_theta0(self, const_one):
        with pytest.raises(SingularIntegrandError):
            st.depth(const_one, 1.0)  # theta0 = sqrt(2)


class TestFlowForce:
    def test_supercritical_flow_force(self, irrot):
        theta = st.solve_theta_for_R(irrot, 2.0, "supercritical")
        S = st.flow_force_of_R(irrot, 2.0, "supercritical")
        assert S == pytest.approx(irrot_S(theta), abs=1e-10)
        assert S == pytest.approx(1.8533, abs=1e-4)

    def test_critical_flow_force(self, irrot):
        assert st.flow_force_of_R(irrot, 1.5, "supercritical") == pytest.approx(1.5, abs=1e-8)

    def test_flow_force_ordering(self, irrot):
        assert st.flow_force_of_R(irrot, 2.0, "supercritical") < st.flow_force_of_R(
            irrot, 2.0, "subcritical"
        )


class TestFlowForceIdentity:
    def test_irrotational_theta2(self, irrot):
        # both sides equal 1 - 1/theta^3 = 7/8
        assert st.check_flow_force_identity(irrot, 2.0, 1e-4) < 1e-7
        dS = (st.flow_force_of_theta(irrot, 2.0 + 1e-4) - st.flow_force_of_theta(irrot, 2.0 - 1e-4)) / 2e-4
        assert dS == pytest.approx(7.0 / 8.0, abs=1e-7)

    def test_critical_point(self, irrot):
        # R'(theta_c) = 0 and dS/dtheta = 0 there
        assert st.check_flow_force_identity(irrot, 1.0, 1e-4) < 1e-7

    def test_constant_vorticity(self, const_one):
        assert st.check_flow_force_identity(const_one, 2.0, 1e-4) < 1e-6


class TestMonotonicity:
    def test_R_and_F_increasing_above_critical(self, irrot, const_one):
        for spec in (irrot, const_one):
            ds = st.dispersion_summary(spec)
            thetas = ds.theta_c + np.linspace(0.02, 2.0, 12)
            Rv = [st.R_of_theta(spec, t) for t in thetas]
            Fv = [st.froude_of_theta(spec, t) for t in thetas]
            assert np.all(np.diff(Rv) > 0)
            assert np.all(np.diff(Fv) > 0)

    def test_supercritical_flow_force_increasing(self, irrot, const_one):
        for spec in (irrot, const_one):
            ds = st.dispersion_summary(spec)
            Rgrid = np.linspace(ds.R_c + 0.01, ds.R_c + 1.0, 20)
            Sv = [st.flow_force_of_R(spec, R, "supercritical", summary=ds) for R in Rgrid]
            assert np.all(np.diff(Sv) > 0)

    def test_depth_decreasing_sampled(self, const_one):
        ds = st.dispersion_summary(const_one)
        thetas = ds.theta_0 + np.linspace(0.05, 2.0, 10)
        dv = [st.depth(const_one, t) for t in thetas]
        assert np.all(np.diff(dv) < 0)


class TestProfileConsistency:
    def test_Hp_matches_profile_derivative(self, const_one):
        theta = 1.9
        errs = []
        for n in (65, 129):
            p = np.linspace(0.0, 1.0, n)
            H = st.stream_profile(const_one, theta, p)
            dp = p[1] - p[0]
            fd = (H[2:] - H[:-2]) / (2 * dp)
            exact = 1.0 / np.sqrt(theta**2 - 2.0 * p[1:-1])
            errs.append(np.abs(fd - exact).max())
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)

    def test_stream_identity(self, const_one):
        # (1/(2 H_p^2))' + omega(p) = 0, with H_p = (theta^2 - 2 Omega)^(-1/2)
        theta = 1.9
        p = np.linspace(0.0, 1.0, 201)
        Hp = 1.0 / np.sqrt(theta**2 - 2.0 * p)
        val = 1.0 / (2.0 * Hp**2)
        dp = p[1] - p[0]
        dval = (val[2:] - val[:-2]) / (2 * dp)
        assert np.abs(dval + 1.0).max() < 1e-10  # omega = 1

    def test_surface_bernoulli_normalization(self, const_one):
        for theta in (1.8, 2.5):
            s = st.stream_at(const_one, theta)
            hp1 = 1.0 / math.sqrt(theta**2 - 2.0)
            assert 1.0 / (2.0 * hp1**2) + s.depth == pytest.approx(s.R, abs=1e-10)
