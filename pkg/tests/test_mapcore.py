"""Map family: closed formulas, derivatives, lattice geometry, distances."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinlogmap import mapcore
from sinlogmap.mapcore import (
    IndexOutOfRangeError,
    SingularInputError,
    critical_point,
    critical_value,
    eval_derivative,
    eval_fhat,
    eval_map,
    eval_second_derivative,
    make_params,
    nearest_critical_point,
    reference_params,
    truncated_distance,
)
from sinlogmap.sampling import sample_circle, sample_interval

# Frozen oracle values (mpmath, 40 digits; recomputed below where cheap).
X1_HANDCHECK = 0.014282198585040214       # exp(-(arctan 2 + pi))
XHAT_HANDCHECK = 0.33049996757673058      # exp(-arctan 2)
FXHAT_HANDCHECK = 0.51419838006491664     # xhat^(1/2) * 2/sqrt(5)


@pytest.fixture(scope="module")
def suite_a():
    return reference_params("beta1")


@pytest.fixture(scope="module")
def suite_b():
    return reference_params("beta3")


@pytest.fixture(scope="module")
def handcheck():
    # the hand-checkable k0=1 set; needs tau large enough for the yhat window
    return make_params(a=1.0, alpha=0.5, beta=1.0, k0=1, tau=0.22, rho=0.01,
                       sigma=2.0, sigma_tilde=4.2)


def brute_force_nearest(params, z):
    pts = [0.0]
    for k in range(params.k0, params.k_max + 1):
        x = params.xhat * math.exp(-k * math.pi / params.beta)
        pts.extend([x, -x])
    ds = [mapcore.circle_distance(z, c) for c in pts]
    i = int(np.argmin(ds))
    return ds[i]


class TestCriticalLattice:
    def test_handcheck_x1(self, handcheck):
        assert critical_point(handcheck, 1).position == pytest.approx(X1_HANDCHECK, rel=1e-14)
        # independent recomputation of the frozen literal
        assert X1_HANDCHECK == pytest.approx(math.exp(-(math.atan(2.0) + math.pi)), rel=1e-15)

    def test_odd_symmetry_of_lattice(self, suite_a):
        for k in range(suite_a.k0, suite_a.k0 + 15):
            assert critical_point(suite_a, -k).position == -critical_point(suite_a, k).position

    def test_lattice_ratio(self, suite_b):
        q = math.exp(-math.pi / suite_b.beta)
        for k in range(suite_b.k0, suite_b.k0 + 20):
            r = critical_point(suite_b, k + 1).position / critical_point(suite_b, k).position
            assert r == pytest.approx(q, rel=1e-13)

    def test_index_range_errors(self, suite_a):
        with pytest.raises(IndexOutOfRangeError):
            critical_point(suite_a, suite_a.k0 - 1)
        with pytest.raises(IndexOutOfRangeError):
            critical_point(suite_a, suite_a.k_max + 1)

    @pytest.mark.parametrize("suite", ["beta1", "beta3"])
    def test_derivative_vanishes_and_kind_alternates(self, suite):
        p = reference_params(suite)
        kinds = []
        for k in range(p.k0, p.k0 + 21):
            cp = critical_point(p, k)
            assert abs(eval_derivative(p, cp.position)) < 1e-10
            kinds.append(cp.kind)
        assert kinds[0] == "minimum"  # x_{k0} is a local minimum
        assert all(a != b for a, b in zip(kinds, kinds[1:]))

    def test_midpoint_identity(self, suite_a):
        # x_k is the midpoint of (y_{k+1}, y_k)
        ybase = 2.0 * suite_a.xhat / (1.0 + suite_a.lattice_q)
        for k in range(suite_a.k0, suite_a.k0 + 20):
            yk = ybase * math.exp(-k * math.pi / suite_a.beta)
            yk1 = ybase * math.exp(-(k + 1) * math.pi / suite_a.beta)
            xk = critical_point(suite_a, k).position
            assert 0.5 * (yk + yk1) == pytest.approx(xk, rel=1e-14)


class TestEvalMap:
    def test_fhat_at_xhat(self, handcheck):
        got = eval_fhat(handcheck, handcheck.xhat)
        assert got == pytest.approx(FXHAT_HANDCHECK, rel=1e-14)
        assert FXHAT_HANDCHECK == pytest.approx(
            math.sqrt(XHAT_HANDCHECK) * 2.0 / math.sqrt(5.0), rel=1e-15)

    def test_singular_input(self, suite_a):
        with pytest.raises(SingularInputError):
            eval_map(suite_a, 0.0)
        with pytest.raises(SingularInputError):
            eval_derivative(suite_a, 0.0)

    def test_odd_symmetry_inside_core(self, suite_a):
        zs = sample_interval(200, 1e-9, suite_a.yhat, seed=11)
        for z in zs:
            assert eval_map(suite_a, -z) == pytest.approx(-eval_map(suite_a, z), abs=1e-12)

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(st.floats(min_value=-0.999, max_value=0.999).filter(lambda z: abs(z) > 1e-12))
    def test_family_is_odd_everywhere(self, z):
        # odd as a circle map: f(-z) and -f(z) may differ by the +-1 seam
        p = reference_params("beta1", mu=3e-5)
        d = mapcore.circle_distance(eval_map(p, -z), -eval_map(p, z))
        assert d == pytest.approx(0.0, abs=1e-12)

    def test_mu_is_rigid_shift_inside_eps(self, suite_a):
        mu = 3.0e-5
        pm = suite_a.with_mu(mu)
        for z in sample_interval(100, 1e-8, suite_a.yhat, seed=3):
            # exact up to the single rounding of the sum f(z) + mu
            assert eval_map(pm, z) - eval_map(suite_a, z) == pytest.approx(mu, abs=5e-16)
            assert eval_map(pm, -z) - eval_map(suite_a, -z) == pytest.approx(-mu, abs=5e-16)

    def test_outer_derivative_at_least_two(self, suite_a):
        pm = suite_a.with_mu(suite_a.eps)  # worst-case ramp slope
        zs = sample_interval(500, suite_a.eps, 1.0, seed=5)
        d = eval_derivative(pm, zs)
        assert np.all(np.abs(d) >= 2.0)

    def test_continuity_across_joints(self, suite_a):
        # value and first derivative glue at yhat, ytilde and at +-eps (ramp)
        for z0 in (suite_a.yhat, suite_a.ytilde, suite_a.eps):
            h = 1e-13 * z0
            lo, hi = eval_map(suite_a, z0 - h), eval_map(suite_a, z0 + h)
            assert hi - lo == pytest.approx(0.0, abs=1e-11)

    def test_near_zero_floor_returns_mu(self):
        p = reference_params("beta1", mu=4e-5)
        assert eval_map(p, 1e-305) == pytest.approx(4e-5, abs=1e-18)
        assert eval_map(p, -1e-305) == pytest.approx(-4e-5, abs=1e-18)


class TestDerivatives:
    @pytest.mark.parametrize("suite", ["beta1", "beta3"])
    def test_inflection_lattice(self, suite):
        # zhat e^{-m pi/beta} are the zeros of f'' (alpha=1/2 gives zhat=1)
        p = reference_params(suite)
        assert p.zhat == pytest.approx(1.0, rel=1e-14)
        checked = 0
        for m in range(4, 40):
            z = mapcore.inflection_point(p, m)
            if z < p.yhat:
                assert abs(eval_second_derivative(p, z)) < 1e-8
                checked += 1
        assert checked >= 7

    @pytest.mark.parametrize("suite", ["beta1", "beta3"])
    def test_fd_oracle(self, suite):
        p = reference_params(suite, mu=0.0)
        zs = sample_interval(400, critical_point(p, p.k0 + 5).position, p.yhat, seed=17)
        bad = 0
        for z in zs:
            h = 1e-7 * z
            fd1 = (eval_map(p, z + h) - eval_map(p, z - h)) / (2 * h)
            d1 = eval_derivative(p, z)
            if abs(d1) > 1e-9:
                bad += abs(fd1 - d1) / abs(d1) > 1e-6
        assert bad == 0


class TestLemmaConstants:
    def test_first_derivative_bracket_scale_invariant(self, suite_a):
        consts = []
        for l in range(suite_a.k0 + 1, suite_a.k0 + 11):
            lo, hi = mapcore.first_derivative_bracket(suite_a, l)
            assert lo > 0
            consts.append(max(hi, 1.0 / lo))
        consts = np.array(consts)
        assert consts.std() / consts.mean() < 0.05
        print(f"\n measured C (first-derivative bound): {consts.mean():.6g}")

    def test_derivative_ratio_constant_scale_invariant(self, suite_a):
        ks = [mapcore.derivative_ratio_constant(suite_a, l)
              for l in range(suite_a.k0 + 1, suite_a.k0 + 9)]
        ks = np.array(ks)
        assert (ks.max() - ks.min()) / ks.mean() < 0.05
        print(f"\n measured K1 (derivative ratio): {ks.mean():.6g}")

    def test_second_derivative_ratio_bounds(self, suite_a):
        uppers, lowers = [], []
        for k in range(suite_a.k0 + 1, suite_a.k0 + 11):
            hi, lo_near = mapcore.second_derivative_ratio_bounds(suite_a, k)
            uppers.append(hi)
            lowers.append(lo_near)
        uppers, lowers = np.array(uppers), np.array(lowers)
        assert (uppers.max() - uppers.min()) / uppers.mean() < 0.05
        assert np.all(lowers > 0.1)  # bounded below on |t-x_k| < tau|x_k|
        print(f"\n measured C2 (second-derivative ratio): {uppers.mean():.6g}")


class TestNearestAndDistance:
    def test_midgap_tiebreak(self, suite_a):
        k = suite_a.k0 + 2
        xk = critical_point(suite_a, k).position
        xk1 = critical_point(suite_a, k + 1).position
        mid = 0.5 * (xk + xk1)
        assert nearest_critical_point(suite_a, mid + 1e-15)[0] == k
        assert nearest_critical_point(suite_a, mid)[0] == k  # tie toward smaller |k|

    def test_far_point_brute_force(self, suite_a):
        k, d = nearest_critical_point(suite_a, 0.9)
        assert abs(k) == suite_a.k0
        assert d == pytest.approx(brute_force_nearest(suite_a, 0.9), abs=1e-15)

    def test_deep_point_is_origin(self, suite_a):
        z = critical_point(suite_a, suite_a.k_max).position * math.exp(
            -math.pi / (2 * suite_a.beta))
        k, d = nearest_critical_point(suite_a, z * 0.9)
        assert k == 0
        assert d == pytest.approx(abs(z * 0.9), rel=1e-15)

    @settings(max_examples=200, deadline=None, derandomize=True)
    @given(st.floats(min_value=-1.0, max_value=0.9999999))
    def test_nearest_matches_brute_force(self, z):
        p = reference_params("beta1")
        _, d = nearest_critical_point(p, z)
        assert d == pytest.approx(brute_force_nearest(p, z), abs=1e-15)

    def test_mu_does_not_move_critical_set(self, suite_a):
        pm = suite_a.with_mu(2e-5)
        for z in sample_circle(200, seed=23):
            assert nearest_critical_point(suite_a, z) == nearest_critical_point(pm, z)

    def test_truncated_distance(self, suite_a):
        # the gap above x_{k0} exceeds flat, so x_{k0} stays the nearest point
        xk = critical_point(suite_a, suite_a.k0).position
        assert truncated_distance(suite_a, 0.7) == 1.0
        assert truncated_distance(suite_a, xk + suite_a.flat / 2) == pytest.approx(
            suite_a.flat / 2, rel=1e-12)
        for z in sample_circle(300, seed=29):
            d = brute_force_nearest(suite_a, z)
            want = d if d <= suite_a.flat else 1.0
            assert truncated_distance(suite_a, z) == pytest.approx(want, abs=1e-15)


class TestConfigRoundTrip:
    def test_round_trip(self, tmp_path, suite_b):
        path = tmp_path / "params.cfg"
        pm = suite_b.with_mu(2e-5)
        mapcore.save_config(pm, path)
        back = mapcore.load_config(path)
        for name in mapcore._CONFIG_FIELDS:
            assert getattr(back, name) == getattr(pm, name)

    def test_corrupt_config_rejected(self, tmp_path, suite_a):
        path = tmp_path / "params.cfg"
        mapcore.save_config(suite_a, path)
        text = path.read_text().replace(repr(suite_a.xhat), repr(suite_a.xhat * 1.01))
        path.write_text(text)
        with pytest.raises(mapcore.ParameterError):
            mapcore.load_config(path)


class TestParameterInvariants:
    def test_even_k0_rejected(self):
        with pytest.raises(mapcore.ParameterError):
            make_params(k0=4)

    def test_rho_tau_ordering(self):
        with pytest.raises(mapcore.ParameterError):
            make_params(rho=0.3, tau=0.2)

    def test_sigma_window(self):
        with pytest.raises(mapcore.ParameterError):
            make_params(sigma=2.2, sigma_tilde=4.2)  # sqrt(4.2) < 2.2

    def test_mu_domain(self):
        p = reference_params("beta1")
        with pytest.raises(mapcore.ParameterError):
            p.with_mu(p.eps * 2)
        with pytest.raises(mapcore.ParameterError):
            p.with_mu(p.eps ** 2 / 2)
