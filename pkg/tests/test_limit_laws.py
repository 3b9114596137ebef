import math

import numpy as np
import pytest

from redbranch.errors import DomainError, NoConvergenceError, RegimeError
from redbranch.gf_engine import DeficitEngine, build_deficits
from redbranch import _kernels
from redbranch.limit_laws import (
    ctmc_pgf,
    g_process_marginal,
    g_process_transition,
    g_process_two_time,
    kolmogorov_rhs,
    limit_reduced_transform,
    mrca_limit,
    phi,
    phi_tanh_form,
    psi,
    solve_b,
    w_first_branching_cdf,
    y_pgf_via_phi,
)
from redbranch.offspring_models import validate_params

P_IV = validate_params(0.5, 1.0, 0.3)
P_Q1N = validate_params(0.4, 1.0, 0.3)
P_Q2N = validate_params(0.9, 0.9, 0.4)
P_11 = validate_params(1.0, 1.0, 0.3)


class TestSolveB:
    def test_quadratic_roots(self):
        # alpha2 = 1: x**2 - x = target factorizes
        assert solve_b(1.0, 2.0 / 0.3, 0.3) == pytest.approx(2.0, abs=1e-12)
        assert solve_b(1.0, 6.0 / 0.3, 0.3) == pytest.approx(3.0, abs=1e-12)

    def test_residual(self):
        b = solve_b(0.5, 1.0 / (0.5 * 0.3), 0.3)  # target = 1
        assert abs(b**1.5 - b - 1.0) <= 1e-13

    def test_domain(self):
        with pytest.raises(DomainError):
            solve_b(1.0, -1.0, 0.3)


class TestPhi:
    def test_origin(self):
        assert phi(P_11, 0.0, 0.0) == 0.0

    def test_tanh_point(self):
        # a21*l1 = 1, l2 = 0 reduces the explicit form to tanh(1)
        assert phi(P_11, 1.0 / 0.3, 0.0) == pytest.approx(math.tanh(1.0), abs=1e-6)

    def test_tanh_grid(self):
        grid = np.linspace(0.4, 4.0, 10)
        for x in grid:
            for l2 in grid:
                l1 = x / P_11.a21
                assert phi(P_11, l1, l2) == pytest.approx(
                    phi_tanh_form(P_11.a21, l1, l2), abs=1e-6
                )

    @pytest.mark.parametrize("alpha2", [0.5, 0.75, 1.0])
    def test_boundary_identity(self, alpha2):
        # phi(0, l2) = l2*(1 + l2**a2)**(-1/a2)
        p = validate_params(0.9, alpha2, 0.2)
        for l2 in (0.3, 1.0, 3.0):
            assert phi(p, 0.0, l2) == pytest.approx(
                l2 * (1 + l2**alpha2) ** (-1 / alpha2), abs=1e-6
            )

    def test_growth_constant(self):
        # phi(x, 0)/x**(1/(1+a2)) -> (a2*a21)**(1/(1+a2))
        x = 1e4
        ratio = phi(P_Q2N, x, 0.0) / x ** (1 / 1.9)
        assert ratio == pytest.approx((0.9 * 0.4) ** (1 / 1.9), rel=0.02)

    def test_monotone_and_concave_along_rays(self):
        c_grid = np.linspace(0.2, 3.0, 8)
        for d1, d2 in ((1.0, 0.5), (0.3, 1.0)):
            vals = np.array([phi(P_Q2N, c * d1, c * d2) for c in c_grid])
            assert np.all(np.diff(vals) >= -1e-10)
            assert np.all(np.diff(vals, 2) <= 1e-8)

    def test_finite_n_consistency(self):
        # (1/Q2(n)) E[1 - exp(-l1 Q2(n)/n Z1 - l2 Q2(n) Z2)] -> phi(l1, l2)
        n = 1 << 20
        t = build_deficits(P_Q2N, n)
        for l1, l2 in ((1.0, 1.0), (2.0, 0.5), (0.5, 2.0)):
            q1 = np.array([-np.expm1(-l1 * t.q2[n] / n)])
            q2 = np.array([-np.expm1(-l2 * t.q2[n])])
            _kernels.iterate_pair(P_Q2N.alpha1, P_Q2N.alpha2, P_Q2N.a21, q1, q2, n)
            assert q2[0] / t.q2[n] == pytest.approx(phi(P_Q2N, l1, l2), rel=0.02)


class TestPsi:
    def test_origin_and_regime(self):
        assert psi(P_IV, 0.0, 0.0) == 0.0
        with pytest.raises(RegimeError):
            psi(P_Q1N, 1.0, 1.0)

    def test_initial_slopes(self):
        # the l1 slope carries a nonanalytic eps**alpha1 correction, so it
        # is measured at a smaller eps than the l2 slope
        eps = 1e-8
        assert psi(P_IV, eps, 0.0) / eps == pytest.approx(P_IV.a21, abs=1e-4)
        eps = 1e-6
        assert psi(P_IV, 0.0, eps) / eps == pytest.approx(1.0, abs=1e-4)

    def test_boundary_identity(self):
        # l1 = 0 reduces to a Bernoulli equation with the explicit solution
        # l2*(1 + (b*l2)**a2)**(-1/a2)
        b = P_IV.b
        for l2 in (0.5, 1.0, 2.0):
            exact = l2 * (1 + (b * l2) ** P_IV.alpha2) ** (-1 / P_IV.alpha2)
            assert psi(P_IV, 0.0, l2) == pytest.approx(exact, abs=1e-9)

    def test_pde_residual(self):
        # finite differences of the computed solution must satisfy the PDE
        a1, a2, a21 = P_IV.alpha1, P_IV.alpha2, P_IV.a21
        b, sigma = P_IV.b, P_IV.sigma
        h = 1e-5
        tol = 1e-10  # deep characteristics hit their rounding floor below this
        for l1, l2 in ((0.5, 0.5), (1.0, 2.0), (2.0, 1.0)):
            f = psi(P_IV, l1, l2, tol=tol)
            df1 = (psi(P_IV, l1 + h, l2, tol=tol) - psi(P_IV, l1 - h, l2, tol=tol)) / (2 * h)
            df2 = (psi(P_IV, l1, l2 + h, tol=tol) - psi(P_IV, l1, l2 - h, tol=tol)) / (2 * h)
            lhs = (1 + a2) * l1 * df1 + l2 * df2
            rhs = f - b**a2 * f ** (1 + a2) + a2 * a21 * l1 * (
                1 + (b * l1 / sigma) ** a1
            ) ** (-1 / a1)
            assert lhs == pytest.approx(rhs, abs=1e-4)

    def test_finite_n_consistency(self):
        # 1 - psi matches the late-phase transform at n = 2^20, h = n/64
        n = 1 << 20
        eng = DeficitEngine(P_IV, n)
        t = eng.tables
        h = n // 64
        m = n - h
        for l1, l2 in ((1.0, 1.0), (0.5, 2.0)):
            u1 = -np.expm1(-l1 * t.q21[n] / (n * t.q1[h]))
            u2 = -np.expm1(-l2 * t.q2[n] / t.q2[h])
            fin = eng.reduced_transform_deficit(m, n, u1, u2).value
            lim = 1.0 - psi(P_IV, l1, l2)
            assert fin == pytest.approx(lim, abs=0.01)

    def test_monotone(self):
        vals = [psi(P_IV, l1, 1.0) for l1 in (0.1, 0.5, 1.0, 2.0)]
        assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))


class TestLimitDispatch:
    def test_values_q1n(self):
        assert limit_reduced_transform(P_Q1N, "Q1N.0", s2=0.37).value == 0.37
        ev = limit_reduced_transform(P_Q1N, "Q1N.1", a=0.5, s2=0.5)
        assert ev.value == pytest.approx(1.0 / 3.0)
        assert ev.method == "CLOSED_FORM"
        # lambda2 -> infinity decreases to 0; lambda2 = 0 gives total mass
        vals = [
            limit_reduced_transform(P_Q1N, "Q1N.2", lambda2=l).value
            for l in (0.0, 0.5, 2.0, 50.0)
        ]
        assert vals[0] == 1.0
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_values_q2n(self):
        p = validate_params(0.75, 1.0, 0.3)  # alpha2 = 1 in the Q2N regime
        assert limit_reduced_transform(p, "Q2N.2", s1=0.75).value == pytest.approx(0.5)
        ev = limit_reduced_transform(P_Q2N, "Q2N.1", t=1.0, s1=0.5, s2=0.5)
        assert ev.method == "ODE"
        assert 0.0 <= ev.value <= 1.0

    def test_transform_bounds_all_points(self):
        cases = [
            (P_Q1N, "Q1N.0", dict(s2=0.5)),
            (P_Q1N, "Q1N.1", dict(a=0.4, s2=0.6)),
            (P_Q1N, "Q1N.2", dict(lambda2=1.2)),
            (P_Q1N, "Q1N.3", dict(t=0.7, s1=0.4, lambda2=0.8)),
            (P_Q1N, "Q1N.4", dict(lambda1=1.1, lambda2=0.9)),
            (P_Q2N, "Q2N.0", dict(s2=0.5)),
            (P_Q2N, "Q2N.1", dict(t=0.5, s1=0.3, s2=0.7)),
            (P_Q2N, "Q2N.2", dict(s1=0.25)),
            (P_Q2N, "Q2N.3", dict(a=0.6, s1=0.3)),
            (P_Q2N, "Q2N.4", dict(lambda1=1.5)),
            (P_IV, "IV.0", dict(s2=0.5)),
            (P_IV, "IV.1", dict(a=0.5, s1=0.4, s2=0.6)),
            (P_IV, "IV.2", dict(lambda1=1.0, lambda2=1.0)),
        ]
        for p, point, args in cases:
            v = limit_reduced_transform(p, point, **args).value
            assert 0.0 <= v <= 1.0, point

    def test_boundary_values_at_one(self):
        # s = 1 / lambda = 0 maps to total transform mass 1
        assert limit_reduced_transform(P_Q1N, "Q1N.4", lambda1=0.0, lambda2=0.0).value == 1.0
        assert limit_reduced_transform(P_Q2N, "Q2N.4", lambda1=0.0).value == 1.0
        assert limit_reduced_transform(P_IV, "IV.2", lambda1=0.0, lambda2=0.0).value == 1.0

    def test_regime_mismatch(self):
        with pytest.raises(RegimeError):
            limit_reduced_transform(P_IV, "Q1N.1", a=0.5, s2=0.5)
        with pytest.raises(DomainError):
            limit_reduced_transform(P_IV, "IV.9", a=0.5)
        with pytest.raises(DomainError):
            limit_reduced_transform(P_Q1N, "Q1N.1", a=1.5, s2=0.5)


class TestMrcaLimit:
    def test_q1n(self):
        assert mrca_limit(P_Q1N, "beta_le_an_type2", a=0.3) == pytest.approx(0.3)
        assert mrca_limit(P_Q1N, "singleton_type2_at_an", a=0.3) == pytest.approx(0.7)

    def test_q2n_masses(self):
        p = validate_params(0.75, 1.0, 0.3)
        # total type-2 mass a2/(1+a2) plus the a -> 1 type-1 mass 1/(1+a2)
        total2 = mrca_limit(p, "beta_le_tg_type2", t=1e9)
        total1 = mrca_limit(p, "beta_window_type1", a=1.0 - 1e-12)
        assert total2 + total1 == pytest.approx(1.0, abs=1e-9)
        assert total2 == pytest.approx(0.5)

    def test_q2n_death_law(self):
        assert mrca_limit(P_Q2N, "death2_le_tg", t=1.0) == pytest.approx(
            1.0 - 2.0 ** (-1 / 0.9)
        )

    def test_iv_values(self):
        # b = 2 when sigma*a2*a21 = 2, i.e. a21 = 4/9 at (0.5, 1.0)
        p = validate_params(0.5, 1.0, 4.0 / 9.0)
        assert p.b == pytest.approx(2.0, abs=1e-12)
        assert mrca_limit(p, "type2") == pytest.approx(2.0 / 3.0)
        a = 0.4
        le = mrca_limit(p, "beta_le_an", a=a)
        gt = mrca_limit(p, "beta_gt_an", a=a)
        assert le + gt == pytest.approx(1.0, abs=1e-12)
        kappa = p.kappa
        expected_gt = (1 - a) / 2 + 0.5 * (1 - a) ** kappa
        assert gt == pytest.approx(expected_gt, abs=1e-12)

    def test_regime_errors(self):
        with pytest.raises(RegimeError):
            mrca_limit(P_IV, "beta_le_an_type2", a=0.5)
        with pytest.raises(DomainError):
            mrca_limit(P_IV, "nonsense")


class TestGProcess:
    def test_marginal_reduces_to_theta2_at_s1_one(self):
        lam2 = 0.7
        v = g_process_marginal(0.4, 1.0, 2.0, 1.0, lam2)
        assert v == pytest.approx(1.0 - (1.0 + lam2**-1.0) ** -1.0, abs=1e-14)

    def test_conventions_coincide_at_t_one(self):
        for conv in ("theorem", "definition"):
            v = g_process_marginal(0.4, 1.0, 1.0, 0.5, 0.7, convention=conv)
            assert v == pytest.approx(
                g_process_marginal(0.4, 1.0, 1.0, 0.5, 0.7), abs=1e-15
            )

    def test_conventions_differ_off_t_one(self):
        a = g_process_marginal(0.4, 1.0, 2.0, 0.5, 0.7, convention="theorem")
        b = g_process_marginal(0.4, 1.0, 2.0, 0.5, 0.7, convention="definition")
        assert abs(a - b) > 1e-3

    def test_transition_degenerates_at_equal_times(self):
        # t1 -> t0: the count factor tends to s1**n1, the mass factor to
        # exp(-lambda2*y)
        v = g_process_transition(0.4, 1.0, 1.0 - 1e-10, 1, 2.0, 0.5, 0.7)
        assert v == pytest.approx(0.5 * math.exp(-0.7 * 2.0), rel=1e-6)

    def test_transition_requires_ordering(self):
        with pytest.raises(DomainError):
            g_process_transition(0.4, 1.0, 2.0, 1, 2.0, 0.5, 0.7)

    def test_two_time_is_marginal_of_composed_arguments(self):
        # assemble the conditional factor A**N exp(-B*Y) by hand and check
        # the composition equals the t0-marginal at (s*A, lam+B)
        a1, a2 = 0.4, 1.0
        t0, t1 = 2.0, 0.5
        s10, lam20, s11, lam21 = 0.6, 0.8, 0.4, 1.2
        r, u = t1 / t0, 1.0 - s11
        a_fac = 1.0 - (1.0 - r + r * u**-a1) ** (-1.0 / a1)
        b_fac = (
            t1 ** (1 - 1 / a1)
            * u ** (1 - a1)
            * (1.0 - (1.0 + (t0 / t1 - 1.0) * u**a1) ** (1 - 1 / a1))
            + lam21
        )
        expected = g_process_marginal(a1, a2, t0, s10 * a_fac, lam20 + b_fac)
        v = g_process_two_time(a1, a2, t0, t1, s10, lam20, s11, lam21)
        assert v == pytest.approx(expected, abs=1e-14)

    def test_two_time_degenerate_matches_marginal(self):
        # pushing the second arguments to their identity (s=1, lam=0)
        # recovers the marginal at t0 up to the transition factor at s1=1
        t0, t1 = 2.0, 0.5
        v = g_process_two_time(0.4, 1.0, t0, t1, 0.6, 0.8, 1.0 - 1e-12, 0.0)
        m = g_process_marginal(0.4, 1.0, t0, 0.6, 0.8)
        assert v == pytest.approx(m, abs=1e-6)


class TestCtmcPgf:
    def test_initial_conditions(self):
        assert ctmc_pgf("X", P_11, 0.0, 1.0, 0.37).value == 0.37
        assert ctmc_pgf("V", P_IV, 0.0, 0.42, 1.0).ode_value == 0.42

    def test_x_closed_form_point(self):
        r = ctmc_pgf("X", P_11, math.log(2.0), 1.0, 0.5)
        assert r.value == pytest.approx(1.0 / 3.0, abs=1e-12)

    @pytest.mark.parametrize(
        "pid,params",
        [("X", P_11), ("X", P_Q2N), ("V", P_IV), ("W", P_IV)],
    )
    def test_closed_form_vs_ode(self, pid, params):
        for t in (0.3, 1.0):
            for s1, s2 in ((0.3, 0.7), (0.6, 0.2)):
                r = ctmc_pgf(pid, params, t, s1, s2)
                assert r.closed_form == pytest.approx(r.ode_value, abs=1e-8)

    def test_y_ode_vs_phi_composition(self):
        for t in (0.5, 1.0):
            for s1, s2 in ((0.3, 0.7), (0.6, 0.2)):
                r = ctmc_pgf("Y", P_11, t, s1, s2)
                assert r.closed_form is None
                assert r.ode_value == pytest.approx(
                    y_pgf_via_phi(P_11, t, s1, s2), abs=1e-8
                )

    @pytest.mark.parametrize("pid,params", [("X", P_11), ("Y", P_Q2N), ("V", P_IV), ("W", P_IV)])
    def test_kolmogorov_residual(self, pid, params):
        # d f/dt computed by finite differences of the integrated state must
        # equal the generator applied to that state, 20 (t, s) points each
        from redbranch.limit_laws import _rk4_halving

        rhs = kolmogorov_rhs(pid, params)
        rng = np.random.default_rng(5)
        h = 1e-5
        for _ in range(20):
            t = float(rng.uniform(0.1, 1.5))
            s1, s2 = rng.uniform(0.1, 0.9, 2)
            y0 = np.array([s1, s2])
            y = _rk4_halving(rhs, y0, t, 1e-11)
            y_hi = _rk4_halving(rhs, y0, t + h, 1e-11)
            y_lo = _rk4_halving(rhs, y0, t - h, 1e-11)
            fd = (y_hi - y_lo) / (2 * h)
            gen = rhs(t, y)
            assert np.allclose(fd, gen, atol=1e-5)

    def test_domain(self):
        with pytest.raises(DomainError):
            ctmc_pgf("Z", P_11, 1.0, 0.5, 0.5)
        with pytest.raises(RegimeError):
            ctmc_pgf("W", P_Q1N, 1.0, 0.5, 0.5)


def test_w_first_branching_cdf_shape():
    assert w_first_branching_cdf(P_IV, 0.0) == pytest.approx(0.0)
    assert w_first_branching_cdf(P_IV, 50.0) == pytest.approx(1.0, abs=1e-12)
    ts = np.linspace(0.0, 5.0, 50)
    vals = [w_first_branching_cdf(P_IV, t) for t in ts]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with pytest.raises(RegimeError):
        w_first_branching_cdf(P_Q1N, 1.0)
