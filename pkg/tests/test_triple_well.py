from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenerate_ek.errors import AssumptionError
from degenerate_ek.potential import CriticalPoint
from degenerate_ek import triple_well as tw


def point(x, value, nu, t, name, label):
    return CriticalPoint(tuple(F(v) for v in x), F(value), tuple(nu), tuple(F(v) for v in t), None, name, label)


def chain(d=3, nu1=4, nu2=2, t_min=(1, 1, 1), t_s1=None, t_s2=None, values=(0, 0, 0), saddle_values=(1, 1),
          min_nu=None):
    zero = [0] * (d - 1)
    t_min = list(t_min) if len(t_min) == 3 and not isinstance(t_min[0], (list, tuple)) else t_min
    mins = []
    for i in range(3):
        tm = t_min[i] if isinstance(t_min[i], (list, tuple)) else [t_min[i]] * d
        nm = min_nu[i] if min_nu else [2] * d
        mins.append(point([2 * i - 2] + zero, values[i], nm, tm, f"m{i}", i))
    s1 = point([-1] + zero, saddle_values[0], [nu1] * d, t_s1 or [-1] + [1] * (d - 1), "s1", 3)
    s2 = point([1] + zero, saddle_values[1], [nu2] * d, t_s2 or [-1] + [1] * (d - 1), "s2", 4)
    return mins, [(s1, mins[0], mins[1]), (s2, mins[1], mins[2])]


def build(**kw):
    mins, edges = chain(**kw)
    return tw.triple_well_matrix(mins + [e[0] for e in edges], edges)


class TestConstants:
    def test_morse_well_constant(self):
        # Morse well: c0^{-2} = 4 prod sqrt(pi / (2 t)) = 4 (pi/2)^{d/2} for t = 1
        m = point([0, 0, 0], 0, [2, 2, 2], [1, 1, 1], "m", 0)
        assert tw.well_constant(m) ** -2 == pytest.approx(4 * (np.pi / 2) ** 1.5, rel=1e-14)

    def test_saddle_flux_positive_and_drop_first(self):
        s = point([0, 0, 0], 0, [4, 4, 4], [1, -1, 1], "s", 0)
        t = point([0, 0, 0], 0, [4, 4, 4], [-1, 1, 1], "s", 0)
        assert tw.saddle_flux(s) == pytest.approx(tw.saddle_flux(t), rel=1e-14)
        assert tw.saddle_flux(s) > 0


class TestRoles:
    def test_order_of_edges_irrelevant(self):
        mins, edges = chain()
        a = tw.assign_roles(edges)
        b = tw.assign_roles(edges[::-1])
        assert a == b
        assert a.s1.name == "s1" and a.m_mid.name == "m1"
        assert {a.m_low.name, a.m_far.name} == {"m0", "m2"}
        assert a.m_low.name == "m0"

    def test_not_a_chain(self):
        mins, edges = chain()
        s1, s2 = edges[0][0], edges[1][0]
        with pytest.raises(AssumptionError, match="chain"):
            tw.assign_roles([(s1, mins[0], mins[1]), (s2, mins[0], mins[1])])

    def test_three_saddles(self):
        mins, edges = chain()
        with pytest.raises(AssumptionError):
            tw.assign_roles(edges + edges[:1])


class TestSymmetricExample:
    r = tw.triple_well(tw.symmetric_example())

    def test_exponents(self):
        assert self.r.split
        assert self.r.beta == F(1, 4)
        assert self.r.mu == F(3, 4)          # 2 - 2 (3/4) + 1/4
        assert self.r.S == 1

    def test_gamma_and_alpha(self):
        assert self.r.gamma == pytest.approx(2.0)
        hat1 = self.r.c_hat[1]
        assert self.r.alpha == pytest.approx(4 * hat1 ** 2 * self.r.z1[0], rel=1e-14)
        assert self.r.m3 == pytest.approx(9 * self.r.c_hat[2] ** 2 * self.r.z1[1], rel=1e-14)

    def test_eta_orthonormal(self):
        np.testing.assert_allclose(self.r.eta.T @ self.r.eta, np.eye(3), atol=1e-14)

    @pytest.mark.parametrize("h", [1e-2, 1e-3, 1e-4])
    def test_eta_block_equals_symbolic(self, h):
        E = self.r.eta_matrix(h)
        scale = np.abs(E).max()
        np.testing.assert_allclose(E[1:, 1:], self.r.symbolic_block(h), atol=1e-13 * scale)
        assert np.abs(E[0]).max() <= 1e-13 * scale

    def test_m1_rank_one(self):
        assert abs(np.linalg.det(self.r.M1)) <= 1e-14 * np.abs(self.r.M1).max() ** 2

    def test_dense_spectrum(self):
        for h in np.logspace(-4, -2, 7):
            lam = self.r.dense_scaled(h)
            eps = h ** 0.25
            assert abs(lam[0]) <= 1e-13
            assert abs(lam[2] - self.r.alpha) <= 3 * eps * self.r.alpha
            assert abs(lam[1] / (self.r.m3 * eps) - 1) <= 3 * eps

    def test_beta_fit(self):
        fit = tw.fit_beta(self.r, np.logspace(-4, -2, 12))
        assert abs(fit.beta - 0.25) <= 0.05

    def test_predicted_includes_scale(self):
        h = 0.05
        pred = self.r.predicted(h)
        np.testing.assert_allclose(pred, self.r.predicted_scaled(h) * h ** 0.75 * np.exp(-2 / h))


class TestAssumptionClauses:
    def test_admissible_ratio(self):
        assert build(d=3, nu1=4, nu2=2).beta == F(1, 4)

    def test_ratio_clause(self):
        # 2/6 = 1/3 is not above 1 - 2/3
        with pytest.raises(AssumptionError) as err:
            build(d=3, nu1=6, nu2=2)
        assert err.value.clause == tw.CLAUSE_RATIO

    def test_dimension_clause(self):
        with pytest.raises(AssumptionError) as err:
            build(d=2, t_min=(1, 1, 1))
        assert err.value.clause == tw.CLAUSE_DIMENSION

    def test_equal_k_clause(self):
        with pytest.raises(AssumptionError) as err:
            build(min_nu=[[2, 2, 2], [4, 2, 2], [2, 2, 2]])
        assert err.value.clause == tw.CLAUSE_EQUAL_K

    def test_homogeneous_clause(self):
        mins, edges = chain()
        s1 = point([-1, 0, 0], 1, [4, 4, 2], [-1, 1, 1], "s1", 3)
        edges[0] = (s1, mins[0], mins[1])
        with pytest.raises(AssumptionError) as err:
            tw.triple_well_matrix(mins + [s1, edges[1][0]], edges)
        assert err.value.clause == tw.CLAUSE_HOMOGENEOUS

    def test_geometry_values(self):
        with pytest.raises(AssumptionError) as err:
            build(values=(0, 0, F(1, 10)))
        assert err.value.clause == tw.CLAUSE_GEOMETRY
        with pytest.raises(AssumptionError):
            build(saddle_values=(1, 2))

    def test_nu_bar_clause(self):
        mins, edges = chain()
        extra = point([5, 0, 0], 3, [6, 6, 6], [-1, 1, 1], "far", 9)
        with pytest.raises(AssumptionError) as err:
            tw.triple_well_matrix(mins + [e[0] for e in edges] + [extra], edges)
        assert err.value.clause == tw.CLAUSE_ORDERS

    def test_non_split_regime(self):
        r = build(nu1=4, nu2=4)
        assert not r.split and r.beta == 0
        assert any("non-split" in line for line in r.lines())
        with pytest.raises(Exception):
            tw.fit_beta(r, np.logspace(-4, -2, 6))


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.fractions(F(1, 4), F(4)), min_size=3, max_size=3),
           st.fractions(F(1, 4), F(4)), st.fractions(F(1, 4), F(4)),
           st.sampled_from([(3, 4, 2), (3, 6, 4), (4, 6, 4), (5, 8, 6)]))
    def test_symbolic_matches_dense(self, t_min, t1, t2, dims):
        d, nu1, nu2 = dims
        r = build(d=d, nu1=nu1, nu2=nu2, t_min=list(t_min),
                  t_s1=[-t1] + [1] * (d - 1), t_s2=[-t2] + [t2] * (d - 1))
        assert r.beta == (d - 2) * (F(1, nu2) - F(1, nu1))
        for h in (1e-2, 1e-4):
            N = r.interaction_matrix(h)
            np.testing.assert_array_equal(N, N.T)
            E = r.eta_matrix(h)
            np.testing.assert_allclose(E[1:, 1:], r.symbolic_block(h), atol=1e-12 * np.abs(E).max())
            dense = r.dense_scaled(h)
            sym = np.linalg.eigvalsh(r.symbolic_block(h))
            np.testing.assert_allclose(dense[1:], sym, rtol=1e-9)
            assert abs(dense[0]) <= 1e-12 * dense[-1]
