import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from degenerate_ek import asymptotics as asy
from degenerate_ek.errors import InvariantError
from degenerate_ek.labeling import label_from_edges
from degenerate_ek.potential import INF, nu_stats

from helpers import morse_min, point

CURVED = {2: ("x1", "x2 + x1^2"), 3: ("x1", "x2 + x1^2", "x3")}


def saddle(nu, t=None, curved=False, **kw):
    t = t or [-1] + [1] * (len(nu) - 1)
    return point(nu, t, U=CURVED[len(nu)] if curved else None, **kw)


class TestKIndex:
    @pytest.mark.parametrize("nu, k", [((2, 2), F(1, 2)), ((4, 2), F(3, 8)), ((4, 4, 8), F(5, 16))])
    def test_values(self, nu, k):
        assert asy.k_index(point(nu, [1] * len(nu))) == k


class TestClassify:
    def test_dim_one(self):
        c = asy.classify_saddle(saddle([6]), 6)
        assert c.kind == asy.J_INF_DIM1 and c.gamma == INF

    def test_linear_chart(self):
        assert asy.classify_saddle(saddle([4, 4]), 4).kind == asy.J_INF_UNITARY_LINEAR

    def test_quadratic_drop(self):
        assert asy.classify_saddle(saddle([2, 4], curved=True), 4).kind == asy.J_INF_NU1_EQ_2

    def test_case3(self):
        c = asy.classify_saddle(saddle([4, 2, 2], curved=True), 6)
        assert c.kind == asy.J1_CASE3 and c.gamma == F(2, 6)

    def test_j2_closing_example(self):
        c = asy.classify_saddle(saddle([4, 4, 8], curved=True), 8)
        assert c.kind == asy.J2 and c.gamma == 0

    def test_homogeneous(self):
        c = asy.classify_saddle(saddle([6, 6], curved=True), 6)
        assert c.gamma == F(1, 3)
        assert asy.CRITERION_HOMOGENEOUS in asy.admissibility_criteria(saddle([6, 6], curved=True), 6)

    def test_case5_in_dimension_two(self):
        c = asy.classify_saddle(saddle([6, 4], curved=True), 6)
        assert c.kind == asy.J1_CASE5 and c.gamma >= F(2, 6) > 0
        assert asy.CRITERION_DIM2 in asy.admissibility_criteria(saddle([6, 4], curved=True), 6)

    def test_drop_direction_reordered(self):
        c = asy.classify_saddle(point([2, 4], [1, -1]), 4)
        assert c.saddle.t[0] < 0 and c.saddle.nu == (4, 2)

    def test_not_a_saddle(self):
        with pytest.raises(InvariantError, match="index-1"):
            asy.classify_saddle(morse_min(2), 2)

    def test_inner_min_rule_enumerated(self):
        # the -2/nu_hat branch wins exactly when nu_hat * nu_under >= nu_bar^s
        checked = 0
        for nu in itertools.product(range(2, 13, 2), repeat=3):
            stats = nu_stats([point(nu, [-1, 1, 1])])
            if stats.nu_hat == INF:
                continue
            _, hat_branch = asy.inner_min(stats.nu_hat, stats.nu_under, stats.nu_bar)
            assert hat_branch == (stats.nu_hat * stats.nu_under >= stats.nu_bar)
            checked += 1
        assert checked > 100


COMPARISON = [
    ((4, 2, 2), F(-1, 4)),
    ((4, 2), F(-1, 4)),
    ((2, 4, 2), F(1, 4)),
    ((2, 4, 4, 2), F(1, 2)),
] + [((2 * p, 2, 2), F(-(p - 1), 2 * p)) for p in (2, 3, 4)]


class TestMu:
    @pytest.mark.parametrize("nu, alpha", COMPARISON)
    def test_comparison_potentials(self, nu, alpha):
        mu, tilde = asy.mu_exponent(morse_min(len(nu)), [saddle(nu)])
        assert 1 - mu == alpha and isinstance(mu, F)

    def test_minimizer_set(self):
        sa, sb = saddle([4, 2], label=1), saddle([2, 2], label=2)
        mu, tilde = asy.mu_exponent(morse_min(2), [sa, sb])
        assert mu == 1 and tilde == (sb,)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 4).flatmap(lambda d: st.tuples(
        st.lists(st.sampled_from([2, 4, 6, 8, 10]), min_size=d, max_size=d),
        st.lists(st.sampled_from([2, 4, 6, 8, 10]), min_size=d, max_size=d))))
    def test_interval(self, data):
        nu_m, nu_s = data
        d = len(nu_m)
        mu, _ = asy.mu_exponent(point(nu_m, [1] * d), [saddle(nu_s)])
        assert mu < F(3 + d, 2)
        # in d = 1 there is no transverse direction and the Morse case sits on the lower end
        if d == 1:
            assert mu >= 1
        else:
            assert mu > F(3 - d, 2)

    def test_lower_end_attained_in_one_dimension(self):
        mu, _ = asy.mu_exponent(point([2], [1]), [saddle([2])])
        assert mu == 1 == F(3 - 1, 2)


class TestZ:
    def test_morse_1d(self):
        a, b = 3.0, 5.0
        z = asy.z_prefactor(point([2], [b]), point([2], [-a]))
        assert z == pytest.approx(2 / math.pi * math.sqrt(a * b), rel=1e-14)

    def test_equal_orders(self):
        m = point([4, 6], [2, 3])
        s = point([4, 6], [-F(1, 2), 5])
        assert asy.z_prefactor(m, s) == pytest.approx(asy.equal_order_z(m, s), rel=1e-13)

    def test_morse_determinant(self):
        tm, ts = [1.5, 2.0, 0.7], [-0.8, 1.1, 3.0]
        z = asy.z_prefactor(point([2] * 3, tm), point([2] * 3, ts))
        assert z == pytest.approx(asy.morse_z(tm, ts), rel=1e-12)

    def test_needs_minimum(self):
        with pytest.raises(InvariantError):
            asy.z_prefactor(point([2], [-1]), point([2], [-1]))

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.sampled_from([2, 4, 6]), min_size=3, max_size=3),
           st.lists(st.fractions(F(1, 10), 5, max_denominator=10), min_size=3, max_size=3),
           st.lists(st.fractions(F(1, 10), 5, max_denominator=10), min_size=3, max_size=3))
    def test_positive_and_permutation_invariant(self, nu, tm, ts):
        m = point([2, 4, 6], tm)
        s = point(nu, [-ts[0], ts[1], ts[2]])
        z = asy.z_prefactor(m, s)
        assert z > 0
        m_swapped = point([2, 6, 4], [tm[0], tm[2], tm[1]])
        s_swapped = point([nu[0], nu[2], nu[1]], [-ts[0], ts[2], ts[1]])
        assert asy.z_prefactor(m_swapped, s_swapped) == pytest.approx(z, rel=1e-13)


def _mixed_labeling():
    a = point([2, 2], [1, 1], [-2, 0], -2, label=0)
    m = point([2, 2], [1, 1], [0, 0], 0, label=1)
    b = point([2, 2], [1, 1], [2, 0], -2, label=2)
    sa = point([4, 2], [-1, 1], [-1, 0], 1, label=3)
    sb = point([2, 2], [-1, 1], [1, 0], 1, label=4)
    return [a, m, b, sa, sb], label_from_edges([a, m, b], [(sa, a, m), (sb, m, b)])


class TestLaw:
    def test_morse_collapse(self):
        a = point([2], [2], [-1], -1, label=0)
        b = point([2], [3], [1], -2, label=1)
        s = point([2], [-1], [0], 0, label=2)
        law = asy.asymptotic_law(label_from_edges([a, b], [(s, a, b)]), [a, b, s])
        e = law.entry(a)
        assert (e.mu, e.beta) == (1, 1) and e.S == 1
        assert e.v == pytest.approx(asy.morse_z([2], [-1]), rel=1e-12)

    def test_mixed_saddles(self):
        points, lab = _mixed_labeling()
        e = asy.law_for_minimum(points[1], lab, points)
        assert e.tilde_j == (points[4],)
        assert e.mu == 1 and e.beta == F(1, 4)

    def test_underline(self):
        points, lab = _mixed_labeling()
        law = asy.asymptotic_law(lab, points)
        e = law.entry(points[0])
        assert e.is_underline and e.S == INF and asy.eyring_kramers(e, 0.1) == 0.0

    def test_alpha_zero_fails_for_closing_example(self):
        a = point([2, 2, 2], [1, 1, 1], [-2, 0, 0], -1, label=0)
        b = point([2, 2, 2], [1, 1, 1], [2, 0, 0], -2, label=1)
        s = point([4, 4, 8], [-1, 1, 1], [0, 0, 0], 0, U=("x1", "x2", "x3 + x1*x2"), label=2)
        law = asy.asymptotic_law(label_from_edges([a, b], [(s, a, b)]), [a, b, s])
        ok, cert = asy.check_assumption_alpha(law)
        assert law.alpha0 == 0 and not ok
        assert cert[s.display_name] == [asy.CRITERION_DIRECT]


class TestScalars:
    def test_eyring_kramers_value(self):
        law = asy.MinimumLaw(morse_min(1), F(3, 20), F(5, 4), 2.0)
        # direct evaluation: 2 * 0.05^1.25 * e^-6
        assert asy.eyring_kramers(law, 0.05) == pytest.approx(1.1721295e-4, rel=1e-7)
        assert asy.eyring_kramers(law, 0.001) < 1e-100

    def test_normalizing_constant(self):
        assert asy.normalizing_constant_leading(2, 0.1) == pytest.approx(math.sqrt(2 / (0.1 * math.pi)), rel=1e-14)
        assert asy.normalizing_constant_leading(2, 0.1) == pytest.approx(2.5231, abs=1e-4)
        assert asy.normalizing_constant_leading(4, 1.0) == pytest.approx(0.7801245, abs=1e-7)

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from([2, 4, 6, 8]), st.floats(1e-4, 0.9))
    def test_normalizing_scaling(self, nu1, h):
        lhs = asy.normalizing_constant_leading(nu1, h)
        assert lhs == pytest.approx(h ** (-1 / nu1) * asy.normalizing_constant_leading(nu1, 1.0), rel=1e-13)

    def test_odd_order_rejected(self):
        with pytest.raises(ValueError):
            asy.normalizing_constant_leading(3, 0.1)
