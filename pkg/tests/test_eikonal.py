from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenerate_ek import eikonal as ek
from degenerate_ek.errors import AssumptionError, InvariantError
from degenerate_ek.polynomial import Poly, monomials_of_degree, parse_poly
from degenerate_ek.potential import CriticalPoint
from degenerate_ek.radical import RadicalField


def saddle(nu, t, U=None):
    d = len(nu)
    maps = None if U is None else tuple(parse_poly(u, d) for u in U)
    return CriticalPoint((F(0),) * d, F(0), tuple(nu), tuple(F(v) for v in t), maps, "s")


UNSOLVABLE_SADDLE = saddle((4, 4), ("-1/4", "1/4"), ("x1", "x2*(1+x1)"))


def x(i, n=2):
    return Poly.variable(n, i)


class TestTruncatedPolynomial:
    def test_product_difference_of_squares(self):
        a = ek.TruncatedPolynomial(x(0) + x(1), 2)
        b = ek.TruncatedPolynomial(x(0) - x(1), 2)
        assert (a * b).poly == x(0) * x(0) - x(1) * x(1)

    def test_mul_truncates(self):
        a = ek.TruncatedPolynomial(x(0), 1)
        assert (a * a).is_zero()

    def test_compose_hand_expansion(self):
        outer = ek.TruncatedPolynomial(x(0) * x(0), 3)
        inner = [ek.TruncatedPolynomial(x(0) + x(0) * x(1), 3), ek.TruncatedPolynomial(x(1), 3)]
        expected = x(0) ** 2 + 2 * x(0) ** 2 * x(1)
        assert outer.compose(inner).poly == expected

    def test_truncation_mismatch(self):
        with pytest.raises(ValueError, match="truncation degree"):
            ek.TruncatedPolynomial(x(0), 2) + ek.TruncatedPolynomial(x(0), 3)

    def test_variable_mismatch(self):
        with pytest.raises(ValueError, match="variable count"):
            ek.TruncatedPolynomial(x(0), 2) + ek.TruncatedPolynomial(Poly.variable(3, 0), 2)

    def test_compose_needs_zero_constant(self):
        outer = ek.TruncatedPolynomial(x(0) * x(0), 3)
        inner = [ek.TruncatedPolynomial(x(0) + 1, 3), ek.TruncatedPolynomial(x(1), 3)]
        with pytest.raises(ValueError):
            outer.compose(inner)

    def test_zero_jet(self):
        p = ek.TruncatedPolynomial(x(0) + F(3, 2), 4)
        assert p.evaluate_at_zero_jet() == F(3, 2)


class TestOmega:
    def test_identity(self):
        omega = ek.omega_expansion((x(0), x(1)), 5)
        assert omega[0][0].poly == Poly.constant(2, F(1))
        assert omega[0][1].is_zero()
        assert omega[1][1].poly == Poly.constant(2, F(1))

    def test_unsolvable_chart_first_order(self):
        omega = ek.omega_expansion(UNSOLVABLE_SADDLE.local_map, 1)
        assert omega[0][0].poly == Poly.constant(2, F(1))
        assert omega[0][1].poly == -x(1)
        assert omega[1][0].poly == -x(1)
        assert omega[1][1].poly == Poly.constant(2, F(1)) - 2 * x(0)

    def test_not_unitary(self):
        with pytest.raises(InvariantError, match="unitary"):
            ek.omega_expansion((2 * x(0), x(1)), 3)

    @pytest.mark.parametrize("U", [
        ("x1 + x1*x2", "x2 - x1^2"),
        ("3/5*x1 - 4/5*x2 + x2^2", "4/5*x1 + 3/5*x2 + x1*x2"),
    ])
    def test_inverts_metric(self, U):
        N = 5
        chart = [parse_poly(u, 2) for u in U]
        omega = ek.omega_expansion(chart, N)
        g = ek.metric(chart, N)
        for a in range(2):
            for b in range(2):
                acc = Poly(2, {})
                for k in range(2):
                    acc = acc + omega[a][k].poly.mul(g[k][b], N)
                assert acc == Poly.constant(2, F(int(a == b)))

    def test_symmetric(self):
        omega = ek.omega_expansion([parse_poly("x1 + x2^2 - x1*x2", 2), parse_poly("x2 + x1^2", 2)], 6)
        assert omega[0][1].poly == omega[1][0].poly


class TestLeading:
    def test_morse_generator_is_rational(self):
        st_ = ek.leading_ell(saddle((2, 2), (-1, 1)))
        assert st_.ell.poly == Poly(2, {(1, 0): st_.problem.field(2)}, zero=st_.problem.field.zero)
        assert st_.ell.coefficient((1, 0)).rational() == 2

    def test_quartic_generator(self):
        st_ = ek.leading_ell(saddle((4, 2), ("-1/4", 1)))
        fld = st_.problem.field
        assert fld.degree == 4 and fld.base == 2
        c = st_.ell.coefficient((1, 0))
        assert c ** 4 == 2

    def test_unsolvable_chart_low_degrees_vanish(self):
        st_ = ek.leading_ell(UNSOLVABLE_SADDLE, 6)
        res = ek.eikonal_residual(st_.problem, st_.ell.poly)
        assert res.lowest_degree() == 4
        assert st_.solved_to == 3

    def test_identity_chart_solves_completely(self):
        s = saddle((4, 4), ("-1/4", "1/4"))
        st_ = ek.solve_eikonal(s, 6)
        assert st_.obstruction is None
        assert ek.eikonal_residual(st_.problem, st_.ell.poly).is_zero()
        assert st_.ell.poly.degree() == 1

    def test_generic_chart_residual_degree(self):
        # w0 = 2c sum omega_1j nu_j t_j x_j^(nu_j - 1): degree min_{j >= 2} nu_j
        s = saddle((4, 6), ("-1", "1"), ("x1 + x2^2", "x2 - x1*x2"))
        report = ek.residual_report(ek.leading_ell(s, 8))
        assert report.lowest_degree == 6


class TestSolveOrder:
    def test_obstruction_at_degree_two(self):
        st_ = ek.solve_eikonal(UNSOLVABLE_SADDLE, 6)
        ob = st_.obstruction
        assert ob is not None and ob.degree == 2 and ob.residual_degree == 4
        rank_a, rank_ab = ek.confirm_obstruction(st_)
        assert rank_ab > rank_a

    def test_obstruction_residual_matches_hand_computation(self):
        # with ell_2 = 0 the degree-4 residual is 2^(5/4) omega_12 y^3 = -2 c y^4
        st_ = ek.solve_eikonal(UNSOLVABLE_SADDLE, 6)
        c = st_.problem.c
        assert st_.obstruction.residual == Poly(2, {(0, 4): -2 * c}, zero=c.field.zero)

    def test_obstruction_rank_by_hand_operator(self):
        # L0 p = 2(-x^3, y^3).grad p + 2 c^4 x^3 d_x p + 3 c^4 x^2 p with c^4 = 2
        basis = monomials_of_degree(2, 2)
        rows = monomials_of_degree(2, 4)
        xs, ys = Poly.variable(2, 0), Poly.variable(2, 1)
        cols = []
        for e in basis:
            p = Poly.monomial(e)
            img = 2 * (-(xs ** 3)) * p.diff(0) + 2 * ys ** 3 * p.diff(1) + 4 * xs ** 3 * p.diff(0) + 6 * xs ** 2 * p
            cols.append([img.coefficient(r) for r in rows])
        mat = [[cols[k][i] for k in range(len(basis))] for i in range(len(rows))]
        rhs = [F(0)] * len(rows)
        rhs[rows.index((0, 4))] = F(2)  # -R in the c-component
        from degenerate_ek.exact_linalg import rank
        assert rank(mat) == 3
        assert rank([r + [b] for r, b in zip(mat, rhs)]) == 4

    def test_order_requires_previous(self):
        s = saddle((2, 2), (-1, 1), ("x1 + x2^2", "x2 - x1*x2"))
        st_ = ek.leading_ell(s, 6)
        with pytest.raises(ValueError):
            ek.solve_order(st_, 4)

    def test_morse_chart_to_degree_eight(self):
        s = saddle((2, 4), ("-3/2", "2/7"),
                   ("3/5*x1 - 4/5*x2 + x1*x2 + 1/2*x2^2", "4/5*x1 + 3/5*x2 - x1^2 + 1/3*x1*x2^2"))
        st_ = ek.solve_eikonal(s, 8)
        assert st_.obstruction is None
        assert st_.solved_to == 8
        assert ek.residual_report(st_, 8).lowest_degree is None

    def test_case3_stops_at_proven_range(self):
        s = saddle((4, 2, 6), ("-1/4", 1, "1/2"), ("x1 + x2*x3 + x2^2", "x2 + x1*x3", "x3 + x1*x2"))
        st_ = ek.solve_eikonal(s)
        assert st_.problem.regime == ek.REGIME_CASE3
        assert st_.obstruction is None and st_.solved_to >= 3
        report = ek.residual_report(st_)
        assert report.certificate_ok

    def test_case3_selection_has_no_pure_x_monomials(self):
        s = saddle((4, 2, 6), ("-1/4", 1, "1/2"), ("x1 + x2*x3 + x2^2", "x2 + x1*x3", "x3 + x1*x2"))
        st_ = ek.solve_eikonal(s)
        for j, piece in st_.pieces.items():
            if j < 2:
                continue
            for e in piece.terms:
                assert e[1] > 0, e

    def test_case5(self):
        s = saddle((6, 4), ("-1/2", "3/4"), ("x1 + x1*x2", "x2 - x1^2"))
        st_ = ek.solve_eikonal(s)
        assert st_.problem.regime == ek.REGIME_CASE5
        assert st_.solved_to == 5
        assert ek.residual_report(st_).certificate_ok

    def test_exact_rerun_identical(self):
        s = saddle((2, 2), ("-5/3", "1/2"), ("x1 + x2^2 - x1*x2", "x2 + x1^2"))
        a = ek.dump(ek.solve_eikonal(s, 6).ell)
        b = ek.dump(ek.solve_eikonal(s, 6).ell)
        assert a == b


class TestL0:
    @pytest.mark.parametrize("j", range(0, 9))
    def test_diagonal_for_quadratic_drop(self, j):
        s = saddle((2, 4, 2), ("-3", "1", "2/5"), ("x1 + x2*x3", "x2", "x3 + x1^2"))
        problem = ek.setup(s, 8)
        mat, cols, rows = ek.l0_matrix(problem, j, restricted=False)
        assert cols == rows
        nu, t = problem.nu, problem.t
        for a, e in enumerate(rows):
            for b in range(len(cols)):
                if a != b:
                    assert mat[a][b] == 0
            expected = 4 * abs(t[0]) + 4 * sum(abs(ti) * ei for ti, ei, n in zip(t, e, nu) if n == 2)
            assert mat[a][a] == expected


def _random_quadratic_chart(draw_coeffs):
    a, b, c, d = draw_coeffs
    return (f"x1 + {a}*x2^2 + {b}*x1*x2", f"x2 + {c}*x1^2 + {d}*x1*x2")


small_rationals = st.fractions(min_value=-2, max_value=2, max_denominator=5)


class TestProperties:
    @given(t1=st.fractions(min_value=F(1, 4), max_value=4, max_denominator=6),
           t2=st.fractions(min_value=F(1, 4), max_value=4, max_denominator=6),
           nu2=st.sampled_from([2, 4]),
           coeffs=st.tuples(small_rationals, small_rationals, small_rationals, small_rationals))
    @settings(max_examples=12, deadline=None)
    def test_nu1_two_bound_and_elliptization(self, t1, t2, nu2, coeffs):
        s = saddle((2, nu2), (-t1, t2), _random_quadratic_chart(coeffs))
        st_ = ek.solve_eikonal(s, 5)
        assert st_.obstruction is None and st_.solved_to == 5
        nu = st_.problem.nu
        for j, piece in st_.pieces.items():
            if j < 2:
                continue
            for e in piece.terms:
                assert any(e[i] >= nu[i] - 1 and sum(e) >= nu[i] for i in range(2)), e
        ell = ek.elliptization(st_)
        assert ell.diagonal_ok and ell.ok

    @given(coeffs=st.tuples(small_rationals, small_rationals, small_rationals, small_rationals))
    @settings(max_examples=8, deadline=None)
    def test_obstruction_soundness(self, coeffs):
        s = saddle((4, 4), ("-1/4", "1/4"), _random_quadratic_chart(coeffs))
        st_ = ek.solve_eikonal(s, 6)
        if st_.obstruction is not None:
            rank_a, rank_ab = ek.confirm_obstruction(st_)
            assert rank_ab > rank_a
        else:
            assert st_.solved_to == st_.problem.residual_degree


class TestTransport:
    def test_requires_quadratic_drop(self):
        st_ = ek.solve_eikonal(saddle((4, 4), ("-1/4", "1/4")), 4)
        with pytest.raises(AssumptionError):
            ek.solve_transport(st_)

    def test_flat_chart_has_no_correction(self):
        st_ = ek.solve_eikonal(saddle((2, 2), (-1, 3)), 6)
        tr = ek.solve_transport(st_, 2)
        assert all(tr.residual_ok)
        assert tr.ells[1].is_zero() and tr.ells[2].is_zero()

    def test_curved_chart(self):
        s = saddle((2, 2), ("-1", "1/2"), ("x1 + x2^2", "x2 - x1*x2"))
        tr = ek.solve_transport(ek.solve_eikonal(s, 6), 2)
        assert tr.degrees == [6, 4, 2]
        assert all(tr.residual_ok)
        assert not tr.ells[1].is_zero()

    def test_laplace_beltrami_against_finite_differences(self):
        s = saddle((2, 2), ("-1", "1/2"), ("x1 + x2^2", "x2 - x1*x2"))
        problem = ek.setup(s, 10)
        f = parse_poly("x1^2*x2 + 3*x2^3 - x1 + x1*x2", 2)
        lap = ek.laplace_beltrami(problem, f, 10)
        chart = problem.chart

        def forward(y):
            return np.array([u.evaluate_array(*y) for u in chart], dtype=float)

        def inverse(xp):
            y = np.array(xp, dtype=float)
            for _ in range(50):
                jac = np.array([[float(u.diff(j).evaluate_array(*y)) for j in range(2)] for u in chart])
                y = y - np.linalg.solve(jac, forward(y) - xp)
            return y

        y0 = np.array([0.03, -0.02])
        x0 = forward(y0)
        step = 1e-3

        def ell(xp):
            return float(f.evaluate_array(*inverse(xp)))

        total = 0.0
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            total += (-ell(x0 + 2 * e) + 16 * ell(x0 + e) - 30 * ell(x0) + 16 * ell(x0 - e) - ell(x0 - 2 * e)) / (12 * step ** 2)
        assert float(lap.evaluate_array(*y0)) == pytest.approx(total, rel=1e-6)


class TestDump:
    def test_format(self):
        fld = RadicalField(4, 2)
        c = fld.generator
        p = Poly(2, {(1, 0): c, (0, 2): fld(F(1, 2)) + c * F(3, 4)}, zero=fld.zero)
        text = ek.dump(p)
        assert text.splitlines() == ["1·c 1 0", "1/2 + 3/4·c 0 2"]

    def test_graded_lex(self):
        p = parse_poly("x2^2 + x1 + x1*x2 + 5", 2)
        assert [line.split()[-2:] for line in ek.dump(p).splitlines()] == [
            ["0", "0"], ["1", "0"], ["1", "1"], ["0", "2"]]
