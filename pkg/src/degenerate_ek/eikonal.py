"""Order-by-order resolution of the eikonal and transport equations at a saddle.

Everything happens in the chart coordinates of the saddle, where the
potential is the normal form ``sum t_i x_i^nu_i`` (drop direction first) and
the metric enters through ``Omega = (dU^T dU)^{-1}``.  The residual of a
candidate phase ``ell`` is

    w0 = 2 Omega grad V . grad ell + ell^(nu1 - 1) Omega grad ell . grad ell.

Starting from ``ell = c x1`` with ``c^nu1 = 2 nu1 |t1|``, homogeneous pieces
of degree j are found from ``L0 ell_j = -R`` where R is the lowest
nonvanishing residual component, of degree ``j + nu_under - 2``.  All
coefficients live in the exact field Q(c).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .errors import AssumptionError, InvariantError
from .exact_linalg import rank, solve
from .polynomial import Poly, monomials_of_degree
from .potential import CriticalPoint
from .radical import RadicalField, RadicalNumber

REGIME_LINEAR_U = "linear-U"
REGIME_NU1_EQ_2 = "nu1=2"
REGIME_CASE3 = "case3"
REGIME_CASE5 = "case5"
REGIME_GENERAL = "general"


class TruncatedPolynomial:
    """Polynomial known modulo terms of total degree > N."""

    __slots__ = ("poly", "N")

    def __init__(self, poly: Poly, N: int):
        if N < 0:
            raise ValueError("truncation degree must be nonnegative")
        self.poly = poly.truncate(N)
        self.N = N

    @classmethod
    def zero(cls, nvars, N, field: RadicalField | None = None):
        return cls(Poly(nvars, {}, zero=field.zero if field else Fraction(0)), N)

    @classmethod
    def variable(cls, nvars, i, N, field: RadicalField | None = None):
        one = field.one if field else Fraction(1)
        zero = field.zero if field else Fraction(0)
        return cls(Poly.variable(nvars, i, one=one, zero=zero), N)

    @property
    def nvars(self):
        return self.poly.nvars

    def _check(self, other):
        if not isinstance(other, TruncatedPolynomial):
            return TruncatedPolynomial(self.poly._coerce(other), self.N)
        if other.nvars != self.nvars:
            raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
        if other.N != self.N:
            raise ValueError(f"truncation degree mismatch: {self.N} vs {other.N}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return TruncatedPolynomial(self.poly + other.poly, self.N)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedPolynomial(-self.poly, self.N)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __mul__(self, other):
        if isinstance(other, TruncatedPolynomial):
            other = self._check(other)
            return TruncatedPolynomial(self.poly.mul(other.poly, self.N), self.N)
        return TruncatedPolynomial(self.poly * other, self.N)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TruncatedPolynomial):
            return NotImplemented
        return self.N == other.N and self.poly == other.poly

    def __hash__(self):
        return hash((self.N, self.poly))

    def compose(self, inner: Sequence["TruncatedPolynomial"]):
        if len(inner) != self.nvars:
            raise ValueError("compose needs one inner polynomial per variable")
        for p in inner:
            if p.N != self.N:
                raise ValueError(f"truncation degree mismatch: {self.N} vs {p.N}")
        return TruncatedPolynomial(self.poly.compose([p.poly for p in inner], self.N), self.N)

    def diff(self, i):
        return TruncatedPolynomial(self.poly.diff(i), self.N)

    def gradient(self):
        return [self.diff(i) for i in range(self.nvars)]

    def homogeneous_part(self, k):
        return self.poly.homogeneous_part(k)

    def lowest_degree(self):
        return self.poly.lowest_degree()

    def coefficient(self, exp):
        return self.poly.coefficient(exp)

    def evaluate_at_zero_jet(self):
        """Value at the origin (the constant coefficient)."""
        return self.poly.coefficient((0,) * self.nvars)

    def is_zero(self):
        return self.poly.is_zero()

    def __repr__(self):
        return f"TruncatedPolynomial({self.poly}, N={self.N})"


def format_coefficient(c) -> str:
    if isinstance(c, RadicalNumber):
        return str(c)
    q = Fraction(c)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def dump(p, header: str | None = None) -> str:
    """Canonical text form: one ``<coefficient> <exponents>`` line per term,
    graded-lex order."""
    poly = p.poly if isinstance(p, TruncatedPolynomial) else p
    lines = [f"# {header}"] if header else []
    for exp, c in poly.sorted_terms():
        lines.append(f"{format_coefficient(c)} {' '.join(str(e) for e in exp)}")
    return "\n".join(lines) + ("\n" if lines else "")


# chart data

def _lift(p: Poly, fld: RadicalField) -> Poly:
    return Poly(p.nvars, {e: fld(c) for e, c in p.terms.items()}, zero=fld.zero)


def _matmul(a, b, N):
    n = len(a)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = Poly(a[0][0].nvars, {})
            for k in range(n):
                acc = acc + a[i][k].mul(b[k][j], N)
            row.append(acc)
        out.append(row)
    return out


def metric(U: Sequence[Poly], N: int):
    """dU^T dU truncated at degree N."""
    n = len(U)
    jac = [[U[i].diff(j) for j in range(n)] for i in range(n)]
    g = []
    for a in range(n):
        row = []
        for b in range(n):
            acc = Poly(n, {})
            for i in range(n):
                acc = acc + jac[i][a].mul(jac[i][b], N)
            row.append(acc)
        g.append(row)
    return g


def omega_expansion(U: Sequence[Poly], N: int):
    """Neumann series of (dU^T dU)^{-1} truncated at degree N.

    ``U`` is the chart map with U(0) = 0.  Returns a d x d list of
    TruncatedPolynomial with rational coefficients.
    """
    n = len(U)
    for p in U:
        if p.coefficient((0,) * n):
            raise ValueError("the chart map must fix the origin")
    g = metric(U, N)
    zero_exp = (0,) * n
    for a in range(n):
        for b in range(n):
            if g[a][b].coefficient(zero_exp) != (1 if a == b else 0):
                raise InvariantError("unitary", "d0U is not unitary; the Neumann series does not apply")
    ident = [[Poly.constant(n, Fraction(1)) if a == b else Poly(n, {}) for b in range(n)] for a in range(n)]
    minus_e = [[ident[a][b] - g[a][b] for b in range(n)] for a in range(n)]
    total = [row[:] for row in ident]
    term = ident
    for _ in range(N):
        term = _matmul(term, minus_e, N)
        if all(p.is_zero() for row in term for p in row):
            break
        total = [[total[a][b] + term[a][b] for b in range(n)] for a in range(n)]
    return [[TruncatedPolynomial(total[a][b], N) for b in range(n)] for a in range(n)]


def jacobian_determinant(U: Sequence[Poly], N: int) -> Poly:
    n = len(U)
    jac = [[U[i].diff(j) for j in range(n)] for i in range(n)]
    det = Poly(n, {})
    for perm in itertools.permutations(range(n)):
        sign = 1
        for i in range(n):
            for k in range(i + 1, n):
                if perm[i] > perm[k]:
                    sign = -sign
        term = Poly.constant(n, Fraction(sign))
        for i in range(n):
            term = term.mul(jac[i][perm[i]], N)
        det = det + term
    return det


def series_inverse(p: Poly, N: int) -> Poly:
    """1/p as a power series truncated at N (p(0) must be nonzero)."""
    n = p.nvars
    c0 = p.coefficient((0,) * n)
    if not c0:
        raise ValueError("series inverse needs a nonzero constant term")
    inv0 = 1 / Fraction(c0) if not isinstance(c0, RadicalNumber) else c0.inverse()
    rest = (p - Poly.constant(n, c0, zero=p._zero)) * inv0
    total = Poly.constant(n, Fraction(1))
    term = Poly.constant(n, Fraction(1))
    for _ in range(N):
        term = term.mul(-rest, N)
        if term.is_zero():
            break
        total = total + term
    return total * inv0


# problem setup

@dataclass
class EikonalProblem:
    saddle: CriticalPoint
    nu: tuple
    t: tuple
    field: RadicalField
    c: RadicalNumber
    N: int
    regime: str
    chart: tuple
    omega: list
    normal_form: Poly
    nu_under: int
    nu_hat: object
    free_variables: tuple

    @property
    def nvars(self):
        return len(self.nu)

    @property
    def residual_degree(self):
        """Highest residual degree that the truncation at N determines exactly."""
        return self.N + self.nu_under - 2

    @property
    def q(self):
        return self.field.q

    def allowed(self, exp) -> bool:
        """Whether a monomial may appear in a solved piece (Q_X = 0 selection)."""
        if self.free_variables is None:
            return True
        return any(exp[i] for i in self.free_variables)

    def max_order(self) -> int:
        """Largest unknown degree this regime is solved to."""
        if self.regime in (REGIME_CASE3, REGIME_CASE5):
            # residual degrees up to nu_hat - 1
            return min(self.N, int(self.nu_hat) - 1 - self.nu_under + 2)
        return self.N


def default_truncation(s: CriticalPoint) -> int:
    return 2 * max(s.nu) + 2


def _regime(s: CriticalPoint) -> str:
    nu = list(s.nu)
    if s.is_linear_map():
        return REGIME_LINEAR_U
    if nu[0] == 2:
        return REGIME_NU1_EQ_2
    low = min(nu)
    if nu[0] > low == 2:
        return REGIME_CASE3
    if nu.count(low) == 1 and nu.index(low) != 0 and nu[0] == max(nu):
        return REGIME_CASE5
    return REGIME_GENERAL


def _nu_hat(nu):
    low = min(nu)
    higher = [n for n in nu if n > low]
    return min(higher) if higher else float("inf")


def setup(s: CriticalPoint, N: int | None = None) -> EikonalProblem:
    if not s.is_saddle:
        raise InvariantError("index-1", "eikonal resolution needs an index-1 point of even orders", s.display_name)
    s = s.drop_first()
    N = default_truncation(s) if N is None else N
    if N < 1:
        raise ValueError("truncation degree must be at least 1")
    nu = tuple(s.nu)
    t = tuple(Fraction(v) for v in s.t)
    fld = RadicalField(nu[0], 2 * nu[0] * abs(t[0]))
    chart = tuple(s.local_map)
    regime = _regime(s)
    nu_under = min(nu)
    nu_hat = _nu_hat(nu)
    omega = omega_expansion(chart, N + nu_under - 2)
    d = len(nu)
    nf = Poly(d, {})
    for i, (n, ti) in enumerate(zip(nu, t)):
        e = [0] * d
        e[i] = n
        nf = nf + Poly.monomial(tuple(e), ti)
    free = None
    if regime in (REGIME_CASE3, REGIME_CASE5):
        free = tuple(i for i in range(1, d) if nu[i] == nu_under)
    return EikonalProblem(s, nu, t, fld, fld.generator, N, regime, chart, omega, nf,
                          nu_under, nu_hat, free)


# residual and linearized operator

def _dot_omega(omega, a, b, N):
    """sum_ij Omega_ij a_i b_j, truncated."""
    d = len(a)
    acc = Poly(a[0].nvars, {})
    for i in range(d):
        if a[i].is_zero():
            continue
        for j in range(d):
            if b[j].is_zero() or omega[i][j].is_zero():
                continue
            acc = acc + a[i].mul(omega[i][j].poly, N).mul(b[j], N)
    return acc


def eikonal_residual(problem: EikonalProblem, ell: Poly, degree: int | None = None) -> Poly:
    """w0 for ell, exact up to ``degree`` (default: what the truncation determines)."""
    top = problem.residual_degree if degree is None else degree
    fld = problem.field
    ell = _lift(ell, fld) if not _is_field_poly(ell) else ell
    omega = _omega_at(problem, top)
    grad_v = [_lift(g, fld) for g in problem.normal_form.gradient()]
    grad_l = ell.gradient()
    first = _dot_omega(omega, grad_v, grad_l, top) * 2
    power = ell.power(problem.nu[0] - 1, top) if problem.nu[0] > 1 else Poly.constant(ell.nvars, fld.one, zero=fld.zero)
    second = power.mul(_dot_omega(omega, grad_l, grad_l, top), top)
    return (first + second).truncate(top)


def _omega_at(problem, top):
    if top <= problem.omega[0][0].N:
        return problem.omega
    return omega_expansion(problem.chart, top)


def _is_field_poly(p: Poly):
    return any(isinstance(c, RadicalNumber) for c in p.terms.values()) or isinstance(p._zero, RadicalNumber)


def apply_l0(problem: EikonalProblem, q: Poly) -> Poly:
    """Leading linearized operator on a homogeneous rational polynomial q.

    L0 q = [2 grad V . grad q + 2 c^nu1 x1^(nu1-1) d1 q + (nu1-1) c^nu1 x1^(nu1-2) q]
    restricted to degree deg q + nu_under - 2; c^nu1 is rational.
    """
    deg = q.degree()
    if deg < 0:
        return q
    d = problem.nvars
    nu1 = problem.nu[0]
    qv = problem.q
    target = deg + problem.nu_under - 2
    out = Poly(d, {})
    for i, g in enumerate(problem.normal_form.gradient()):
        out = out + g.mul(q.diff(i)) * 2
    e = [0] * d
    e[0] = nu1 - 1
    out = out + Poly.monomial(tuple(e), 2 * qv).mul(q.diff(0))
    e[0] = nu1 - 2
    out = out + Poly.monomial(tuple(e), (nu1 - 1) * qv).mul(q)
    return out.homogeneous_part(target)


def l0_matrix(problem: EikonalProblem, j: int, restricted: bool = True):
    """Matrix of L0 from degree-j monomials to degree (j + nu_under - 2) monomials.

    Returns (matrix rows, column monomials, row monomials).
    """
    d = problem.nvars
    cols = [e for e in monomials_of_degree(d, j) if not restricted or problem.allowed(e)]
    rows = monomials_of_degree(d, j + problem.nu_under - 2)
    index = {e: i for i, e in enumerate(rows)}
    mat = [[Fraction(0)] * len(cols) for _ in rows]
    for k, e in enumerate(cols):
        image = apply_l0(problem, Poly.monomial(e, Fraction(1)))
        for exp, c in image.terms.items():
            mat[index[exp]][k] = c
    return mat, cols, rows


def _components(value, n):
    if isinstance(value, RadicalNumber):
        return list(value.coeffs)
    return [Fraction(value)] + [Fraction(0)] * (n - 1)


# solutions

@dataclass
class Obstruction:
    degree: int
    residual_degree: int
    residual: Poly
    rank_a: int
    rank_ab: int

    def lines(self):
        return [f"obstruction at degree {self.degree} (residual degree {self.residual_degree})",
                f"rank L0 = {self.rank_a}, rank [L0 | R] = {self.rank_ab}",
                f"residual: {self.residual}"]


@dataclass
class EikonalSolution:
    problem: EikonalProblem
    ell: TruncatedPolynomial
    solved_to: int
    obstruction: Obstruction | None = None
    orders: tuple = ()

    @property
    def pieces(self):
        return {j: self.ell.homogeneous_part(j) for j in range(1, self.ell.N + 1)}


def _solved_to(problem, ell_poly):
    res = eikonal_residual(problem, ell_poly)
    low = res.lowest_degree()
    return problem.residual_degree if low is None else low - 1


def leading_ell(s: CriticalPoint, N: int | None = None) -> EikonalSolution:
    """ell = c x1 in chart coordinates, c the positive root of c^nu1 = 2 nu1 |t1|."""
    problem = setup(s, N)
    return _leading(problem)


def _leading(problem):
    ell = TruncatedPolynomial.variable(problem.nvars, 0, problem.N, problem.field) * problem.c
    return EikonalSolution(problem, ell, _solved_to(problem, ell.poly))


def solve_order(state: EikonalSolution, j: int) -> EikonalSolution:
    """Add the degree-j piece of ell, or record why it cannot be found."""
    if state.obstruction is not None:
        return state
    problem = state.problem
    if j < 2 or j > problem.N:
        raise ValueError(f"order {j} outside 2..{problem.N}")
    target = j + problem.nu_under - 2
    if state.solved_to < target - 1:
        raise ValueError(f"orders below {j} are not solved (residual vanishes only to degree {state.solved_to})")
    residual = eikonal_residual(problem, state.ell.poly, target).homogeneous_part(target)
    if residual.is_zero():
        return replace(state, solved_to=_solved_to(problem, state.ell.poly), orders=state.orders + (j,))
    mat, cols, rows = l0_matrix(problem, j)
    n = problem.field.degree
    solution = [problem.field.zero for _ in cols]
    for k in range(n):
        rhs = [-_components(residual.coefficient(e), n)[k] for e in rows]
        x, rank_a, rank_ab = solve(mat, rhs) if cols else (None if any(rhs) else [], 0, int(any(rhs)))
        if x is None:
            obstruction = Obstruction(j, target, residual, rank_a, rank_ab)
            return replace(state, obstruction=obstruction)
        gen_power = problem.field.element([0] * k + [1])
        for idx, v in enumerate(x):
            if v:
                solution[idx] = solution[idx] + gen_power * v
    piece = Poly(problem.nvars, {e: v for e, v in zip(cols, solution)}, zero=problem.field.zero)
    ell = state.ell + TruncatedPolynomial(piece, problem.N)
    return replace(state, ell=ell, solved_to=_solved_to(problem, ell.poly), orders=state.orders + (j,))


def solve_eikonal(s: CriticalPoint, N: int | None = None) -> EikonalSolution:
    """Leading term plus every order the regime allows, stopping at an obstruction."""
    problem = setup(s, N)
    state = _leading(problem)
    for j in range(2, problem.max_order() + 1):
        state = solve_order(state, j)
        if state.obstruction is not None:
            break
    return state


def confirm_obstruction(state: EikonalSolution):
    """Rank check of L0 q = -R over the full homogeneous basis.

    Returns (rank L0, rank [L0 | R]) maximized over coefficient components;
    infeasibility shows up as the second exceeding the first.
    """
    ob = state.obstruction
    if ob is None:
        raise ValueError("no obstruction recorded")
    problem = state.problem
    mat, cols, rows = l0_matrix(problem, ob.degree, restricted=False)
    n = problem.field.degree
    rank_a = rank(mat)
    rank_ab = rank_a
    for k in range(n):
        rhs = [-_components(ob.residual.coefficient(e), n)[k] for e in rows]
        rank_ab = max(rank_ab, rank([row + [b] for row, b in zip(mat, rhs)]))
    return rank_a, rank_ab


# reports

@dataclass
class ResidualReport:
    lowest_degree: int | None
    bound: int
    certificate_ok: bool | None = None
    violations: list = field(default_factory=list)

    def lines(self):
        low = f"> {self.bound}" if self.lowest_degree is None else str(self.lowest_degree)
        out = [f"lowest residual degree: {low}"]
        if self.certificate_ok is not None:
            out.append(f"structured bound: {'ok' if self.certificate_ok else 'violated'}")
            out.extend(f"  monomial {e}" for e in self.violations)
        return out


def _case3_ok(problem, exp):
    deg = sum(exp)
    quad = set(problem.free_variables)
    for j, n in enumerate(problem.nu):
        if j not in quad and exp[j] >= n - 1 and deg >= n:
            return True
    return any(exp[i] for i in quad) and deg >= problem.nu_hat


def _case5_ok(problem, exp):
    deg = sum(exp)
    (k,) = problem.free_variables
    for j, n in enumerate(problem.nu):
        if j != k and exp[j] >= n - 1 and deg >= n:
            return True
    return exp[k] >= problem.nu[k] - 1 and deg >= problem.nu_hat


def residual_report(state: EikonalSolution, bound: int | None = None) -> ResidualReport:
    """Lowest nonvanishing degree of w0, plus the monomial bound check in cases iv and v."""
    problem = state.problem
    bound = problem.residual_degree if bound is None else min(bound, problem.residual_degree)
    res = eikonal_residual(problem, state.ell.poly, bound)
    report = ResidualReport(res.lowest_degree(), bound)
    check = {REGIME_CASE3: _case3_ok, REGIME_CASE5: _case5_ok}.get(problem.regime)
    if check is not None:
        bad = [e for e in res.terms if not check(problem, e)]
        report.certificate_ok = not bad
        report.violations = sorted(bad)
    return report


@dataclass
class Elliptization:
    diagonal: list
    expected: list
    min_cross_weight: object
    cross_terms: int

    @property
    def diagonal_ok(self):
        return all(a == b for a, b in zip(self.diagonal, self.expected))

    @property
    def ok(self):
        return self.diagonal_ok and (self.min_cross_weight is None or self.min_cross_weight > 1)

    def lines(self):
        out = []
        for i, (a, b) in enumerate(zip(self.diagonal, self.expected)):
            out.append(f"x{i + 1}: coefficient {format_coefficient(a)} expected {format_coefficient(b)}")
        w = "none" if self.min_cross_weight is None else format_coefficient(self.min_cross_weight)
        out.append(f"cross terms: {self.cross_terms}, lowest weighted degree {w}")
        return out


def elliptization(state: EikonalSolution) -> Elliptization:
    """Check (V + ell^nu1/nu1) in chart coordinates against sum |t_i| x_i^nu_i.

    Diagonal coefficients must equal |t_i| exactly; every other monomial must
    have weighted degree sum a_i/nu_i > 1, so it is small next to the
    diagonal terms.
    """
    problem = state.problem
    nu1 = problem.nu[0]
    # ell = O(x), so ell^nu1 is exact up to degree N + nu1 - 1
    top = state.ell.N + nu1 - 1
    total = _lift(problem.normal_form, problem.field) + state.ell.poly.power(nu1, top) * Fraction(1, nu1)
    d = problem.nvars
    diag_exps = []
    for i, n in enumerate(problem.nu):
        e = [0] * d
        e[i] = n
        diag_exps.append(tuple(e))
    diagonal = [total.coefficient(e) for e in diag_exps]
    expected = [abs(ti) for ti in problem.t]
    weights = [sum(Fraction(a, n) for a, n in zip(e, problem.nu))
               for e in total.terms if e not in diag_exps]
    return Elliptization(diagonal, expected, min(weights) if weights else None, len(weights))


# transport (nu1 = 2 only)

def laplace_beltrami(problem: EikonalProblem, f: Poly, top: int, jac_det=None, inv_det=None) -> Poly:
    """(Delta ell) o U in chart coordinates: (1/J) d_a (J Omega_ab d_b f)."""
    d = problem.nvars
    J = jac_det if jac_det is not None else jacobian_determinant(problem.chart, top + 1)
    invJ = inv_det if inv_det is not None else series_inverse(J, top + 1)
    omega = _omega_at(problem, top + 1)
    grad = f.gradient()
    acc = Poly(d, {}, zero=f._zero)
    for a in range(d):
        flux = Poly(d, {}, zero=f._zero)
        for b in range(d):
            if omega[a][b].is_zero() or grad[b].is_zero():
                continue
            flux = flux + omega[a][b].poly.mul(grad[b], top + 1)
        acc = acc + J.mul(flux, top + 1).diff(a)
    return invJ.mul(acc, top).truncate(top)


@dataclass
class TransportSolution:
    eikonal: EikonalSolution
    ells: list
    degrees: list
    residual_ok: list


def transport_residual(problem: EikonalProblem, ells: Sequence[Poly], k: int, top: int,
                       laplacian: Poly | None = None) -> Poly:
    """Coefficient of h^k in w for ell = sum_k h^k ell_k (nu1 = 2).

    ``laplacian`` is the precomputed chart Laplacian of ell_{k-1}.
    """
    fld = problem.field
    omega = _omega_at(problem, top)
    grad_v = [_lift(g, fld) for g in problem.normal_form.gradient()]
    grads = [e.gradient() for e in ells]
    out = _dot_omega(omega, grad_v, grads[k], top) * 2
    for a in range(k + 1):
        for b in range(k + 1 - a):
            c = k - a - b
            out = out + ells[a].mul(_dot_omega(omega, grads[b], grads[c], top), top)
    if k >= 1:
        lap = laplacian if laplacian is not None else laplace_beltrami(problem, ells[k - 1], top)
        out = out - lap
    return out.truncate(top)


def solve_transport(state: EikonalSolution, orders: int = 1) -> TransportSolution:
    """Solve the h^k equations for k = 1..orders, ell_k to degree N - 2k."""
    problem = state.problem
    if problem.nu[0] != 2:
        raise AssumptionError("nu1 = 2", "the transport hierarchy is only solved when the drop direction is quadratic")
    if state.obstruction is not None or state.solved_to < problem.residual_degree:
        raise ValueError("the eikonal equation must be solved to the truncation degree first")
    N = problem.N
    fld = problem.field
    n = fld.degree
    J = jacobian_determinant(problem.chart, N + 1)
    invJ = series_inverse(J, N + 1)
    ells = [state.ell.poly]
    degrees = [N]
    ok = [True]
    for k in range(1, orders + 1):
        top = N - 2 * k
        if top < 0:
            break
        lap = laplace_beltrami(problem, ells[k - 1], top, J, invJ)
        current = Poly(problem.nvars, {}, zero=fld.zero)
        for j in range(top + 1):
            comp = transport_residual(problem, ells + [current], k, j, lap.truncate(j)).homogeneous_part(j)
            if comp.is_zero():
                continue
            mat, cols, rows = l0_matrix(problem, j, restricted=False)
            piece = {}
            for comp_k in range(n):
                rhs = [-_components(comp.coefficient(e), n)[comp_k] for e in rows]
                x, _, _ = solve(mat, rhs)
                if x is None:
                    raise InvariantError("L0 invertible", f"transport order {k} unsolvable at degree {j}")
                g = fld.element([0] * comp_k + [1])
                for e, v in zip(cols, x):
                    if v:
                        piece[e] = piece.get(e, fld.zero) + g * v
            current = current + Poly(problem.nvars, piece, zero=fld.zero)
        ells.append(current)
        degrees.append(top)
        ok.append(transport_residual(problem, ells, k, top, lap).is_zero())
    return TransportSolution(state, [TruncatedPolynomial(e, d) for e, d in zip(ells, degrees)], degrees, ok)
