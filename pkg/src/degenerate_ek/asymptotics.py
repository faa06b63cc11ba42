"""Closed-form exponents and prefactors of the low-lying eigenvalues.

Exponents are exact ``Fraction`` values (``math.inf`` stands for +infinity);
prefactors are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import AssumptionError, InvariantError
from .potential import INF, CriticalPoint, nu_stats

J_INF_UNITARY_LINEAR = "J_INF_UNITARY_LINEAR"
J_INF_NU1_EQ_2 = "J_INF_NU1_EQ_2"
J_INF_DIM1 = "J_INF_DIM1"
J1_CASE3 = "J1_CASE3"
J1_CASE5 = "J1_CASE5"
J2 = "J2"
J_INF_CLASSES = (J_INF_UNITARY_LINEAR, J_INF_NU1_EQ_2, J_INF_DIM1)

CRITERION_UNITARY_LINEAR = "unitary-linear U"
CRITERION_NU1_EQ_2 = "nu1 = 2"
CRITERION_DIM1 = "d = 1"
CRITERION_NU_STAR = "nu_under_star > nu_bar/2"
CRITERION_DIM2 = "d = 2"
CRITERION_UNIQUE_LOWER = "unique-lower-order"
CRITERION_TWO_DEGREES = "two-degrees-with-2"
CRITERION_HOMOGENEOUS = "homogeneous"
CRITERION_DIRECT = "direct gamma computation"


def ext_min(values):
    values = list(values)
    return min(values) if values else INF


def k_index(cp: CriticalPoint) -> Fraction:
    """Degeneracy weight sum_i 1/(2 nu_i)."""
    return sum((Fraction(1, 2 * n) for n in cp.nu), Fraction(0))


def _require_saddle(s: CriticalPoint):
    if not s.is_saddle:
        raise InvariantError("index-1", "expected an index-1 point of even orders", s.display_name)
    return s.drop_first()


def inner_min(nu_hat, nu_under, nu_bar_s):
    """min(-2/nu_hat, 2(nu_hat - nu_under)/nu_bar_s - 2/nu_under) and which branch won.

    Returns (value, hat_branch) where ``hat_branch`` is True when the
    -2/nu_hat entry is the minimum.
    """
    first = Fraction(-2, nu_hat)
    second = Fraction(2 * (nu_hat - nu_under), nu_bar_s) - Fraction(2, nu_under)
    return (first, True) if first <= second else (second, False)


@dataclass(frozen=True)
class SaddleClass:
    kind: str
    gamma: object
    saddle: CriticalPoint

    @property
    def is_j_inf(self):
        return self.kind in J_INF_CLASSES


def _is_case3(nu):
    return nu[0] > min(nu) == 2


def _is_case5(nu):
    low = min(nu)
    return nu.count(low) == 1 and nu.index(low) != 0 and nu[0] == max(nu)


def classify_saddle(s: CriticalPoint, global_nu_bar: int) -> SaddleClass:
    """Most favorable class for a saddle and its admissibility exponent gamma."""
    s = _require_saddle(s)
    nu = list(s.nu)
    if s.dim == 1:
        return SaddleClass(J_INF_DIM1, INF, s)
    if s.is_linear_map():
        return SaddleClass(J_INF_UNITARY_LINEAR, INF, s)
    if nu[0] == 2:
        return SaddleClass(J_INF_NU1_EQ_2, INF, s)
    stats = nu_stats([s])
    if _is_case3(nu) or _is_case5(nu):
        kind = J1_CASE3 if _is_case3(nu) else J1_CASE5
        if stats.nu_hat == INF:
            raise AssumptionError("nu_hat", "gamma undefined for nu_hat = +inf")
        inner, _ = inner_min(stats.nu_hat, stats.nu_under, stats.nu_bar)
        gamma = (max(Fraction(-2, stats.nu_under_star), inner)
                 + Fraction(2, stats.nu_bar) + Fraction(2, global_nu_bar))
        return SaddleClass(kind, gamma, s)
    gamma = Fraction(2, stats.nu_bar) - Fraction(2, stats.nu_under_star) + Fraction(2, global_nu_bar)
    return SaddleClass(J2, gamma, s)


def admissibility_criteria(s: CriticalPoint, global_nu_bar: int) -> list[str]:
    """Every sufficient criterion for gamma > 0 that the saddle satisfies, in the
    fixed order: unitary-linear U, nu1 = 2, d = 1, nu_under_star > nu_bar/2,
    d = 2, unique-lower-order, two-degrees-with-2, homogeneous."""
    s = _require_saddle(s)
    nu = list(s.nu)
    stats = nu_stats([s])
    out = []
    if s.is_linear_map():
        out.append(CRITERION_UNITARY_LINEAR)
    if nu[0] == 2:
        out.append(CRITERION_NU1_EQ_2)
    if s.dim == 1:
        out.append(CRITERION_DIM1)
    if stats.nu_under_star > Fraction(global_nu_bar, 2):
        out.append(CRITERION_NU_STAR)
    if s.dim == 2:
        out.append(CRITERION_DIM2)
    low, high = min(nu), max(nu)
    if low != high and set(nu) <= {low, high} and nu.count(low) == 1:
        out.append(CRITERION_UNIQUE_LOWER)
    if len(set(nu)) == 2 and 2 in nu:
        out.append(CRITERION_TWO_DEGREES)
    if low == high:
        out.append(CRITERION_HOMOGENEOUS)
    return out


def saddle_weight(s: CriticalPoint) -> Fraction:
    """2k(s) - 2/nu_1 with the drop direction first."""
    s = _require_saddle(s)
    return 2 * k_index(s) - Fraction(2, s.nu[0])


def mu_exponent(m: CriticalPoint, j_m: Sequence[CriticalPoint]):
    """Prefactor exponent and the saddles that attain it."""
    if not j_m:
        raise ValueError("j(m) must be nonempty")
    weights = [(saddle_weight(s), s) for s in j_m]
    best = min(w for w, _ in weights)
    tilde_j = tuple(s for w, s in weights if w == best)
    return 2 + best - 2 * k_index(m), tilde_j


def gamma_fn(x):
    return math.gamma(x)


def z_prefactor(m: CriticalPoint, s: CriticalPoint) -> float:
    """Coefficient z(m, s) of the transition through s out of the well of m."""
    if not m.is_minimum or any(ti <= 0 for ti in m.t):
        raise InvariantError("minimum", "z(m, s) needs a minimum with all t_i > 0", m.display_name)
    s = _require_saddle(s)
    if m.dim != s.dim:
        raise ValueError("dimension mismatch")
    n1 = s.nu[0]
    lead = (n1 * (2 * abs(float(s.t[0]))) ** (1.0 / n1) / (2 * gamma_fn(1.0 / n1))) ** 2
    prod = 1.0
    for nm, tm, ns, ts in zip(m.nu, m.t, s.nu, s.t):
        prod *= gamma_fn(1.0 / ns) / gamma_fn(1.0 / nm)
        prod *= (nm * (2 * float(tm)) ** (1.0 / nm)) / (ns * (2 * abs(float(ts))) ** (1.0 / ns))
    return lead * prod


def morse_z(t_min: Sequence[float], t_saddle: Sequence[float]) -> float:
    """Classical Morse prefactor (|lambda^-|/pi) sqrt(det Hess_m/|det Hess_s|),
    with Hessians diag(2 t_i) and the negative direction first."""
    hess_m = [2.0 * t for t in t_min]
    hess_s = [2.0 * t for t in t_saddle]
    neg = abs(hess_s[0])
    return neg / math.pi * math.sqrt(math.prod(hess_m) / abs(math.prod(hess_s)))


def equal_order_z(m: CriticalPoint, s: CriticalPoint) -> float:
    """z(m, s) when m and s share all orders: product of (t_m/|t_s|)^{1/nu}."""
    s = _require_saddle(s)
    n1 = s.nu[0]
    lead = (n1 * (2 * abs(float(s.t[0]))) ** (1.0 / n1) / (2 * gamma_fn(1.0 / n1))) ** 2
    prod = 1.0
    for nm, tm, ts in zip(m.nu, m.t, s.t):
        prod *= (float(tm) / abs(float(ts))) ** (1.0 / nm)
    return lead * prod


@dataclass
class MinimumLaw:
    minimum: CriticalPoint
    S: object
    mu: Fraction | None = None
    v: float = 0.0
    beta: object = None
    tilde_j: tuple = ()
    alpha: object = INF
    j: tuple = ()
    classes: tuple = ()
    is_underline: bool = False

    def eigenvalue(self, h: float) -> float:
        return eyring_kramers(self, h)


@dataclass
class AsymptoticLaw:
    entries: list
    alpha0: object
    gap_exponent: Fraction
    nu_bar: int
    certification: dict = field(default_factory=dict)

    def entry(self, m):
        for e in self.entries:
            if e.minimum.location == m.location:
                return e
        raise KeyError(m.display_name)

    def finite(self):
        return [e for e in self.entries if not e.is_underline]


def beta_exponent(m: CriticalPoint, j_m: Sequence[CriticalPoint]):
    """Error exponent min(2/nu_bar^{j(m)}, beta', 2/nu_bar^m)."""
    weights = [(saddle_weight(s), s) for s in j_m]
    best = min(w for w, _ in weights)
    gaps = [w - best for w, _ in weights if w != best]
    beta_prime = ext_min(gaps)
    nu_bar_j = max(max(s.nu) for s in j_m)
    return min(Fraction(2, nu_bar_j), beta_prime, Fraction(2, max(m.nu)))


def law_for_minimum(m: CriticalPoint, labeling, all_points: Sequence[CriticalPoint]) -> MinimumLaw:
    entry = labeling.entry(m)
    if entry.is_underline:
        return MinimumLaw(m, INF, is_underline=True, j=tuple(entry.j))
    j_m = tuple(entry.j)
    global_bar = nu_stats(all_points).nu_bar
    mu, tilde_j = mu_exponent(m, j_m)
    v = sum(z_prefactor(m, s) for s in tilde_j)
    classes = tuple(classify_saddle(s, global_bar) for s in j_m)
    alpha = ext_min(c.gamma for c in classes)
    return MinimumLaw(m, entry.S, mu, v, beta_exponent(m, j_m), tilde_j, alpha, j_m, classes)


def asymptotic_law(labeling, all_points: Sequence[CriticalPoint]) -> AsymptoticLaw:
    points = list(all_points)
    bar = nu_stats(points).nu_bar
    entries = [law_for_minimum(e.minimum, labeling, points) for e in labeling.entries]
    alpha0 = alpha_zero(entries)
    cert = {}
    for e in entries:
        for s in e.j:
            if s.display_name not in cert:
                crit = admissibility_criteria(s, bar)
                cert[s.display_name] = crit if crit else [CRITERION_DIRECT]
    return AsymptoticLaw(entries, alpha0, 2 - Fraction(2, bar), bar, cert)


def alpha_zero(entries) -> object:
    return ext_min(e.alpha for e in entries if not e.is_underline)


def check_assumption_alpha(law: AsymptoticLaw):
    """(ok, certification) where certification maps saddle -> criteria list."""
    return law.alpha0 > 0, law.certification


def eyring_kramers(law: MinimumLaw, h: float) -> float:
    if law.is_underline:
        return 0.0
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    return law.v * h ** float(law.mu) * math.exp(-2 * float(law.S) / h)


def eyring_kramers_values(v, mu, S, h):
    return v * h ** float(mu) * math.exp(-2 * float(S) / h)


def normalizing_constant_leading(nu1: int, h: float) -> float:
    """Leading term of the inverse normalizing constant C^{-1} at a saddle."""
    if nu1 < 2 or nu1 % 2:
        raise ValueError("nu1 must be even and at least 2")
    return nu1 * (nu1 * h) ** (-1.0 / nu1) / gamma_fn(1.0 / nu1)


def format_ext(q) -> str:
    if q == INF:
        return "inf"
    if isinstance(q, Fraction):
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    return repr(q)
