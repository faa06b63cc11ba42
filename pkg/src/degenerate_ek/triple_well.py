"""Interaction matrix of a three-well potential whose two saddles share a height.

Geometry: minima (m_low, m_mid, m_far) at one level and saddles s1, s2 at one
level, with s1 joining m_low and m_mid and s2 joining m_mid and m_far.  Both
saddles are homogeneous (one order nu^s in every direction) and s1 is the more
degenerate one.  The interaction matrix, divided by h^mu e^{-2S/h}, reads

    [[0, 0, 0], [0, alpha + h^beta m1, h^beta m2], [0, h^beta m2, h^beta m3]]

in an orthonormal basis (eta_low, eta_mid, eta_far), so the spectrum splits
into {0, alpha, m3 h^beta} up to relative O(h^beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .asymptotics import gamma_fn, k_index
from .errors import AssumptionError, InvariantError
from .potential import CriticalPoint, nu_stats

CLAUSE_EQUAL_K = "equal-k"
CLAUSE_HOMOGENEOUS = "homogeneous-saddles"
CLAUSE_ORDERS = "saddle-orders"
CLAUSE_DIMENSION = "dimension"
CLAUSE_RATIO = "order-ratio"
CLAUSE_GEOMETRY = "geometry"


def well_constant(p: CriticalPoint) -> float:
    """c0(x*) with c0^{-2} = 4 prod_i 2 Gamma(1/nu_i) / (nu_i (2|t_i|)^{1/nu_i})."""
    inv_sq = 4.0
    for n, t in zip(p.nu, p.t):
        inv_sq *= 2 * gamma_fn(1.0 / n) / (n * (2 * abs(float(t))) ** (1.0 / n))
    return inv_sq ** -0.5


def saddle_flux(s: CriticalPoint) -> float:
    """z1(s) = (nu_1 (2|t_1|)^{1/nu_1} / (2 Gamma(1/nu_1)))^2 c0(s)^{-2}, drop direction first."""
    s = s.drop_first()
    n1, t1 = s.nu[0], abs(float(s.t[0]))
    lead = (n1 * (2 * t1) ** (1.0 / n1) / (2 * gamma_fn(1.0 / n1))) ** 2
    return lead * well_constant(s) ** -2


def _homogeneous_order(s: CriticalPoint):
    return s.nu[0] if len(set(s.nu)) == 1 else None


@dataclass(frozen=True)
class TripleWellRoles:
    m_low: CriticalPoint
    m_mid: CriticalPoint
    m_far: CriticalPoint
    s1: CriticalPoint
    s2: CriticalPoint

    @property
    def minima(self):
        return (self.m_low, self.m_mid, self.m_far)


def assign_roles(edges) -> TripleWellRoles:
    """Roles from (saddle, minimum, minimum) edges: the middle well touches
    both saddles, s1 is the saddle of higher order."""
    edges = list(edges)
    if len(edges) != 2:
        raise AssumptionError(CLAUSE_GEOMETRY, f"expected two separating saddles, found {len(edges)}")
    (sa, a1, a2), (sb, b1, b2) = edges
    labels_a = {a1.label, a2.label}
    labels_b = {b1.label, b2.label}
    shared = labels_a & labels_b
    if len(labels_a) != 2 or len(labels_b) != 2 or len(shared) != 1 or len(labels_a | labels_b) != 3:
        raise AssumptionError(CLAUSE_GEOMETRY, "the two saddles must form a chain through three minima")
    order_a = _homogeneous_order(sa) or max(sa.nu)
    order_b = _homogeneous_order(sb) or max(sb.nu)
    if (order_b, -sb.label) > (order_a, -sa.label):
        (sa, a1, a2), (sb, b1, b2) = (sb, b1, b2), (sa, a1, a2)
        labels_a, labels_b = labels_b, labels_a
    mid_label = next(iter(shared))
    pool = {q.label: q for q in (a1, a2, b1, b2)}
    mid = pool[mid_label]
    low = pool[next(iter(labels_a - shared))]
    far = pool[next(iter(labels_b - shared))]
    return TripleWellRoles(low, mid, far, sa, sb)


def check_triple_assumptions(roles: TripleWellRoles, all_points: Sequence[CriticalPoint] | None = None):
    """Check the geometry and the three clauses; returns True for the split
    regime and False when both saddles have the same order (beta = 0)."""
    mins = roles.minima
    if len({q.value for q in mins}) != 1:
        raise AssumptionError(CLAUSE_GEOMETRY, "the three minima must share one critical value")
    if roles.s1.value != roles.s2.value:
        raise AssumptionError(CLAUSE_GEOMETRY, "the two saddles must share one critical value")
    if not all(q.is_minimum for q in mins) or not (roles.s1.is_saddle and roles.s2.is_saddle):
        raise AssumptionError(CLAUSE_GEOMETRY, "roles need three minima and two index-1 saddles")
    if len({k_index(q) for q in mins}) != 1:
        raise AssumptionError(CLAUSE_EQUAL_K, "k must take one value at the three minima")
    nu1, nu2 = _homogeneous_order(roles.s1), _homogeneous_order(roles.s2)
    if nu1 is None or nu2 is None:
        raise AssumptionError(CLAUSE_HOMOGENEOUS, "both saddles must have a single order in every direction")
    d = roles.s1.dim
    if d <= 2:
        raise AssumptionError(CLAUSE_DIMENSION, f"the split needs d > 2 (d = {d})")
    points = list(all_points) if all_points is not None else list(mins) + [roles.s1, roles.s2]
    nu_bar = nu_stats(points).nu_bar
    if nu1 != nu_bar:
        raise AssumptionError(CLAUSE_ORDERS, f"nu^s1 = {nu1} must equal the global nu_bar = {nu_bar}")
    if nu2 == nu1:
        return False
    if nu2 > nu1:
        raise AssumptionError(CLAUSE_ORDERS, "nu^s2 must be below nu^s1")
    if not Fraction(nu2, nu1) > 1 - Fraction(2, d):
        raise AssumptionError(CLAUSE_RATIO, f"nu^s2/nu^s1 = {Fraction(nu2, nu1)} must exceed 1 - 2/d = "
                                            f"{1 - Fraction(2, d)}")
    return True


@dataclass
class TripleWellResult:
    roles: TripleWellRoles
    split: bool
    c: tuple               # c(m_low), c(m_mid), c(m_far)
    z1: tuple              # z1(s1), z1(s2)
    gamma: float
    c_hat: tuple           # normalizations of eta_low, eta_mid, eta_far
    eta: np.ndarray        # columns eta_low, eta_mid, eta_far in the (m_low, m_mid, m_far) basis
    alpha: float
    M1: np.ndarray
    m3: float
    beta: Fraction
    mu: Fraction
    S: Fraction
    dim: int

    @property
    def saddle_exponents(self):
        """(d - 2)/nu^s for s1 and s2."""
        d = self.dim
        return Fraction(d - 2, self.roles.s1.nu[0]), Fraction(d - 2, self.roles.s2.nu[0])

    def weights(self, h: float):
        """Saddle weights after dividing by h^{(d-2)/nu^s1}: (z1(s1), z1(s2) h^beta)."""
        return self.z1[0], self.z1[1] * h ** float(self.beta)

    def interaction_matrix(self, h: float) -> np.ndarray:
        """The scaled matrix in the basis of the three wells:
        N[m, m'] = c(m) c(m') (-1)^{1 - delta} sum over shared saddles of the weights."""
        w1, w2 = self.weights(h)
        lap = np.array([[w1, -w1, 0.0], [-w1, w1 + w2, -w2], [0.0, -w2, w2]])
        c = np.asarray(self.c)
        return lap * np.outer(c, c)

    def eta_matrix(self, h: float) -> np.ndarray:
        """The same matrix written in the orthonormal eta basis."""
        return self.eta.T @ self.interaction_matrix(h) @ self.eta

    def symbolic_block(self, h: float) -> np.ndarray:
        """[[alpha, 0], [0, 0]] + h^beta M1."""
        eps = h ** float(self.beta)
        return np.array([[self.alpha, 0.0], [0.0, 0.0]]) + eps * self.M1

    def predicted_scaled(self, h: float):
        """{0, alpha, m3 h^beta}."""
        return np.array([0.0, self.alpha, self.m3 * h ** float(self.beta)])

    def predicted(self, h: float):
        """Leading eigenvalues {0, alpha, m3 h^beta} h^mu e^{-2S/h}."""
        return self.predicted_scaled(h) * h ** float(self.mu) * math.exp(-2 * float(self.S) / h)

    def dense_scaled(self, h: float):
        return np.linalg.eigvalsh(self.interaction_matrix(h))

    def lines(self):
        r = self.roles
        out = [
            f"m_low = {r.m_low.display_name}, m_mid = {r.m_mid.display_name}, m_far = {r.m_far.display_name}",
            f"s1 = {r.s1.display_name} (order {r.s1.nu[0]}), s2 = {r.s2.display_name} (order {r.s2.nu[0]})",
            f"S = {self.S}  mu = {self.mu}  beta = {self.beta}",
            f"alpha = {self.alpha!r}",
            f"M1 = [[{float(self.M1[0, 0])!r}, {float(self.M1[0, 1])!r}], [{float(self.M1[1, 0])!r}, {float(self.M1[1, 1])!r}]]",
            f"m3 = {self.m3!r}",
        ]
        if self.split:
            out.append(f"spectrum ~ {{0, alpha, m3 h^{self.beta}}} h^{self.mu} e^(-2S/h)")
        else:
            out.append("non-split regime: beta = 0, both saddles interact at the same scale")
        return out


def triple_well(roles: TripleWellRoles, all_points: Sequence[CriticalPoint] | None = None) -> TripleWellResult:
    split = check_triple_assumptions(roles, all_points)
    d = roles.s1.dim
    c_low, c_mid, c_far = (well_constant(q) for q in roles.minima)
    z_1, z_2 = saddle_flux(roles.s1), saddle_flux(roles.s2)
    gamma = c_far ** 2 / c_low ** 2 + c_far ** 2 / c_mid ** 2
    hat0 = (sum(1.0 / c ** 2 for c in (c_low, c_mid, c_far))) ** -0.5
    hat1 = (1.0 / c_mid ** 2 + 1.0 / c_low ** 2) ** -0.5
    hat2 = (1.0 / c_low ** 2 + 1.0 / c_mid ** 2 + gamma ** 2 / c_far ** 2) ** -0.5
    eta = np.array([
        [hat0 / c_low, hat1 / c_mid, hat2 / c_low],
        [hat0 / c_mid, -hat1 / c_low, hat2 / c_mid],
        [hat0 / c_far, 0.0, -hat2 * gamma / c_far],
    ])
    alpha = hat1 ** 2 * z_1 * (c_low / c_mid + c_mid / c_low) ** 2
    off = -hat1 * hat2 * (c_mid / c_low) * (1 + gamma)
    M1 = z_2 * np.array([[(hat1 * c_mid / c_low) ** 2, off], [off, hat2 ** 2 * (1 + gamma) ** 2]])
    m3 = float(M1[1, 1])
    nu1, nu2 = roles.s1.nu[0], roles.s2.nu[0]
    beta = (d - 2) * (Fraction(1, nu2) - Fraction(1, nu1))
    mu = 2 - 2 * k_index(roles.m_mid) + Fraction(d - 2, nu1)
    S = Fraction(roles.s1.value) - Fraction(roles.m_mid.value)
    return TripleWellResult(roles, split, (c_low, c_mid, c_far), (z_1, z_2), gamma,
                            (hat0, hat1, hat2), eta, alpha, M1, m3, beta, mu, S, d)


def triple_well_matrix(points: Sequence[CriticalPoint], edges) -> TripleWellResult:
    """Roles, clause checks and the interaction data for declared points and edges."""
    return triple_well(assign_roles(edges), points)


@dataclass
class BetaFit:
    beta: float
    log_m3: float
    correction: float
    h: np.ndarray
    smallest: np.ndarray


def fit_beta(result: TripleWellResult, h_values: Sequence[float]) -> BetaFit:
    """Fit ln lambda_3 = ln m3 + beta ln h + ln(1 + K h^beta) to the smallest
    nonzero dense eigenvalue of the scaled matrix."""
    hs = np.asarray(sorted(h_values), dtype=float)
    if len(hs) < 4:
        raise ValueError("the fit needs at least four values of h")
    if not result.split:
        raise InvariantError("split", "beta is zero in the non-split regime; nothing to fit")
    small = np.array([result.dense_scaled(h)[1] for h in hs])
    if np.any(small <= 0):
        raise InvariantError("positive", "dense eigenvalue is not positive")

    def model(x, a, b, k):
        return a + b * x + np.log1p(k * np.exp(b * x))

    x, y = np.log(hs), np.log(small)
    slope, icpt = np.polyfit(x, y, 1)
    params, _ = curve_fit(model, x, y, p0=(icpt, slope, 0.0), maxfev=20000)
    return BetaFit(float(params[1]), float(params[0]), float(params[2]), hs, small)


def symmetric_example(d: int = 3, order_s1: int = 4, order_s2: int = 2, t_min=1, t_saddle=1) -> TripleWellRoles:
    """Three Morse wells on a line with homogeneous saddles and equal well constants."""
    def point(x, value, nu, t, name, label):
        return CriticalPoint(tuple(Fraction(v) for v in x), Fraction(value), tuple(nu), tuple(Fraction(v) for v in t),
                  None, name, label)

    zero = [0] * (d - 1)
    mins = [point([2 * i - 2] + zero, 0, [2] * d, [t_min] * d, f"m{i}", i) for i in range(3)]
    s1 = point([-1] + zero, 1, [order_s1] * d, [-t_saddle] + [t_saddle] * (d - 1), "s1", 3)
    s2 = point([1] + zero, 1, [order_s2] * d, [-t_saddle] + [t_saddle] * (d - 1), "s2", 4)
    return assign_roles([(s1, mins[0], mins[1]), (s2, mins[1], mins[2])])
