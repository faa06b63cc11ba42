"""Degenerate Laplace method: closed-form leading term and a quadrature oracle.

For a phase whose minimum x0 has the normal form sum t_i y_i^{nu_i} (t_i > 0,
nu_i even) after a change of variables U,

    int a(x) e^{-(phi(x) - phi(x0))/h} dx
        ~ a(x0) |det d0 U| h^{sum 1/nu_i} prod_i 2 Gamma(1/nu_i) / (nu_i t_i^{1/nu_i}).
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, InvariantError, ParseError
from .polynomial import Poly, parse_poly, parse_rational

NODE_BUDGET = 10 ** 6


@dataclass
class LaplaceProblem:
    dim: int
    phase: Poly
    x0: tuple
    nu: tuple
    t: tuple
    det_dU: Fraction = Fraction(1)
    amplitude: Poly | None = None
    vanishing: tuple | None = None      # declared a = O((x - x0)^{2 alpha})
    box: tuple | None = None
    h_values: tuple = ()

    def __post_init__(self):
        if self.amplitude is None:
            self.amplitude = Poly.constant(self.dim, Fraction(1))
        validate_problem(self)

    @property
    def phase_min(self):
        return self.phase(self.x0)

    def amplitude_at_min(self):
        return self.amplitude(self.x0)


def validate_problem(p: LaplaceProblem):
    d = p.dim
    for what, seq in (("x0", p.x0), ("nu", p.nu), ("t", p.t)):
        if len(seq) != d:
            raise InvariantError("dimension", f"{what} needs {d} entries")
    if any(n < 2 or n % 2 for n in p.nu):
        raise InvariantError("order", "every nu_i must be even and at least 2")
    if any(Fraction(ti) <= 0 for ti in p.t):
        raise InvariantError("positive-t", "every t_i must be positive at a minimum")
    if Fraction(p.det_dU) == 0:
        raise InvariantError("det", "d0 U must be invertible")
    grad = [g(p.x0) for g in p.phase.gradient()]
    if any(grad):
        raise InvariantError("critical", "phase gradient is nonzero at x0")
    if p.box is not None:
        if len(p.box) != d:
            raise InvariantError("box", f"box needs {d} intervals")
        for (lo, hi), c in zip(p.box, p.x0):
            if not lo < c < hi:
                raise InvariantError("interior", "x0 must be interior to the integration box")
    if p.vanishing is not None and len(p.vanishing) != d:
        raise InvariantError("vanishing", f"vanishing order needs {d} entries")


def gamma_factor(nu: Sequence[int], t: Sequence) -> float:
    """prod_i 2 Gamma(1/nu_i) / (nu_i t_i^{1/nu_i})."""
    out = 1.0
    for n, ti in zip(nu, t):
        out *= 2 * math.gamma(1.0 / n) / (n * float(ti) ** (1.0 / n))
    return out


def h_power(nu: Sequence[int]) -> Fraction:
    return sum((Fraction(1, n) for n in nu), Fraction(0))


def correction_exponent(nu: Sequence[int]) -> Fraction:
    return min(Fraction(2, n) for n in nu)


def laplace_leading(p: LaplaceProblem, h: float) -> float:
    """Leading term of the integral of a e^{-(phi - phi(x0))/h}."""
    a0 = float(p.amplitude_at_min())
    return a0 * abs(float(p.det_dU)) * h ** float(h_power(p.nu)) * gamma_factor(p.nu, p.t)


def vanishing_exponent(p: LaplaceProblem) -> Fraction:
    """Power of h in the bound for a = O((x - x0)^{2 alpha}): sum (2 alpha_i + 1)/nu_i."""
    if p.vanishing is None:
        raise InvariantError("vanishing", "no vanishing order declared")
    return sum((Fraction(2 * a + 1, n) for a, n in zip(p.vanishing, p.nu)), Fraction(0))


def float_evaluator(poly: Poly):
    """Fast scalar evaluation with float coefficients."""
    terms = [(float(c), e) for e, c in poly.terms.items()]

    def evaluate(*x):
        total = 0.0
        for c, e in terms:
            term = c
            for xi, k in zip(x, e):
                if k:
                    term *= xi ** k
            total += term
        return total

    return evaluate


@dataclass
class QuadratureResult:
    value: float
    abs_error: float
    evaluations: int
    boundary_gap: float
    tail_bound: float
    notes: list = field(default_factory=list)

    @property
    def rel_error(self):
        return self.abs_error / abs(self.value) if self.value else math.inf


def boundary_gap(p: LaplaceProblem, samples: int = 201) -> float:
    """min of phi - phi(x0) over the faces of the box (sampled)."""
    bounds = [(float(lo), float(hi)) for lo, hi in p.box]
    phi0 = float(p.phase_min)
    gap = math.inf
    for axis in range(p.dim):
        for side in (0, 1):
            axes = [np.linspace(lo, hi, samples) for lo, hi in bounds]
            axes[axis] = np.array([bounds[axis][side]])
            mesh = np.meshgrid(*axes, indexing="ij")
            gap = min(gap, float(p.phase.evaluate_array(*mesh).min()) - phi0)
    return gap


def _break_points(center, width, lo, hi):
    pts = {center}
    for k in (1, 3, 10, 30):
        for sgn in (-1, 1):
            x = center + sgn * k * width
            if lo < x < hi:
                pts.add(x)
    return sorted(pts)


def laplace_quadrature(p: LaplaceProblem, h: float, tol: float = 1e-10,
                       budget: int = NODE_BUDGET) -> QuadratureResult:
    """Nested adaptive Gauss-Kronrod quadrature of a e^{-(phi - phi(x0))/h} over the box."""
    if p.box is None:
        raise InvariantError("box", "quadrature needs an integration box")
    if p.dim > 3:
        raise InvariantError("dimension", "quadrature supports d <= 3")
    phase = float_evaluator(p.phase)
    amp = float_evaluator(p.amplitude)
    phi0 = float(p.phase_min)
    count = [0]

    def integrand(*x):
        count[0] += 1
        if count[0] > budget:
            raise ConvergenceError(f"quadrature exceeded the node budget of {budget}")
        return amp(*x) * math.exp(-(phase(*x) - phi0) / h)

    bounds = [(float(lo), float(hi)) for lo, hi in p.box]
    widths = [(h / float(ti)) ** (1.0 / n) for ti, n in zip(p.t, p.nu)]
    centers = [float(c) for c in p.x0]
    # absolute floor per level: tol times the size of the partial integral
    # with unit amplitude, so that integrals that vanish by parity terminate
    axis_scale = [h ** (1.0 / n) * gamma_factor((n,), (ti,)) for n, ti in zip(p.nu, p.t)]
    floors = [tol * 1e-3 * math.prod(axis_scale[:i + 1]) for i in range(p.dim)]
    opts = [{"points": _break_points(c, w, lo, hi), "epsabs": floor, "epsrel": tol, "limit": 400}
            for c, w, (lo, hi), floor in zip(centers, widths, bounds, floors)]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.nquad(integrand, bounds, opts=opts)
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"quadrature did not reach tolerance: {exc}") from None
    gap = boundary_gap(p)
    tail = math.exp(-gap / h) if gap > 0 else math.inf
    return QuadratureResult(value, err, count[0], gap, tail)


@dataclass
class CorrectionFit:
    exponent: float
    K: float
    h: np.ndarray
    ratio: np.ndarray


def fit_correction(h_values: Sequence[float], ratios: Sequence[float]) -> CorrectionFit:
    """Fit |ratio - 1| = K h^p by least squares in log-log coordinates."""
    hs = np.asarray(h_values, dtype=float)
    dev = np.abs(np.asarray(ratios, dtype=float) - 1.0)
    if len(hs) < 2 or np.any(dev == 0):
        raise ConvergenceError("correction fit needs at least two nonzero deviations")
    slope, icpt = np.polyfit(np.log(hs), np.log(dev), 1)
    return CorrectionFit(float(slope), float(math.exp(icpt)), hs, np.asarray(ratios, dtype=float))


# problem files

_KEYS = ("dim", "phase", "at", "nu", "t", "det", "amplitude", "vanish", "box", "h")


def parse_problem(text: str) -> LaplaceProblem:
    """Line-based format:

        dim 1
        phase = x^4
        at 0
        nu 4
        t 1
        det 1                 (|det d0 U|, default 1)
        amplitude = 1 + x^2   (default 1)
        vanish 1              (optional, alpha_i per axis)
        box -3 3              (one line per axis)
        h 0.1 0.01            (optional list)
    """
    fields = {}
    boxes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"(\w+)\s*(=)?\s*(.*)$", line)
        key, rest = m.group(1), m.group(3)
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno, 1)
        if key == "box":
            vals = [parse_rational(v, lineno) for v in rest.split()]
            if len(vals) != 2 or vals[0] >= vals[1]:
                raise ParseError("box expects two increasing numbers", lineno)
            boxes.append(tuple(vals))
            continue
        if key in fields:
            raise ParseError(f"{key} given twice", lineno)
        fields[key] = (lineno, rest)
    for key in ("dim", "phase", "at", "nu", "t"):
        if key not in fields:
            raise ParseError(f"missing {key}")
    lineno, rest = fields["dim"]
    if not rest.strip().isdigit() or int(rest) < 1:
        raise ParseError("dim expects a positive integer", lineno)
    d = int(rest)
    aliases = {name: i for i, name in enumerate("xyz"[:d])} if d <= 3 else None

    def numbers(key):
        ln, txt = fields[key]
        return [parse_rational(v, ln) for v in txt.split()]

    phase = parse_poly(fields["phase"][1], d, fields["phase"][0], aliases)
    amplitude = parse_poly(fields["amplitude"][1], d, fields["amplitude"][0], aliases) if "amplitude" in fields else None
    nu = numbers("nu")
    if any(n.denominator != 1 for n in nu):
        raise ParseError("nu must be integers", fields["nu"][0])
    vanish = tuple(int(v) for v in numbers("vanish")) if "vanish" in fields else None
    det = numbers("det")[0] if "det" in fields else Fraction(1)
    hs = tuple(float(v) for v in numbers("h")) if "h" in fields else ()
    for key, vals in (("at", numbers("at")), ("nu", nu), ("t", numbers("t"))):
        if len(vals) != d:
            raise ParseError(f"{key} expects {d} entries", fields[key][0])
    if boxes and len(boxes) != d:
        raise ParseError(f"expected {d} box lines, found {len(boxes)}")
    return LaplaceProblem(d, phase, tuple(numbers("at")), tuple(int(n) for n in nu), tuple(numbers("t")),
                          det, amplitude, vanish, tuple(boxes) if boxes else None, hs)
