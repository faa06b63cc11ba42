"""Potentials with declared degenerate critical points.

A potential file is line oriented (``;`` also separates directives, ``#``
starts a comment)::

    dim 1
    box -2 2
    V = 1/8*x1^8 - 1/4*x1^4
    cp at 0 value 0 nu 4 t -1/4
    cp at 1 value -1/8 nu 2 t 2

``cp`` may carry an optional name (``cp s1 at ...``) and a trailing change of
variables ``U = <expr>, <expr>, ...`` written in absolute coordinates.
Variables are ``x1..xd``; in dimension at most three ``x, y, z`` are
accepted as aliases.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import InvariantError, ParseError, ResolutionError
from .polynomial import Poly, format_fraction, parse_poly, parse_rational

INF = math.inf
EVEN = "EVEN"
ODD = "ODD"
NUMERIC_MAX_DIM = 3


def _aliases(d):
    return {name: i for i, name in enumerate("xyz"[:d])} if d <= 3 else {}


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    value: Fraction
    nu: tuple
    t: tuple
    U: tuple | None = None  # absolute coordinates; None means identity
    name: str = ""
    label: int = 0

    @property
    def dim(self):
        return len(self.location)

    @property
    def parity(self):
        return EVEN if all(n % 2 == 0 for n in self.nu) else ODD

    @property
    def index(self):
        if self.parity != EVEN:
            return None
        return sum(1 for ti in self.t if ti < 0)

    @property
    def is_minimum(self):
        return self.parity == EVEN and self.index == 0

    @property
    def is_saddle(self):
        return self.parity == EVEN and self.index == 1

    @property
    def is_morse(self):
        return all(n == 2 for n in self.nu)

    @property
    def display_name(self):
        return self.name or f"cp{self.label}"

    def location_float(self):
        return np.array([float(c) for c in self.location])

    def absolute_map(self) -> tuple:
        if self.U is not None:
            return self.U
        return tuple(Poly.variable(self.dim, i) for i in range(self.dim))

    @cached_property
    def local_map(self) -> tuple:
        """The chart y -> U(x* + y) - x*, which fixes the origin."""
        if self.U is None:
            return tuple(Poly.variable(self.dim, i) for i in range(self.dim))
        return tuple(u.shift(self.location) - c for u, c in zip(self.U, self.location))

    def linear_part(self):
        """Rows of d_{x*}U as Fractions."""
        out = []
        for comp in self.local_map:
            row = []
            for j in range(self.dim):
                e = [0] * self.dim
                e[j] = 1
                row.append(Fraction(comp.coefficient(tuple(e))))
            out.append(row)
        return out

    def is_linear_map(self):
        return all(comp.degree() <= 1 for comp in self.local_map)

    def normal_form(self) -> Poly:
        """Sum of t_i y_i^{nu_i} in local coordinates."""
        d = self.dim
        terms = {}
        for i, (n, ti) in enumerate(zip(self.nu, self.t)):
            e = [0] * d
            e[i] = n
            terms[tuple(e)] = Fraction(ti)
        return Poly(d, terms)

    def permuted(self, order: Sequence[int]) -> "CriticalPoint":
        """Relabel the normal-form directions: new direction k is old ``order[k]``.

        The change of variables is precomposed with the coordinate permutation
        so the normal-form identity is preserved.
        """
        d = self.dim
        order = list(order)
        if sorted(order) != list(range(d)):
            raise ValueError(f"{order} is not a permutation")
        if order == list(range(d)):
            return self
        # old coordinate y_i equals new coordinate z_k where order[k] = i
        inverse = [0] * d
        for k, i in enumerate(order):
            inverse[i] = k
        z_of = [Poly.constant(d, self.location[i]) + Poly.variable(d, inverse[i]) - Poly.constant(d, self.location[inverse[i]])
                for i in range(d)]
        # z_of[i] maps absolute new coordinates to absolute old coordinate i
        base = self.absolute_map()
        new_u = tuple(u.compose(z_of) for u in base)
        return CriticalPoint(self.location, self.value, tuple(self.nu[i] for i in order),
                             tuple(self.t[i] for i in order), new_u, self.name, self.label)

    def drop_first(self) -> "CriticalPoint":
        """For an index-1 point, move the negative direction to position 0."""
        if not self.is_saddle:
            raise InvariantError("index-1", "drop direction only defined for index-1 EVEN points",
                                 self.display_name)
        drop = next(i for i, ti in enumerate(self.t) if ti < 0)
        order = [drop] + [i for i in range(self.dim) if i != drop]
        return self.permuted(order)

    def describe(self):
        loc = ", ".join(format_fraction(c) for c in self.location)
        return (f"{self.display_name} at ({loc}) value {format_fraction(self.value)} "
                f"nu {list(self.nu)} t {[format_fraction(x) for x in self.t]}")


@dataclass(frozen=True)
class NuStats:
    nu_bar: float
    nu_under: float
    nu_under_star: float
    nu_hat: float


@dataclass
class PotentialSpec:
    dim: int
    V: Poly
    box: tuple | None = None
    critical_points: tuple = ()
    source: str = ""

    @cached_property
    def gradient(self):
        return self.V.gradient()

    @cached_property
    def grad_sq(self):
        total = Poly(self.dim)
        for g in self.gradient:
            total = total + g * g
        return total

    @cached_property
    def laplacian(self):
        total = Poly(self.dim)
        for i, g in enumerate(self.gradient):
            total = total + g.diff(i)
        return total

    def minima(self):
        return [p for p in self.critical_points if p.is_minimum]

    def saddles(self):
        return [p for p in self.critical_points if p.is_saddle]

    def point(self, key):
        """Look up a critical point by 0-based index or by name."""
        if isinstance(key, int) or (isinstance(key, str) and key.isdigit()):
            if 0 <= int(key) < len(self.critical_points):
                return self.critical_points[int(key)]
        else:
            for p in self.critical_points:
                if p.name == key:
                    return p
        raise InvariantError("critical-point", f"no critical point {key!r}")

    def evaluate(self, *coords):
        return self.V.evaluate_array(*coords)

    def box_float(self):
        if self.box is None:
            raise InvariantError("box", "no confinement box declared")
        return [(float(lo), float(hi)) for lo, hi in self.box]

    def with_points(self, points):
        return PotentialSpec(self.dim, self.V, self.box, tuple(points), self.source)


# parsing

_CP = re.compile(
    r"^cp(?:\s+(?P<name>(?!at\b)[A-Za-z_]\w*))?\s+at\s+(?P<at>.+?)\s+value\s+(?P<value>\S+)"
    r"\s+nu\s+(?P<nu>.+?)\s+t\s+(?P<t>.+?)(?:\s+U\s*=\s*(?P<U>.+?))?\s*$")


def _directives(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for part in line.split(";"):
            part = part.strip()
            if part and part not in ("…", "..."):
                yield lineno, part


def _numbers(chunk, lineno):
    items = [x for x in re.split(r"[\s,()]+", chunk) if x]
    return [parse_rational(x, lineno) for x in items]


def parse_spec(text: str, validate: bool = True) -> PotentialSpec:
    """Parse a potential document and (by default) check every invariant."""
    dim = None
    V = None
    boxes = []
    raw_points = []
    for lineno, part in _directives(text):
        head = part.split(None, 1)[0]
        if head == "dim":
            m = re.fullmatch(r"dim\s+(\d+)", part)
            if not m or int(m.group(1)) < 1:
                raise ParseError("dim expects a positive integer", lineno)
            if dim is not None:
                raise ParseError("dim declared twice", lineno)
            dim = int(m.group(1))
        elif head == "box":
            vals = _numbers(part[3:], lineno)
            if len(vals) != 2:
                raise ParseError("box expects two numbers", lineno)
            if vals[0] >= vals[1]:
                raise ParseError("box lower bound must be below upper bound", lineno)
            boxes.append(tuple(vals))
        elif re.match(r"V\s*=", part):
            if dim is None:
                raise ParseError("dim must precede V", lineno)
            V = parse_poly(part.split("=", 1)[1], dim, lineno, _aliases(dim))
        elif head == "cp":
            if dim is None:
                raise ParseError("dim must precede cp", lineno)
            m = _CP.match(part)
            if not m:
                raise ParseError("cp expects: cp [name] at <coords> value <q> nu <orders> t <coefficients> [U = ...]",
                                 lineno)
            raw_points.append((lineno, m))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, 1)
    if dim is None:
        raise ParseError("missing dim directive")
    if V is None:
        raise ParseError("missing V directive")
    if boxes and len(boxes) != dim:
        raise ParseError(f"expected {dim} box lines, found {len(boxes)}")
    points = []
    for label, (lineno, m) in enumerate(raw_points):
        loc = _numbers(m.group("at"), lineno)
        nu_vals = _numbers(m.group("nu"), lineno)
        t_vals = _numbers(m.group("t"), lineno)
        for what, vals in (("coordinates", loc), ("nu", nu_vals), ("t", t_vals)):
            if len(vals) != dim:
                raise ParseError(f"cp {what}: expected {dim} entries, found {len(vals)}", lineno)
        if any(n.denominator != 1 for n in nu_vals):
            raise ParseError("orders nu must be integers", lineno)
        U = None
        if m.group("U"):
            exprs = m.group("U").split(",")
            if len(exprs) != dim:
                raise ParseError(f"U needs {dim} comma-separated expressions", lineno)
            U = tuple(parse_poly(e, dim, lineno, _aliases(dim)) for e in exprs)
        points.append(CriticalPoint(tuple(loc), parse_rational(m.group("value"), lineno),
                                    tuple(int(n) for n in nu_vals), tuple(t_vals), U,
                                    m.group("name") or "", label))
    spec = PotentialSpec(dim, V, tuple(boxes) if boxes else None, tuple(points), text)
    if validate:
        validate_spec(spec)
    return spec


def format_spec(spec: PotentialSpec) -> str:
    names = [f"x{i + 1}" for i in range(spec.dim)]
    from .polynomial import format_poly

    lines = [f"dim {spec.dim}"]
    for lo, hi in spec.box or ():
        lines.append(f"box {format_fraction(lo)} {format_fraction(hi)}")
    lines.append(f"V = {format_poly(spec.V, names)}")
    for p in spec.critical_points:
        line = "cp " + (p.name + " " if p.name else "")
        line += "at " + " ".join(format_fraction(c) for c in p.location)
        line += f" value {format_fraction(p.value)} nu " + " ".join(str(n) for n in p.nu)
        line += " t " + " ".join(format_fraction(x) for x in p.t)
        if p.U is not None:
            line += " U = " + ", ".join(format_poly(u, names) for u in p.U)
        lines.append(line)
    return "\n".join(lines) + "\n"


# validation

def check_point(spec: PotentialSpec, p: CriticalPoint):
    name = p.display_name
    if any(n < 2 for n in p.nu):
        raise InvariantError("order", "order below 2", name)
    if any(ti == 0 for ti in p.t):
        raise InvariantError("coefficient", "normal-form coefficient t_i is zero", name)
    grad = [g(p.location) for g in spec.gradient]
    if any(grad):
        raise InvariantError("gradient", f"gradient nonzero at declared critical point: {[format_fraction(g) for g in grad]}",
                             name)
    actual = spec.V(p.location)
    if actual != p.value:
        raise InvariantError("value", f"declared value {format_fraction(p.value)} but V = {format_fraction(actual)}",
                             name)
    if p.U is not None:
        fixed = [u(p.location) for u in p.U]
        if tuple(fixed) != tuple(p.location):
            raise InvariantError("U-fixes-point", "U(x*) differs from x*", name)
    D = p.linear_part()
    d = p.dim
    for i in range(d):
        for j in range(d):
            s = sum(D[k][i] * D[k][j] for k in range(d))
            if s != (1 if i == j else 0):
                raise InvariantError("unitary", "d U at the critical point is not unitary", name)
    residual = normal_form_residual(spec, p)
    if not residual.is_zero():
        raise InvariantError("normal-form", f"V o U - V(x*) - sum t_i y_i^nu_i has terms up to degree "
                                            f"{max(p.nu)}: {residual}", name)


def normal_form_residual(spec: PotentialSpec, p: CriticalPoint) -> Poly:
    top = max(p.nu)
    local_v = spec.V.shift(p.location) - p.value
    composed = local_v.compose(list(p.local_map), max_degree=top)
    return (composed - p.normal_form()).truncate(top)


def validate_spec(spec: PotentialSpec):
    seen = set()
    for p in spec.critical_points:
        if len(p.location) != spec.dim:
            raise InvariantError("dimension", "location has wrong dimension", p.display_name)
        if p.location in seen:
            raise InvariantError("distinct", "duplicate critical point location", p.display_name)
        seen.add(p.location)
        check_point(spec, p)
        if spec.box is not None:
            for c, (lo, hi) in zip(p.location, spec.box):
                if not lo < c < hi:
                    raise InvariantError("box", "critical point outside the confinement box", p.display_name)
    names = [p.name for p in spec.critical_points if p.name]
    if len(names) != len(set(names)):
        raise InvariantError("distinct", "duplicate critical point names")
    return spec


def require_numerics(spec: PotentialSpec):
    if spec.dim > NUMERIC_MAX_DIM:
        raise InvariantError("dimension", f"numerics support d <= {NUMERIC_MAX_DIM}, got d = {spec.dim}")
    if spec.box is None:
        raise InvariantError("box", "numerics need a confinement box")


# statistics of the orders

def _ext_min(values):
    values = list(values)
    return min(values) if values else INF


def nu_stats(points: Sequence[CriticalPoint]) -> NuStats:
    """Order statistics of a set of critical points (inf over empty = +inf)."""
    points = list(points)
    if not points:
        raise ValueError("nu_stats needs a nonempty set of critical points")
    bar = max(max(p.nu) for p in points)
    under = max(min(p.nu) for p in points)
    under_star = max(_ext_min(n for n, ti in zip(p.nu, p.t) if ti > 0) for p in points)
    hat = max(_ext_min(n for n in p.nu if n > min(p.nu)) for p in points)
    return NuStats(bar, under, under_star, hat)


# confinement

@dataclass
class ConfinementReport:
    C: float
    C0: float
    min_grad: float
    max_lap_ratio: float
    slope: float
    intercept: float
    samples: int

    def lines(self):
        return [f"C: {self.C!r}", f"C0: {self.C0!r}", f"min_grad: {self.min_grad!r}",
                f"max_laplacian_ratio: {self.max_lap_ratio!r}", f"minorant_slope: {self.slope!r}",
                f"minorant_intercept: {self.intercept!r}", f"samples: {self.samples}"]


def _lattice(bounds, per_axis):
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    return [m.ravel() for m in mesh], [a[1] - a[0] for a in axes]


def check_confinement(spec: PotentialSpec, margin: float, enlarge: float = 1.0,
                      per_axis: int | None = None) -> ConfinementReport:
    """Sample the shell {x in box : dist(x, critical points) >= margin}.

    ``enlarge`` scales the box about its center.  The sampled constant is
    C = max(1/min|grad V|, max |Lap V|/|grad V|^2) and C0 = 1/(2 C^2).
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    bounds = spec.box_float()
    for p in spec.critical_points:
        for c, (lo, hi) in zip(p.location_float(), bounds):
            if not (lo + margin <= c <= hi - margin):
                raise InvariantError("box", "box must contain each critical point with the given margin",
                                     p.display_name)
    centers = [(lo + hi) / 2 for lo, hi in bounds]
    bounds = [(c - enlarge * (c - lo), c + enlarge * (hi - c)) for c, (lo, hi) in zip(centers, bounds)]
    if per_axis is None:
        per_axis = {1: 20001, 2: 401, 3: 61}.get(spec.dim, 21)
    coords, spacing = _lattice(bounds, per_axis)
    keep = np.ones(coords[0].shape, dtype=bool)
    for p in spec.critical_points:
        dist2 = sum((c - x) ** 2 for c, x in zip(coords, p.location_float()))
        keep &= dist2 >= margin ** 2 * (1 - 1e-12)
    coords = [c[keep] for c in coords]
    if coords[0].size == 0:
        raise InvariantError("confinement", "the sampled shell is empty")
    grad = np.stack([g.evaluate_array(*coords) for g in spec.gradient])
    gnorm = np.sqrt((grad ** 2).sum(axis=0))
    hess = np.stack([spec.gradient[i].diff(j).evaluate_array(*coords)
                     for i in range(spec.dim) for j in range(spec.dim)])
    hnorm = np.sqrt((hess ** 2).sum(axis=0))
    cell = math.sqrt(sum(s * s for s in spacing))
    suspicious = gnorm <= hnorm * cell
    if np.any(suspicious):
        where = [float(c[suspicious][np.argmin(gnorm[suspicious])]) for c in coords]
        raise InvariantError("confinement", f"gradient vanishes (to sampling accuracy) near {where}")
    lap = spec.laplacian.evaluate_array(*coords)
    min_grad = float(gnorm.min())
    ratio = float((np.abs(lap) / gnorm ** 2).max())
    C = max(1.0 / min_grad, ratio)
    radius = np.sqrt(sum(c ** 2 for c in coords))
    values = spec.V.evaluate_array(*coords)
    intercept = float((values - radius / C).min())
    return ConfinementReport(C, 1.0 / (2 * C * C), min_grad, ratio, 1.0 / C, intercept, int(coords[0].size))


# local sublevel topology near a critical point

def _count_components(spec, p, r, n):
    d = spec.dim
    axes = [np.linspace(-r, r, n)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    local = spec.V.shift(p.location) - p.value
    vals = local.evaluate_array(*mesh)
    inside = sum(m ** 2 for m in mesh) <= r * r
    mask = (vals < 0) & inside
    structure = ndimage.generate_binary_structure(d, 1)
    _, count = ndimage.label(mask, structure=structure)
    return count


def local_component_count(spec: PotentialSpec, p: CriticalPoint, r: float, n: int = 256) -> int:
    """Components of B(x*, r) intersect {V < V(x*)} on an n^d grid.

    The count is accepted only when it agrees at n and 2n points per axis.
    """
    if spec.dim > NUMERIC_MAX_DIM:
        raise InvariantError("dimension", "grid counts need d <= 3")
    loc = p.location_float()
    for q in spec.critical_points:
        if q is not p and np.linalg.norm(q.location_float() - loc) <= r:
            raise InvariantError("radius", f"another critical point {q.display_name} lies in the ball", p.display_name)
    if spec.box is not None:
        for c, (lo, hi) in zip(loc, spec.box_float()):
            if c - r < lo or c + r > hi:
                raise InvariantError("radius", "ball leaves the box", p.display_name)
    # odd node counts put a node on the critical point itself, where V = V(x*)
    # is excluded, so lobes cannot touch through nodes straddling it
    coarse = _count_components(spec, p, r, n + 1 - n % 2)
    fine = _count_components(spec, p, r, 2 * n + 1)
    if coarse != fine:
        raise ResolutionError(f"component count changed from {coarse} to {fine} between n={n} and n={2 * n}")
    return fine
