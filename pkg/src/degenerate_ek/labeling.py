"""Sublevel-set hierarchy: separating saddles, critical components, j, sigma, S.

The grid only supplies connectivity.  Every grid event is matched to a
declared critical point, and all reported values come from the exact declared
data.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import InvariantError, ParseError
from .potential import INF, CriticalPoint, PotentialSpec, require_numerics


@dataclass(frozen=True)
class MergeEvent:
    value: float
    cell: int
    survivor: int
    absorbed: int


@dataclass
class MergeTree:
    shape: tuple
    axes: list
    spacing: tuple
    values: np.ndarray
    births: list          # (cell, value), in processing order
    merges: list          # MergeEvent, in processing order
    roots: int            # number of components after the sweep
    lobe_roots: dict = field(default_factory=dict)   # saddle label -> list of root sets, one per lobe
    lobe_counts: dict = field(default_factory=dict)  # saddle label -> number of local components
    radius: dict = field(default_factory=dict)       # saddle label -> ball radius used

    def cell_location(self, cell):
        idx = np.unravel_index(cell, self.shape)
        return np.array([ax[i] for ax, i in zip(self.axes, idx)])

    @property
    def max_spacing(self):
        return max(self.spacing)

    def persistence(self):
        """Map birth cell -> (birth value, death value or inf)."""
        birth_value = dict(self.births)
        out = {c: (v, INF) for c, v in self.births}
        for ev in self.merges:
            out[ev.absorbed] = (birth_value[ev.absorbed], ev.value)
        return out


def _find(parent, c):
    while parent[c] != c:
        parent[c] = parent[parent[c]]
        c = parent[c]
    return c


def default_radius(spec: PotentialSpec, s: CriticalPoint, spacing: float) -> float:
    loc = s.location_float()
    others = [np.linalg.norm(q.location_float() - loc) for q in spec.critical_points if q is not s]
    r = 0.4 * min(others) if others else 0.5
    return max(r, 4 * spacing)


def _lobes(spec, s, axes, values, r):
    """Local components of B(s, r) intersect {V < V(s)} as lists of flat cells."""
    loc = s.location_float()
    shape = values.shape
    lo_idx, hi_idx = [], []
    for ax, c in zip(axes, loc):
        lo_idx.append(int(np.searchsorted(ax, c - r, side="left")))
        hi_idx.append(int(np.searchsorted(ax, c + r, side="right")))
    window = tuple(slice(a, b) for a, b in zip(lo_idx, hi_idx))
    sub_axes = [ax[w] for ax, w in zip(axes, window)]
    mesh = np.meshgrid(*sub_axes, indexing="ij")
    dist2 = sum((m - c) ** 2 for m, c in zip(mesh, loc))
    # drop the nodes next to the saddle: on a grid the two lobes can touch
    # through a pair of neighbouring nodes that straddle it
    core = 1.5 * max(ax[1] - ax[0] for ax in axes)
    mask = (dist2 <= r * r) & (dist2 >= core * core) & (values[window] < float(s.value))
    labels, count = ndimage.label(mask, structure=ndimage.generate_binary_structure(len(shape), 1))
    lobes = []
    offsets = np.array(lo_idx)
    for k in range(1, count + 1):
        local = np.argwhere(labels == k) + offsets
        lobes.append(np.ravel_multi_index(local.T, shape))
    return lobes


def _core_cells(s, axes, core):
    loc = s.location_float()
    idx_ranges = []
    for ax, c in zip(axes, loc):
        lo = int(np.searchsorted(ax, c - core, side="left"))
        hi = int(np.searchsorted(ax, c + core, side="right"))
        idx_ranges.append(np.arange(lo, hi))
    mesh = np.meshgrid(*idx_ranges, indexing="ij")
    pts = [ax[m] for ax, m in zip(axes, mesh)]
    near = sum((p - c) ** 2 for p, c in zip(pts, loc)) <= core * core
    shape = tuple(len(ax) for ax in axes)
    return np.ravel_multi_index([m[near] for m in mesh], shape).tolist()


def build_merge_tree(spec: PotentialSpec, n: int, radius: float | None = None,
                     saddles: Sequence[CriticalPoint] | None = None) -> MergeTree:
    """Union-find over grid nodes sorted by (value, flat index), with the elder rule.

    Besides births and merges, the sweep records, just below each declared
    saddle value, which global component each local sublevel lobe of the
    saddle belongs to.
    """
    require_numerics(spec)
    if n < 64:
        raise InvariantError("grid", "labeling needs n >= 64 per axis")
    bounds = spec.box_float()
    axes = [np.linspace(lo, hi, n) for lo, hi in bounds]
    spacing = tuple(ax[1] - ax[0] for ax in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    values = spec.V.evaluate_array(*mesh)
    shape = values.shape
    flat = values.ravel()
    N = flat.size
    strides = [int(np.prod(shape[a + 1:])) for a in range(len(shape))]
    coords = [c.ravel().tolist() for c in np.indices(shape)]
    vals = flat.tolist()

    saddles = list(spec.saddles() if saddles is None else saddles)
    scale = max(1.0, float(np.abs(flat).max()))
    eps = 1e-13 * scale
    core = 1.5 * max(spacing)
    keys = flat.copy()
    snapshots = []
    lobe_cells = {}
    radii = {}
    lobe_counts = {}
    for s in saddles:
        r = radius if radius is not None else default_radius(spec, s, max(spacing))
        radii[s.label] = r
        lobes = _lobes(spec, s, axes, values, r)
        lobe_cells[s.label] = lobes
        lobe_counts[s.label] = len(lobes)
        # the nodes next to a declared saddle are swept just above its value,
        # so that the snapshot sees the lobes before the grid joins them
        level = float(s.value)
        for c in _core_cells(s, axes, core):
            keys[c] = max(keys[c], level + eps)
        snapshots.append((level, s.label))
    snapshots.sort()
    order = np.lexsort((np.arange(N), keys)).tolist()
    key_list = keys.tolist()

    parent = list(range(N))
    processed = [False] * N
    birth_val = {}
    births, merges = [], []
    lobe_roots = {}
    snap_i = 0

    def take_snapshot(label):
        sets = []
        for cells in lobe_cells[label]:
            sets.append(frozenset(_find(parent, c) for c in cells.tolist() if processed[c]))
        lobe_roots[label] = sets

    d = len(shape)
    for c in order:
        v = vals[c]
        while snap_i < len(snapshots) and snapshots[snap_i][0] <= key_list[c]:
            take_snapshot(snapshots[snap_i][1])
            snap_i += 1
        roots = set()
        for a in range(d):
            k = coords[a][c]
            st = strides[a]
            if k > 0 and processed[c - st]:
                roots.add(_find(parent, c - st))
            if k < shape[a] - 1 and processed[c + st]:
                roots.add(_find(parent, c + st))
        if not roots:
            birth_val[c] = v
            births.append((c, v))
        else:
            elder = min(roots, key=lambda r: (birth_val[r], r))
            for r in sorted(roots):
                if r != elder:
                    parent[r] = elder
                    merges.append(MergeEvent(v, c, elder, r))
            parent[c] = elder
        processed[c] = True
    while snap_i < len(snapshots):
        take_snapshot(snapshots[snap_i][1])
        snap_i += 1
    n_roots = len({_find(parent, c) for c, _ in births})
    if n_roots != 1:
        raise InvariantError("merge-tree", f"sweep ended with {n_roots} components")
    return MergeTree(shape, axes, spacing, values, births, merges, n_roots, lobe_roots, lobe_counts, radii)


# matching grid events to declared points

def max_gradient(spec: PotentialSpec, tree: MergeTree) -> float:
    mesh = np.meshgrid(*tree.axes, indexing="ij")
    g2 = spec.grad_sq.evaluate_array(*mesh)
    return float(np.sqrt(g2.max()))


def default_tol(spec: PotentialSpec, tree: MergeTree) -> float:
    return 4 * max_gradient(spec, tree) * tree.max_spacing


def local_lipschitz(spec: PotentialSpec, p: CriticalPoint, radius: float, samples: int = 21) -> float:
    """max |grad V| on the cube of half-width ``radius`` around p."""
    axes = [np.linspace(c - radius, c + radius, samples) for c in p.location_float()]
    mesh = np.meshgrid(*axes, indexing="ij")
    return float(np.sqrt(spec.grad_sq.evaluate_array(*mesh).max()))


def _match(points, location, value, spacing, tol):
    best = None
    for p in points:
        dist = np.abs(p.location_float() - location)
        if np.all(dist <= 1.5 * np.asarray(spacing)) and abs(float(p.value) - value) <= tol:
            key = float(np.max(dist / np.asarray(spacing)))
            if best is None or key < best[0]:
                best = (key, p)
    return None if best is None else best[1]


@dataclass
class MinimumLabel:
    minimum: CriticalPoint
    j: tuple
    sigma: object
    S: object
    is_underline: bool
    level_index: int
    component: tuple   # minima of E(m) at level sigma(m)


@dataclass
class GenerReport:
    ok: bool
    violations: list

    def lines(self):
        if self.ok:
            return ["gener: ok"]
        return ["gener: violated"] + [f"  - {v}" for v in self.violations]


@dataclass
class LabelingResult:
    separating_saddles: tuple
    entries: list
    underline: CriticalPoint
    edges: tuple            # (saddle, minimum_a, minimum_b)
    gener: GenerReport
    diagnostics: list = field(default_factory=list)
    radius: dict = field(default_factory=dict)
    birth_match: dict = field(default_factory=dict)   # minimum label -> birth cell

    @property
    def gener_ok(self):
        return self.gener.ok

    def entry(self, m: CriticalPoint) -> MinimumLabel:
        for e in self.entries:
            if e.minimum.label == m.label and e.minimum.location == m.location:
                return e
        raise KeyError(m.display_name)

    def table(self):
        rows = ["minimum | value | sigma | S | j-set | is_underline"]
        for e in self.entries:
            j = "{" + ", ".join(s.display_name for s in e.j) + "}" if e.j else "{s1*}"
            rows.append(f"{e.minimum.display_name} | {_fmt(e.minimum.value)} | {_fmt(e.sigma)} | "
                        f"{_fmt(e.S)} | {j} | {str(e.is_underline).lower()}")
        return "\n".join(rows)


def _fmt(q):
    if q == INF:
        return "inf"
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _lex_key(p):
    return (p.value, tuple(p.location))


def label_from_edges(minima: Sequence[CriticalPoint], edges, diagnostics=None) -> LabelingResult:
    """The recursive labeling on the graph whose nodes are minima and whose
    edges are separating saddles (each joining two minima)."""
    minima = sorted(minima, key=_lex_key)
    if not minima:
        raise InvariantError("minima", "no declared minima")
    index = {m.label: i for i, m in enumerate(minima)}
    separating = []
    for s, _, _ in edges:
        if all(s.label != q.label for q in separating):
            separating.append(s)
    levels = sorted({s.value for s in separating}, reverse=True)
    underline = minima[0]

    def components(level):
        parent = list(range(len(minima)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for s, a, b in edges:
            if level == INF or s.value < level:
                ra, rb = find(index[a.label]), find(index[b.label])
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        groups = {}
        for i in range(len(minima)):
            groups.setdefault(find(i), []).append(minima[i])
        return list(groups.values())

    entries = {underline.label: MinimumLabel(underline, (), INF, INF, True, 1, tuple(minima))}
    labeled = {underline.label}
    for li, level in enumerate(levels, start=2):
        for comp in components(level):
            if any(m.label in labeled for m in comp):
                continue
            m = min(comp, key=_lex_key)
            members = {q.label for q in comp}
            j = []
            for s, a, b in edges:
                if s.value == level and (a.label in members or b.label in members):
                    if all(s.label != q.label for q in j):
                        j.append(s)
            entries[m.label] = MinimumLabel(m, tuple(sorted(j, key=lambda q: q.label)), level,
                                            level - m.value, False, li, tuple(comp))
            labeled.add(m.label)
    missing = [m.display_name for m in minima if m.label not in labeled]
    if missing:
        raise InvariantError("labeling", f"minima never labeled: {missing}; the saddle graph is disconnected")
    ordered = [entries[m.label] for m in sorted(minima, key=lambda q: q.label)]
    result = LabelingResult(tuple(sorted(separating, key=lambda q: q.label)), ordered, underline,
                            tuple(edges), GenerReport(True, []), list(diagnostics or []))
    result.gener = check_gener(result)
    return result


def check_gener(result: LabelingResult, spec: PotentialSpec | None = None) -> GenerReport:
    """Both genericity clauses, evaluated on the exact declared values."""
    violations = []
    for e in result.entries:
        lows = [q for q in e.component if q.value <= e.minimum.value and q.label != e.minimum.label]
        if lows:
            names = ", ".join(q.display_name for q in lows)
            violations.append(f"{e.minimum.display_name} is not the unique global minimum of its critical "
                              f"component (also attained at {names})")
    entries = result.entries
    for i, a in enumerate(entries):
        for b in entries[i + 1:]:
            shared = {s.label for s in a.j} & {s.label for s in b.j}
            if shared:
                names = ", ".join(s.display_name for s in a.j if s.label in shared)
                violations.append(f"j({a.minimum.display_name}) and j({b.minimum.display_name}) share {names}")
    return GenerReport(not violations, violations)


def compute_labeling(tree: MergeTree, spec: PotentialSpec, tol: float | None = None,
                     strict: bool = False) -> LabelingResult:
    if tol is None:
        tol = default_tol(spec, tree)
    minima = spec.minima()
    saddles = spec.saddles()
    birth_of = {}
    for cell, value in tree.births:
        p = _match(minima, tree.cell_location(cell), value, tree.spacing, tol)
        if p is None:
            loc = tree.cell_location(cell).tolist()
            raise InvariantError("unmatched-birth", f"grid local minimum at {loc} (value {value:.6g}) "
                                                    "matches no declared minimum")
        if p.label in birth_of:
            raise InvariantError("unmatched-birth", "two grid minima matched the same declared minimum",
                                 p.display_name)
        birth_of[p.label] = cell
    for m in minima:
        if m.label not in birth_of:
            raise InvariantError("unmatched-minimum", "declared minimum produced no grid birth", m.display_name)
    for ev in tree.merges:
        if _match(saddles, tree.cell_location(ev.cell), ev.value, tree.spacing, tol) is None:
            loc = tree.cell_location(ev.cell).tolist()
            raise InvariantError("unmatched-merge", f"merge at {loc} (value {ev.value:.6g}) matches no "
                                                    "declared index-1 point")
    minimum_of_root = {cell: next(m for m in minima if m.label == lab) for lab, cell in birth_of.items()}
    edges = []
    diagnostics = []
    for s in saddles:
        lobes = tree.lobe_roots.get(s.label, [])
        if len(lobes) != 2:
            diagnostics.append(f"{s.display_name}: {len(lobes)} local sublevel components at r = "
                               f"{tree.radius.get(s.label)!r}; not separating at this resolution")
            continue
        a, b = lobes
        if not a or not b:
            diagnostics.append(f"{s.display_name}: a lobe has no grid cell below the saddle value")
            continue
        if a & b:
            diagnostics.append(f"{s.display_name}: both lobes lie in one component; not separating")
            continue
        edges.append((s, minimum_of_root[min(a)], minimum_of_root[min(b)]))
    if strict and diagnostics:
        raise InvariantError("unmatched-saddle", "; ".join(diagnostics))
    result = label_from_edges(minima, edges, diagnostics)
    result.radius = dict(tree.radius)
    result.birth_match = birth_of
    return result


def grid_barriers(tree: MergeTree, result: LabelingResult) -> dict:
    """Persistence of each declared minimum's grid component (death - birth)."""
    pers = tree.persistence()
    out = {}
    for e in result.entries:
        birth, death = pers[result.birth_match[e.minimum.label]]
        out[e.minimum.label] = death - birth
    return out


def label_spec(spec: PotentialSpec, n: int = 256, radius=None, tol=None, strict=False):
    tree = build_merge_tree(spec, n, radius)
    return compute_labeling(tree, spec, tol, strict), tree


# adjacency oracle for d > 3

_ORACLE = re.compile(r"^saddle\s+(\S+)\s+separates\s+(\S+)\s+(\S+)\s*$")


def parse_adjacency(text: str, spec: PotentialSpec):
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ORACLE.match(line)
        if not m:
            raise ParseError("expected: saddle <id> separates <min-id> <min-id>", lineno)
        try:
            s, a, b = (spec.point(k) for k in m.groups())
        except InvariantError:
            raise ParseError(f"unknown critical point id in {line!r}", lineno) from None
        if not s.is_saddle:
            raise InvariantError("index-1", "oracle saddle is not an index-1 point", s.display_name)
        for q in (a, b):
            if not q.is_minimum:
                raise InvariantError("minimum", "oracle endpoint is not a minimum", q.display_name)
            if not q.value < s.value:
                raise InvariantError("oracle", "minimum above its separating saddle", q.display_name)
        edges.append((s, a, b))
    return edges


def label_from_oracle(spec: PotentialSpec, text: str) -> LabelingResult:
    return label_from_edges(spec.minima(), parse_adjacency(text, spec))
