from fractions import Fraction as F
import random

import pytest

from degenerate_ek.errors import InvariantError, ParseError
from degenerate_ek.labeling import (build_merge_tree, compute_labeling, grid_barriers, label_from_edges,
                                    label_from_oracle, label_spec, parse_adjacency)
from degenerate_ek.potential import INF, parse_spec

from helpers import load, point

QUARTIC_DW = "dim 1\nV = x^4 - x^2\nbox -2 2\n"


class TestMergeTree:
    def test_single_well(self):
        spec = parse_spec("dim 1\nV = x^2\nbox -2 2\ncp at 0 value 0 nu 2 t 1\n")
        tree = build_merge_tree(spec, 256)
        assert len(tree.births) == 1 and tree.merges == [] and tree.roots == 1

    def test_double_well_events(self):
        spec = parse_spec(QUARTIC_DW)
        n = 1024
        tree = build_merge_tree(spec, n)
        assert len(tree.births) == 2 and len(tree.merges) == 1
        for cell, value in tree.births:
            assert abs(abs(tree.cell_location(cell)[0]) - 2 ** -0.5) <= 4 / n
            assert value == pytest.approx(-0.25, abs=1e-4)
        assert abs(tree.merges[0].value) <= 2 / n

    def test_events_are_consistent(self):
        tree = build_merge_tree(parse_spec(QUARTIC_DW), 512)
        born = {c: v for c, v in tree.births}
        for ev in tree.merges:
            assert born[ev.absorbed] <= ev.value and born[ev.survivor] <= ev.value

    def test_grid_too_small(self):
        with pytest.raises(InvariantError, match="grid"):
            build_merge_tree(parse_spec(QUARTIC_DW), 32)


class TestLabeling:
    def test_asymmetric_double_well(self):
        spec = load("dwell.pot")
        res, _ = label_spec(spec, 2048)
        saddle, m_plus, m_minus = spec.critical_points
        assert res.underline == m_minus
        e = res.entry(m_plus)
        assert e.j == (saddle,) and e.S == F(7, 15) and e.sigma == 0
        assert res.entry(m_minus).S == INF
        assert res.gener_ok

    def test_single_well(self):
        spec = parse_spec("dim 1\nV = x^2\nbox -2 2\ncp at 0 value 0 nu 2 t 1\n")
        res, _ = label_spec(spec, 256)
        (e,) = res.entries
        assert e.is_underline and e.S == INF and e.j == ()

    def test_triple_well_geometry(self):
        spec = load("labeling/triple1d.pot")
        res, _ = label_spec(spec, 2048)
        m0, m_left, m_right, s_left, s_right = spec.critical_points
        assert res.underline == m_left
        assert set(res.entry(m0).j) == {s_left, s_right}
        assert res.entry(m0).S == F(11, 12)
        assert res.entry(m_right).S == F(11, 12) + F(4, 3)
        assert not res.gener_ok

    def test_symmetric_double_well_not_generic(self):
        res, _ = label_spec(load("labeling/dwell2d.pot"), 128)
        assert not res.gener_ok
        assert any("unique global minimum" in v for v in res.gener.violations)

    def test_undeclared_saddle(self):
        spec = parse_spec("dim 1\nV = x^4 - 2*x^2\nbox -2 2\ncp at -1 value -1 nu 2 t 4\n"
                          "cp at 1 value -1 nu 2 t 4\n")
        with pytest.raises(InvariantError, match="unmatched-merge"):
            label_spec(spec, 512)

    def test_undeclared_minimum(self):
        spec = parse_spec("dim 1\nV = x^4 - 2*x^2\nbox -2 2\ncp at 0 value 0 nu 2 t -2\n"
                          "cp at 1 value -1 nu 2 t 4\n")
        with pytest.raises(InvariantError, match="unmatched-birth"):
            label_spec(spec, 512)

    def test_report_table(self):
        res, _ = label_spec(load("dwell.pot"), 1024)
        lines = res.table().splitlines()
        assert lines[0] == "minimum | value | sigma | S | j-set | is_underline"
        assert "cp1 | -7/15 | 0 | 7/15 | {cp0} | false" in lines

    @pytest.mark.parametrize("name", ["dwell.pot", "labeling/triple1d.pot", "labeling/morse_dwell.pot"])
    def test_invariants(self, name):
        spec = load(name)
        res, _ = label_spec(spec, 2048)
        infinite = [e for e in res.entries if e.S == INF]
        assert len(infinite) == 1 and infinite[0].is_underline
        assert {e.minimum.label for e in res.entries} == {m.label for m in spec.minima()}
        for e in res.entries:
            if not e.is_underline:
                assert e.S == e.sigma - e.minimum.value
                assert all(s.value == e.sigma for s in e.j)

    def test_refinement_keeps_barriers_close(self):
        spec = load("labeling/morse_dwell.pot")
        errs = []
        for n in (1024, 2048, 4096):
            tree = build_merge_tree(spec, n)
            res = compute_labeling(tree, spec)
            (lab,) = [e.minimum.label for e in res.entries if not e.is_underline]
            errs.append(abs(grid_barriers(tree, res)[lab] - float(res.entries[lab].S)))
        assert errs[2] <= errs[0]


class TestRelabeling:
    @pytest.mark.parametrize("seed", range(4))
    def test_permuted_points_same_barriers(self, seed):
        text = load("labeling/triple1d.pot").source
        head = [l for l in text.splitlines() if not l.startswith("cp")]
        cps = [l for l in text.splitlines() if l.startswith("cp")]
        random.Random(seed).shuffle(cps)
        spec = parse_spec("\n".join(head + cps) + "\n")
        res, _ = label_spec(spec, 1024)
        pairs = sorted((e.minimum.value, e.S) for e in res.entries)
        assert pairs == sorted([(F(-4, 3), INF), (F(-4, 3), F(9, 4)), (F(0), F(11, 12))])


class TestOracle:
    TEXT = "saddle 3 separates 0 1\nsaddle 4 separates 1 2\n"

    def test_triple_from_oracle(self):
        spec = load("triple.pot", validate=False)
        res = label_from_oracle(spec, self.TEXT)
        assert len(res.separating_saddles) == 2
        mid = spec.critical_points[1]
        assert res.underline == spec.critical_points[0]
        assert {s.label for s in res.entry(mid).j} == {3, 4}
        assert not res.gener_ok

    def test_bad_line(self):
        spec = load("triple.pot", validate=False)
        with pytest.raises(ParseError):
            parse_adjacency("saddle 3 joins 0 1\n", spec)

    def test_endpoint_must_be_minimum(self):
        spec = load("triple.pot", validate=False)
        with pytest.raises(InvariantError, match="minimum"):
            parse_adjacency("saddle 3 separates 0 4\n", spec)

    def test_edges_direct(self):
        a = point([2], [1], [-1], -1, label=0)
        b = point([2], [1], [1], -2, label=1)
        s = point([2], [-1], [0], 0, label=2)
        res = label_from_edges([a, b], [(s, a, b)])
        assert res.underline == b and res.entry(a).S == 1
