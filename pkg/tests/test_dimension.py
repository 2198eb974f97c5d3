"""Configuration-graph dimension arithmetic and the codimension ladder."""

import numpy as np
import pytest

from crlab.dimension import (
    CANONICAL_CASES,
    Component,
    ConfigurationGraph,
    OrbitLabel,
    aut_minus_moduli,
    codimension,
    component_dim,
    configuration_dim,
    one_bubble_glued,
    one_bubble_pair,
    broken_glued,
    broken_pair,
    multi_end_bubble_glued,
    multi_end_bubble_pair,
    multi_end_split_glued,
    multi_end_split_pair,
    double_multi_split_glued,
    double_multi_split_pair,
    randomized_budget_variants,
    single_cylinder,
    splice_consistency,
    splice_trivial,
    target_symmetry_count,
    unparameterized_dim,
)
from crlab.exceptions import GraphError


def test_component_dim_values():
    x = OrbitLabel("x")
    c = Component((x,), (OrbitLabel("y"),), ind_L2=0, domain_symmetry_dim=2)
    assert component_dim(c) == 2
    t = Component((x,), (x,), ind_L2=0, trivial=True, domain_symmetry_dim=2)
    assert component_dim(t, reduced_shifts=True) == 1
    plane = Component((), (x,), ind_L2=3, domain_symmetry_dim=4)
    assert component_dim(plane) == 5
    with pytest.raises(GraphError):
        component_dim(c, reduced_shifts=True)


def test_component_validation():
    x = OrbitLabel("x")
    with pytest.raises(GraphError):
        Component((), (), 0)
    with pytest.raises(GraphError):
        Component((x,), (OrbitLabel("y"),), 0, trivial=True)
    with pytest.raises(GraphError):
        Component((x,), (x,), 1, trivial=True)
    with pytest.raises(GraphError):
        OrbitLabel("x", action=-1.0)


def test_seam_validation():
    x, y = OrbitLabel("x"), OrbitLabel("y")
    a = Component((y,), (x,), 0, domain_symmetry_dim=2)
    b = Component((x,), (y,), 0, domain_symmetry_dim=2)
    ConfigurationGraph((a, b), ((0, 0, 1, 0),), levels=1)
    with pytest.raises(GraphError):
        # orbit mismatch at the seam
        bad = Component((y,), (y,), 0, domain_symmetry_dim=2)
        ConfigurationGraph((a, bad), ((0, 0, 1, 0),), levels=1)
    with pytest.raises(GraphError):
        # closed loop in the bubble tree
        ConfigurationGraph((a, b), ((0, 0, 1, 0), (1, 0, 0, 0)), levels=1)


def test_configuration_dim_examples():
    g = single_cylinder(5)
    assert configuration_dim(g) == 7
    pair = one_bubble_pair(ind_bubble=2, ind_w=1)
    assert configuration_dim(pair) == (2 + 2) + (2 + 1) - 1
    two = broken_pair(0, 0)
    assert configuration_dim(two) == 3


def test_seam_consistency_with_gluing():
    # two-component graph: one more parameterized dimension than the glued one
    for a, b in ((0, 0), (2, -1), (3, 4)):
        pair = broken_pair(a, b)
        glued = broken_glued(a + b)
        assert configuration_dim(pair) == configuration_dim(glued) + 1


def test_unparameterized_single_cylinder():
    g = single_cylinder(3)
    # (2 + d) - 2 symmetries - 1 target translation
    assert unparameterized_dim(g) == 2


def test_target_symmetry_counting_rule():
    pair = one_bubble_pair()
    assert pair.levels == 2
    assert target_symmetry_count(pair) == 2
    spliced = splice_trivial(one_bubble_pair(), 0)
    assert spliced.levels == 3
    assert target_symmetry_count(spliced) == 3


def test_one_bubble_difference_is_one():
    assert unparameterized_dim(one_bubble_glued(0)) - unparameterized_dim(one_bubble_pair(0, 0)) == 1


def test_two_level_split_difference_is_one():
    assert unparameterized_dim(broken_glued(0)) - unparameterized_dim(broken_pair(0, 0)) == 1


def test_codimension_ladder():
    assert codimension(one_bubble_pair(), one_bubble_glued()) == 1
    assert codimension(broken_pair(), broken_glued()) == 1
    assert codimension(multi_end_bubble_pair(4), multi_end_bubble_glued(4)) == 1
    assert codimension(multi_end_split_pair(3), multi_end_split_glued(3)) == 1
    assert codimension(double_multi_split_pair(3, 3), double_multi_split_glued(3, 3)) == 2
    # the multi-end statements hold for more ends too
    assert codimension(multi_end_split_pair(5), multi_end_split_glued(5)) == 1
    assert codimension(double_multi_split_pair(4, 5), double_multi_split_glued(4, 5)) == 2


def test_codimension_antisymmetric():
    a, b = broken_pair(1, 2), broken_glued(3)
    assert codimension(a, b) == -codimension(b, a)


def test_codimension_preconditions():
    with pytest.raises(GraphError):
        codimension(broken_pair(1, 0), broken_glued(0))   # budget mismatch
    with pytest.raises(GraphError):
        codimension(multi_end_split_pair(4), broken_glued(0))   # different outer ends


def test_randomized_budget_variants():
    rng = np.random.default_rng(7)
    for case in CANONICAL_CASES:
        for deg, smooth, want in randomized_budget_variants(case, rng, 25):
            assert codimension(deg, smooth) == want


def test_splice_keeps_parameterized_dim_and_surfaces_unparameterized_shift():
    res = splice_consistency(one_bubble_pair(), 0)
    assert res["delta_parameterized"] == 0
    # the reduced-space rule does not balance the symmetry counting: the
    # discrepancy is surfaced, not absorbed
    assert res["delta_unparameterized"] == -2
    assert res["consistent"] is False
    spliced = res["spliced"]
    t = spliced.components[-1]
    assert t.trivial
    assert spliced.seam_adjacent(len(spliced.components) - 1)


def test_aut_minus_moduli_presets():
    assert aut_minus_moduli(1) == 4    # plane: translations + rotation + scaling
    assert aut_minus_moduli(2) == 2    # cylinder
    assert aut_minus_moduli(3) == 0
    assert aut_minus_moduli(4) == -2   # moving markers absorb moduli


def test_graph_json_roundtrip():
    g = multi_end_split_pair(4, ind_u=2, ind_w=-1)
    d = g.to_json()
    back = ConfigurationGraph.from_json(d)
    assert back.to_json() == d
    assert unparameterized_dim(back) == unparameterized_dim(g)


def test_outer_ends_and_budget():
    pair = broken_pair(2, 3)
    assert pair.total_ind() == 5
    outs = pair.outer_ends()
    assert ("neg", "x-", 1.0) in outs and ("pos", "x+", 1.0) in outs
    assert len(outs) == 2
