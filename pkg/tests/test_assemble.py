"""Discretization properties: conjugation, boundary rows, augmentation, locality."""

import numpy as np
import pytest

from crlab.assemble import assemble, fd_operators, fornberg_weights
from crlab.exceptions import (
    AssemblyError,
    CoefficientError,
    FredholmWeightError,
    ResolutionError,
)
from crlab.indexing import index_of, numerical_index
from crlab.loops import LoopOperatorSpec
from crlab.problems import (
    GridSpec,
    Truncation,
    build_contact_fiber_cylinder,
    build_plane,
    build_trivial_cylinder,
)


def test_fornberg_weights_differentiate_polynomials():
    nodes = np.linspace(-1.2, 0.7, 8)
    c = fornberg_weights(0.13, nodes, 1)
    for p in range(8):
        assert abs(c[:, 0] @ nodes**p - 0.13**p) < 1e-11
        want = p * 0.13 ** (p - 1) if p else 0.0
        assert abs(c[:, 1] @ nodes**p - want) < 1e-10


def test_stencils_stay_local():
    D, P, s, mids = fd_operators(-12.0, 12.0, 96)
    for i in range(D.shape[0]):
        nz = np.flatnonzero(np.abs(D[i]) + np.abs(P[i]))
        assert nz[-1] - nz[0] <= 7


def test_weight_conjugation_equals_shifted_asymptotics():
    # a mixed-sign weight has a linear profile, so conjugation is exactly a
    # constant shift of the coefficient: assembling (S, weights (-d, +d)) must
    # equal assembling (S - d, weights 0) entry for entry
    S = LoopOperatorSpec(dim=2, coeff=np.diag([2.0, 2.0]))
    Sm = LoopOperatorSpec(dim=2, coeff=np.diag([1.5, 1.5]))
    p1 = build_contact_fiber_cylinder(S, S, weights=(-0.5, 0.5))
    p2 = build_contact_fiber_cylinder(Sm, Sm, weights=(0.0, 0.0))
    op1 = assemble(p1)
    op2 = assemble(p2)
    assert len(op1.blocks) == len(op2.blocks)
    for b1, b2 in zip(op1.blocks, op2.blocks):
        assert b1.matrix.shape == b2.matrix.shape
        assert np.abs(b1.matrix - b2.matrix).max() < 1e-10


def test_doubling_t_nodes_keeps_index():
    p = build_trivial_cylinder((1.0, 1.0))
    r1 = index_of(p, GridSpec(96, 32))
    r2 = index_of(p, GridSpec(96, 64))
    assert r1.index == r2.index == -2


def test_augmentation_column_counts():
    for sd, want in (((2, 2), 4), ((2, 1), 3), ((1, 2), 3), ((0, 2), 2), ((0, 0), 0)):
        p = build_trivial_cylinder((1.0, 1.0), sd)
        op = assemble(p)
        assert op.augmentation_cols == want
    op = assemble(build_plane(1.0, 2))
    assert op.augmentation_cols == 2


def test_row_and_column_bookkeeping():
    p = build_trivial_cylinder((1.0, 1.0), (2, 2))
    op = assemble(p)
    assert op.cols - op.rows == op.index_candidate == 2
    assert op.pde_rows > 0 and op.bc_rows > 0
    rep = numerical_index(op)
    assert rep.index == op.index_candidate


def test_end_locality_of_coefficient_changes():
    # changing the interpolation inside |s| <= n' must not touch any matrix
    # row collocated beyond n' + 1
    S0 = LoopOperatorSpec(dim=2, coeff=np.diag([1.0, 1.0]))
    S1 = LoopOperatorSpec(dim=2, coeff=np.diag([2.0, 2.0]))
    p1 = build_contact_fiber_cylinder(S0, S1)
    p2 = build_contact_fiber_cylinder(S0, S1,
                                      interpolation=lambda u: np.diag([1.0 + u, 1.0 + u]))
    op1, op2 = assemble(p1), assemble(p2)
    npr = p1.truncation.n_prime
    _, _, s, mids = fd_operators(p1.s_lo, p1.truncation.s_max, op1.grid[0])
    F = 2
    for b1, b2 in zip(op1.blocks, op2.blocks):
        diff = np.abs(b1.matrix - b2.matrix).max(axis=1)
        pde = b1.pde_rows
        rows_changed = np.flatnonzero(diff[:pde] > 1e-14)
        if len(rows_changed):
            assert np.abs(mids[rows_changed // F]).max() <= npr + 1.0
        assert np.abs(diff[pde:]).max() <= 1e-14   # boundary rows untouched


def test_cap_condition_matches_laurent_oracle():
    # oracle: monomials z^m, m >= 0, are weight-admissible iff 2 pi m + delta < 0
    from crlab.assemble import required_s_nodes
    for delta in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0):
        admissible = [m for m in range(0, 4) if 2.0 * np.pi * m + delta < 0]
        p = build_plane(delta)
        rep = index_of(p, GridSpec(required_s_nodes(p), 32))
        assert rep.dim_ker == 2 * len(admissible)


def test_full_and_decoupled_backends_agree():
    S = LoopOperatorSpec(dim=2, coeff=np.diag([1.0, 1.0]))
    p = build_contact_fiber_cylinder(S, S, truncation=Truncation(6.0, 3.0))
    grid = GridSpec(48, 16)
    rep_d = index_of(p, grid, backend="decoupled")
    rep_c = index_of(p, grid, backend="coupled")
    assert rep_d.index == rep_c.index == 0
    assert abs(rep_d.min_singular_value - rep_c.min_singular_value) < 1e-8


def test_coupled_backend_handles_t_dependent_coefficients():
    # rotating coefficient loop: S(t) nondegenerate, genuinely t-dependent
    def S_of_t(t):
        c, s = np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)
        return np.array([[1.0 + 0.3 * c, 0.3 * s], [0.3 * s, 1.0 - 0.3 * c]])

    spec = LoopOperatorSpec(dim=2, coeff=S_of_t)
    from crlab.problems import CRProblem, EndSpec
    ends = (EndSpec("negative", spec, 0.0, 0), EndSpec("positive", spec, 0.0, 0))

    def coeff_st(s, t):
        return S_of_t(t)

    p = CRProblem(domain_kind="cylinder", ends=ends, fiber="contact_fiber",
                  truncation=Truncation(6.0, 3.0), coeff_st=coeff_st)
    rep = index_of(p, GridSpec(48, 16))
    # a constant-in-s nondegenerate coefficient gives an isomorphism
    assert rep.index == 0
    assert rep.dim_ker == 0
    assert rep.min_singular_value > 0.1


def test_non_finite_coefficient_rejected():
    from dataclasses import replace
    S = LoopOperatorSpec(dim=2, coeff=np.diag([1.0, 1.0]))
    p = build_contact_fiber_cylinder(S, S)
    bad = replace(p, coeff_s=lambda s: np.full((2, 2), np.nan))
    with pytest.raises((AssemblyError, CoefficientError)):
        assemble(bad)


def test_resolution_guard():
    p = build_trivial_cylinder((2.5, 2.5))
    with pytest.raises(ResolutionError):
        assemble(p, GridSpec(64, 32))


def test_weight_guards():
    with pytest.raises(FredholmWeightError):
        build_trivial_cylinder((7.0, 1.0))
    with pytest.raises(FredholmWeightError):
        build_trivial_cylinder((0.0, 1.0))
    S = LoopOperatorSpec(dim=2, coeff=np.diag([1.0, 1.0]))
    # a weight sitting exactly on an asymptotic eigenvalue breaks Fredholmness
    with pytest.raises(FredholmWeightError):
        build_contact_fiber_cylinder(S, S, weights=(0.0, 1.0))
    # beyond the spectral gap is fine as long as the spectrum is avoided
    build_contact_fiber_cylinder(S, S, weights=(0.0, 1.5))


def test_degenerate_contact_end_rejected():
    from crlab.exceptions import DegenerateEndError
    S_ok = LoopOperatorSpec(dim=2, coeff=np.diag([1.0, 1.0]))
    with pytest.raises(DegenerateEndError):
        build_contact_fiber_cylinder(LoopOperatorSpec(dim=2), S_ok)


def test_transpose_swaps_dimensions():
    op = assemble(build_trivial_cylinder((1.0, 1.0)))
    opt = op.transposed()
    assert (opt.rows, opt.cols) == (op.cols, op.rows)
    assert np.allclose(op.singular_values(), opt.singular_values())


def test_matrix_market_export(tmp_path):
    op = assemble(build_trivial_cylinder((1.0, 1.0), truncation=Truncation(6.0, 3.0)),
                  GridSpec(48, 16))
    path = tmp_path / "op.mtx"
    op.export_matrix_market(path)
    from scipy.io import mmread
    M = mmread(str(path))
    assert M.shape == (op.rows, op.cols)


def test_problem_serialization_roundtrip():
    from crlab.problems import problem_from_json
    p = build_trivial_cylinder((1.0, -0.5), (2, 0), Truncation(10.0, 5.0), label="t")
    q = problem_from_json(p.to_json())
    assert q.to_json() == p.to_json()
    S = LoopOperatorSpec(dim=2, coeff=np.diag([1.0, 2.0]))
    p2 = build_contact_fiber_cylinder(S, S, weights=(0.3, -0.3))
    q2 = problem_from_json(p2.to_json())
    assert q2.to_json() == p2.to_json()
