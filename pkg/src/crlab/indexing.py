"""Numerical and analytic Fredholm indices of assembled operators.

The numerical route decomposes every mode block by SVD, counts singular
values under a scale-relative threshold, and refuses to guess when the gap
between kept and discarded values is not decisive.  The analytic route never
assembles the two-dimensional operator: on the complex-line fiber it anchors
at the invertible mixed-weight cylinder and walks to the requested weights by
wall-crossing window counts; on the contact fiber it equals minus the
spectral flow of the interpolation path.

Orientation convention for the analytic contact-fiber index: the interpolation
path is traversed from the positive end to the negative end.  With the
crossing convention of :mod:`crlab.loops` (flow = #(neg->pos) - #(pos->neg))
this fixes  Ind(d/ds + A(s)) = -spectral_flow(path from A_+ to A_-),
equivalently +spectral_flow of the negative-to-positive traversal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assemble import assemble, required_s_nodes
from .exceptions import (
    AmbiguousWindowError,
    AssemblyError,
    FredholmWeightError,
    IndecisiveRankError,
    InstabilityError,
    NumericalError,
)
from .loops import (
    LoopOperatorSpec,
    assemble_loop_operator,
    count_window,
    spectral_flow,
    spectrum,
)
from .problems import GridSpec, default_grid_for, with_weights

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TolerancePolicy:
    """Rank decision rule: threshold = rel_threshold * sigma_max, accepted when
    the kept/discarded singular-value ratio is at least gap_min."""

    rel_threshold: float = 1e-6
    gap_min: float = 1e3
    strict: bool = False

    def to_json(self):
        return {"rel_threshold": self.rel_threshold, "gap_min": self.gap_min,
                "strict": self.strict}


DEFAULT_POLICY = TolerancePolicy()


@dataclass
class IndexReport:
    dim_ker: int
    dim_coker: int
    index: int
    singular_values: list
    gap_ratio: float
    decisive: bool
    method: str
    grid_tag: str
    tolerance_policy: TolerancePolicy = field(default=DEFAULT_POLICY)
    threshold: float = 0.0
    sigma_max: float = 0.0

    def __post_init__(self):
        if self.index != self.dim_ker - self.dim_coker:
            raise AssemblyError("index != dim_ker - dim_coker")

    @property
    def min_singular_value(self):
        kept = [s for s in self.singular_values if s >= self.threshold]
        return float(min(kept)) if kept else 0.0

    def to_json(self):
        return {
            "dim_ker": self.dim_ker, "dim_coker": self.dim_coker, "index": self.index,
            "singular_values": [float(s) for s in self.singular_values],
            "gap_ratio": (None if np.isinf(self.gap_ratio) else float(self.gap_ratio)),
            "decisive": self.decisive, "method": self.method, "grid_tag": self.grid_tag,
            "threshold": self.threshold, "sigma_max": self.sigma_max,
            "tolerance_policy": self.tolerance_policy.to_json(),
        }


def numerical_index(op, policy=DEFAULT_POLICY):
    """Kernel/cokernel dimensions and index of a discrete operator by SVD.

    dim_ker counts columns beyond the numerical rank, dim_coker rows beyond
    it; wide blocks contribute structural kernel directions that never appear
    among the singular values.  A report with gap_ratio below policy.gap_min
    is flagged indecisive (or raises, under a strict policy).
    """
    svs = []
    per_block = []
    for b in op.blocks:
        try:
            sv = np.linalg.svd(b.matrix, compute_uv=False)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalError(f"SVD failed on block {b.tag}: {exc}") from exc
        per_block.append(sv)
        svs.append(np.repeat(sv, b.mult))
    merged = np.sort(np.concatenate(svs))
    sigma_max = float(merged[-1]) if len(merged) else 0.0
    theta = policy.rel_threshold * sigma_max
    ker = coker = 0
    for b, sv in zip(op.blocks, per_block):
        rank = int((sv >= theta).sum())
        ker += b.mult * (b.matrix.shape[1] - rank)
        coker += b.mult * (b.matrix.shape[0] - rank)
    discarded = merged[merged < theta]
    kept = merged[merged >= theta]
    if len(discarded) == 0 or len(kept) == 0:
        gap_ratio = np.inf
    else:
        gap_ratio = float(kept[0] / max(discarded[-1], 1e-300))
    decisive = bool(gap_ratio >= policy.gap_min)
    if policy.strict and not decisive:
        raise IndecisiveRankError(
            f"gap ratio {gap_ratio:.2e} below {policy.gap_min:.0e}")
    index = ker - coker
    if index != op.index_candidate:
        raise AssemblyError(
            f"rank bookkeeping broke: index {index} != cols - rows {op.index_candidate}")
    return IndexReport(
        dim_ker=ker, dim_coker=coker, index=index,
        singular_values=[float(x) for x in merged[:10]],
        gap_ratio=gap_ratio, decisive=decisive, method="direct_svd",
        grid_tag=op.grid_tag(), tolerance_policy=policy,
        threshold=theta, sigma_max=sigma_max)


def index_of(problem, grid=None, policy=DEFAULT_POLICY, backend=None):
    """Assemble and decompose in one step."""
    return numerical_index(assemble(problem, grid, backend=backend), policy)


# ---------------------------------------------------------------------------
# analytic route
# ---------------------------------------------------------------------------

def _integer_multiples_between(lo, hi, t_resolution=64):
    """Real multiplicity of the trivial asymptotic spectrum 2 pi Z in (lo, hi),
    counted through the loop-operator window machinery."""
    if not lo < hi:
        return 0
    spec2 = LoopOperatorSpec(dim=2)
    rep = spectrum(assemble_loop_operator(spec2, t_resolution))
    return count_window(rep, lo, hi)


def analytic_index(problem, t_resolution=64, flow_steps=32):
    """Integer index without assembling the 2-D operator.

    Complex-line fiber: the count of trivial-spectrum points between the
    shifted end exponents (wall-crossing from the invertible mixed-weight
    case) plus the augmentation dimensions.  Contact fiber: minus the
    spectral flow of the interpolation path traversed from the positive to
    the negative end.
    """
    if problem.fiber == "complex_line":
        dm, dp = problem.weights()
        if problem.domain_kind == "plane":
            base = 2 if dp < 0 else 0
            return base + problem.augmentation_dims
        plus = _integer_multiples_between(dm, -dp, t_resolution)
        minus = _integer_multiples_between(-dp, dm, t_resolution)
        return plus - minus + problem.augmentation_dims

    prof = problem.weight_profile()
    s_max = problem.truncation.s_max
    dim = problem.fiber_dim

    def path(u):
        s_phys = s_max * (1.0 - 2.0 * u)      # positive end -> negative end
        B = problem.coefficient(s_phys) - float(prof.wprime(s_phys)) * np.eye(dim)
        return LoopOperatorSpec(dim=dim, coeff=0.5 * (B + B.T))

    return -spectral_flow(path, steps=flow_steps, t_resolution=t_resolution)


# ---------------------------------------------------------------------------
# sweeps and studies
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    delta: float
    report: object            # IndexReport or None when skipped
    skipped: bool = False
    reason: str = ""


@dataclass
class SweepReport:
    rows: list
    jumps: list                # (delta_lo, delta_hi, jump, crossed_multiplicity)

    def to_csv_rows(self):
        out = []
        for r in self.rows:
            if r.skipped:
                out.append((r.delta, "", "", "", "skipped:" + r.reason))
            else:
                out.append((r.delta, r.report.index, r.report.dim_ker,
                            r.report.dim_coker, "decisive" if r.report.decisive else "flagged"))
        return out


def delta_sweep(problem, deltas, grid=None, policy=DEFAULT_POLICY):
    """Recompute the index across weight magnitudes, recording index jumps.

    Each sample keeps the sign pattern of the problem's weights and replaces
    the magnitudes by delta.  Samples whose shifted spectrum degenerates are
    skipped and flagged.  The crossed multiplicity of each jump is the signed
    window count of the end spectra between consecutive magnitudes: growth
    ends raise the index when the window is crossed outward, decay ends
    lower it.
    """
    rows = []
    signs = {e.sign: (1.0 if e.weight >= 0 else -1.0) for e in problem.ends}
    for d in deltas:
        d = float(d)
        try:
            p = with_weights(problem, (signs.get("negative", 1.0) * d
                                       if problem.negative_end is not None else None,
                                       signs["positive"] * d))
            g = grid or default_grid_for(p.truncation)
            if g.s_nodes < required_s_nodes(p):
                g = GridSpec(s_nodes=required_s_nodes(p), t_nodes=g.t_nodes)
            rows.append(SweepRow(delta=d, report=index_of(p, g, policy)))
        except (FredholmWeightError, ValueError, IndecisiveRankError) as exc:
            rows.append(SweepRow(delta=d, report=None, skipped=True, reason=str(exc)))
    jumps = []
    valid = [r for r in rows if not r.skipped]
    for r1, r2 in zip(valid, valid[1:]):
        jump = r2.report.index - r1.report.index
        lo, hi = sorted((abs(r1.delta), abs(r2.delta)))
        crossed = 0
        for e in problem.ends:
            rep = spectrum(assemble_loop_operator(e.asymptotic, 64))
            try:
                pos_cnt = count_window(rep, lo, hi)
                neg_cnt = count_window(rep, -hi, -lo)
            except AmbiguousWindowError:
                continue
            # a growing magnitude tightens decay ends (negative-end walls sit
            # at the negative eigenvalues) and loosens growth ends
            if e.sign == "negative":
                crossed += pos_cnt if e.weight < 0 else -neg_cnt
            else:
                crossed += neg_cnt if e.weight < 0 else -pos_cnt
        orient = 1 if abs(r2.delta) >= abs(r1.delta) else -1
        jumps.append((r1.delta, r2.delta, jump, orient * crossed))
    return SweepReport(rows=rows, jumps=jumps)


@dataclass
class ConvergenceReport:
    grids: list
    reports: list
    stable: bool

    def indices(self):
        return [r.index for r in self.reports]


def convergence_study(problem, grids, policy=DEFAULT_POLICY):
    """Index must stabilize over the finest two grids; else InstabilityError."""
    if len(grids) < 3:
        raise ValueError("need at least 3 grids of increasing resolution")
    reports = [index_of(problem, g, policy) for g in grids]
    stable = (reports[-1].index == reports[-2].index
              and reports[-1].decisive and reports[-2].decisive)
    rep = ConvergenceReport(grids=list(grids), reports=reports, stable=stable)
    if not stable:
        raise InstabilityError(
            f"index failed to stabilize: {[r.index for r in reports]} "
            f"(decisive: {[r.decisive for r in reports]})")
    return rep


def adjoint_check(problem, grid=None, policy=DEFAULT_POLICY):
    """Duality: index(weights) == -index(negated weights), checked two ways.

    The adjoint side is computed both as the transpose of the assembled
    matrix (boundary roles exchanged by conjugation) and as an independent
    assembly of the problem with negated weights.
    """
    op = assemble(problem, grid)
    rep = numerical_index(op, policy)
    rep_t = numerical_index(op.transposed(), policy)
    dm, dp = problem.weights()
    p_neg = with_weights(problem, (None if dm is None else -dm, -dp))
    rep_neg = index_of(p_neg, grid, policy)
    return {
        "index": rep.index,
        "index_transposed": rep_t.index,
        "index_negated": rep_neg.index,
        "dim_ker": rep.dim_ker,
        "dim_coker": rep.dim_coker,
        "dim_ker_negated": rep_neg.dim_ker,
        "dim_coker_negated": rep_neg.dim_coker,
        "transpose_antisymmetric": rep_t.index == -rep.index
                                   and rep_t.dim_ker == rep.dim_coker,
        "weight_duality": rep_neg.index == -rep.index,
        "kernel_cokernel_swap": rep_neg.dim_ker == rep.dim_coker
                                and rep_neg.dim_coker == rep.dim_ker,
    }
