"""Self-adjoint asymptotic operators on the circle.

The operators analyzed here have the form A(z) = J0 dz/dt + S(t) z acting on
loops z: S^1 = R/Z -> R^{2n}, with J0 the standard complex structure in block
form and S(t) a symmetric coefficient loop.  Their spectra control Fredholm
weights, window counts control wall-crossing jumps, and the signed count of
eigenvalue crossings along a path of such operators (the spectral flow)
computes indices of the cylinder operators built in :mod:`crlab.assemble`.

Sign convention, fixed once for the whole package:

    spectral_flow = #(crossings neg -> pos) - #(crossings pos -> neg)

as the path parameter increases.  Index contracts elsewhere are stated
relative to this convention together with a path orientation; see
:func:`crlab.indexing.analytic_index`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    AmbiguousWindowError,
    CoefficientError,
    DegenerateEndError,
    NumericalError,
    ResolutionError,
    TrackingError,
)

SYMMETRY_TOL = 1e-12


def standard_j(dim):
    """The standard complex structure on R^{dim}: J(e_i) = e_{i+n}, J(e_{i+n}) = -e_i."""
    if dim % 2 != 0 or dim <= 0:
        raise CoefficientError(f"fiber dimension must be even and positive, got {dim}")
    n = dim // 2
    J = np.zeros((dim, dim))
    J[n:, :n] = np.eye(n)
    J[:n, n:] = -np.eye(n)
    return J


@dataclass(frozen=True)
class LoopOperatorSpec:
    """Data of an asymptotic operator A = J0 d/dt + S(t) on loops in R^{dim}.

    ``coeff`` may be None (S = 0), a constant symmetric matrix, or a callable
    t -> matrix for a 1-periodic coefficient loop.  ``period`` is the orbit
    action c; it is bookkeeping only and does not enter the operator, which
    is always parameterized over t in [0, 1).
    """

    dim: int
    period: float = 1.0
    coeff: object = None

    def __post_init__(self):
        if self.dim % 2 != 0 or self.dim <= 0:
            raise CoefficientError(f"dim must be even positive, got {self.dim}")
        if not self.period > 0:
            raise CoefficientError(f"period must be positive, got {self.period}")
        if self.coeff is not None and not callable(self.coeff):
            S = np.asarray(self.coeff, dtype=float)
            if S.shape != (self.dim, self.dim):
                raise CoefficientError(f"coefficient shape {S.shape} != ({self.dim}, {self.dim})")
            if not np.isfinite(S).all():
                raise CoefficientError("coefficient contains non-finite entries")
            if np.abs(S - S.T).max() > SYMMETRY_TOL:
                raise CoefficientError("constant coefficient matrix is not symmetric")

    @property
    def is_constant(self):
        return self.coeff is None or not callable(self.coeff)

    def constant_matrix(self):
        """The coefficient matrix for constant specs (zero matrix when coeff is None)."""
        if callable(self.coeff):
            raise CoefficientError("spec has a t-dependent coefficient loop")
        if self.coeff is None:
            return np.zeros((self.dim, self.dim))
        return np.asarray(self.coeff, dtype=float)

    def sample(self, ts):
        """Sample S(t) at the given parameter values, validating symmetry."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self.is_constant:
            S = self.constant_matrix()
            return np.broadcast_to(S, (len(ts), self.dim, self.dim)).copy()
        out = np.empty((len(ts), self.dim, self.dim))
        for i, t in enumerate(ts):
            S = np.asarray(self.coeff(t), dtype=float)
            if S.shape != (self.dim, self.dim):
                raise CoefficientError(f"coefficient at t={t} has shape {S.shape}")
            if not np.isfinite(S).all():
                raise CoefficientError(f"coefficient at t={t} has non-finite entries")
            if np.abs(S - S.T).max() > SYMMETRY_TOL:
                raise CoefficientError(f"coefficient at t={t} is not symmetric")
            out[i] = S
        return out

    def sup_norm(self, samples=64):
        ts = np.arange(samples) / samples
        return float(max(np.linalg.norm(S, 2) for S in self.sample(ts)))

    def degeneracy_tol(self):
        """Scale-aware zero-eigenvalue tolerance: 1e-8 * (1 + ||S||_inf)."""
        return 1e-8 * (1.0 + self.sup_norm())

    def check_periodicity(self, t_resolution, tol=1e-8):
        if self.is_constant:
            return
        S0 = self.sample([0.0])[0]
        S1 = self.sample([1.0 - 1.0 / t_resolution])[0]
        Sm = self.sample([-1.0 / t_resolution])[0]
        if np.abs(S1 - Sm).max() > tol * (1.0 + np.abs(S0).max()):
            raise CoefficientError("coefficient loop is not 1-periodic within tolerance")

    def to_json(self):
        d = {"dim": self.dim, "period": self.period}
        if self.coeff is None:
            d["coeff"] = {"kind": "zero"}
        elif not callable(self.coeff):
            S = self.constant_matrix()
            if np.allclose(S, np.diag(np.diag(S))):
                d["coeff"] = {"kind": "diag", "values": list(np.diag(S))}
            else:
                d["coeff"] = {"kind": "constant", "matrix": S.tolist()}
        else:
            raise CoefficientError("callable coefficient loops do not serialize")
        return d

    @staticmethod
    def from_json(d):
        coeff = d.get("coeff", {"kind": "zero"})
        kind = coeff.get("kind")
        if kind == "zero":
            C = None
        elif kind == "diag":
            C = np.diag(np.asarray(coeff["values"], dtype=float))
        elif kind == "constant":
            C = np.asarray(coeff["matrix"], dtype=float)
        else:
            raise CoefficientError(f"unknown coefficient kind {kind!r}")
        return LoopOperatorSpec(dim=int(d["dim"]), period=float(d.get("period", 1.0)), coeff=C)


@dataclass
class DiscreteLoopOperator:
    """Assembled symmetric matrix of A on a circle grid."""

    matrix: np.ndarray
    spec: LoopOperatorSpec
    t_resolution: int
    method: str


def _fourier_diff_matrix(M):
    # spectral differentiation for period-1 grids, M odd; antisymmetric and
    # exact on modes |k| <= (M-1)/2, with no Nyquist null direction
    j = np.arange(M)
    diff = j[:, None] - j[None, :]
    D = np.zeros((M, M))
    off = diff != 0
    D[off] = np.pi * (-1.0) ** diff[off] / np.sin(np.pi * diff[off] / M)
    return D


def _fd_diff_matrix(M):
    h = 1.0 / M
    D = np.zeros((M, M))
    for j in range(M):
        D[j, (j + 1) % M] = 1.0 / (2 * h)
        D[j, (j - 1) % M] = -1.0 / (2 * h)
    return D


def assemble_loop_operator(spec, t_resolution, method="fourier"):
    """Assemble A = J0 d/dt + S(t) as a real symmetric matrix on a t-grid.

    The unknown ordering is node-major: entry (j * dim + i) holds component i
    at node t_j.  The derivative term kron(D, J0) is symmetric because both
    factors are antisymmetric; the result is symmetrized to kill round-off.
    Even requested resolutions are rounded up to the next odd node count: an
    even periodic grid carries a Nyquist mode that spectral differentiation
    annihilates, which would contaminate the low spectrum with copies of the
    eigenvalues of S alone.
    """
    if t_resolution < 8:
        raise ResolutionError(f"t_resolution must be >= 8, got {t_resolution}")
    if method not in ("fourier", "finite_difference"):
        raise ValueError(f"unknown method {method!r}")
    spec.check_periodicity(t_resolution)
    M = int(t_resolution) | 1
    J = standard_j(spec.dim)
    D = _fourier_diff_matrix(M) if method == "fourier" else _fd_diff_matrix(M)
    A = np.kron(D, J)
    ts = np.arange(M) / M
    Ss = spec.sample(ts)
    for j in range(M):
        A[j * spec.dim:(j + 1) * spec.dim, j * spec.dim:(j + 1) * spec.dim] += Ss[j]
    A = 0.5 * (A + A.T)
    return DiscreteLoopOperator(matrix=A, spec=spec, t_resolution=M, method=method)


@dataclass
class SpectrumReport:
    """Eigenvalues of a discrete loop operator, grouped into multiplicities."""

    eigenvalues: list          # list of (value, multiplicity, reliable)
    dim: int
    period: float
    t_resolution: int
    method: str
    raw: np.ndarray = field(repr=False, default=None)

    def total_multiplicity(self):
        return sum(m for _, m, _ in self.eigenvalues)

    def values(self, reliable_only=False):
        return np.array([v for v, m, r in self.eigenvalues for _ in range(m)
                         if not reliable_only or r])

    def to_json(self):
        return {
            "dim": self.dim,
            "period": self.period,
            "resolution": self.t_resolution,
            "method": self.method,
            "eigenvalues": [
                {"value": float(v), "multiplicity": int(m), "reliable": bool(r)}
                for v, m, r in self.eigenvalues
            ],
        }


def spectrum(op, cluster_tol=None):
    """All eigenvalues of the assembled operator, sorted, with multiplicities.

    Eigenvalues outside the resolvable band |lambda| > (pi/2) * resolution are
    reported but flagged unreliable.  For the finite-difference method,
    eigenvectors dominated by near-Nyquist modes are also flagged: centered
    differences fold the top of the band back to small eigenvalues, and those
    folded copies carry no spectral information.
    """
    try:
        lam, vec = np.linalg.eigh(op.matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(
            f"eigensolver failed on {op.matrix.shape} {op.method} matrix: {exc}") from exc
    M = op.t_resolution
    band = 0.5 * np.pi * M
    ok = np.abs(lam) <= band
    if op.method == "finite_difference":
        modes = np.fft.fft(vec.reshape(M, op.spec.dim, -1), axis=0)
        freqs = np.abs(np.fft.fftfreq(M, d=1.0 / M))
        low = freqs <= M / 4.0
        energy = np.abs(modes) ** 2
        frac = energy[low].sum(axis=(0, 1)) / energy.sum(axis=(0, 1))
        ok &= frac >= 0.5
    if cluster_tol is None:
        cluster_tol = 1e-6 * (1.0 + float(np.abs(lam).max(initial=0.0)))
    groups = []
    i = 0
    while i < len(lam):
        j = i + 1
        while j < len(lam) and lam[j] - lam[j - 1] <= cluster_tol:
            j += 1
        val = float(lam[i:j].mean())
        groups.append((val, j - i, bool(ok[i:j].all())))
        i = j
    return SpectrumReport(eigenvalues=groups, dim=op.spec.dim, period=op.spec.period,
                          t_resolution=M, method=op.method, raw=lam)


def count_window(report, lo, hi, tol=None):
    """Total multiplicity of eigenvalues strictly inside (lo, hi).

    Raises :class:`AmbiguousWindowError` when an endpoint sits on an
    eigenvalue within tolerance; the caller must perturb the window.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    lam = report.raw if report.raw is not None else report.values()
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.abs(lam).max(initial=0.0)))
    for edge in (lo, hi):
        if np.any(np.abs(lam - edge) <= tol):
            raise AmbiguousWindowError(
                f"window endpoint {edge} within {tol:.2e} of an eigenvalue")
    return int(np.count_nonzero((lam > lo) & (lam < hi)))


def is_nondegenerate(spec, t_resolution=64, tol=None):
    """Whether 0 is separated from the spectrum of A; returns (flag, margin)."""
    if tol is None:
        tol = spec.degeneracy_tol()
    op = assemble_loop_operator(spec, t_resolution)
    lam = np.linalg.eigvalsh(op.matrix)
    margin = float(np.abs(lam).min())
    return margin > tol, margin


def _cluster_gap(lam, tol):
    reps = []
    i = 0
    while i < len(lam):
        j = i + 1
        while j < len(lam) and lam[j] - lam[j - 1] <= tol:
            j += 1
        reps.append(lam[i:j].mean())
        i = j
    if len(reps) < 2:
        return np.inf
    return float(np.diff(reps).min())


def spectral_flow(path, steps=32, t_resolution=64, max_refinements=2000):
    """Signed count of eigenvalue crossings through zero along a spec path.

    ``path`` maps s in [0, 1] to a :class:`LoopOperatorSpec`.  Both endpoints
    must be nondegenerate.  The flow is accumulated as the per-step drop of
    the negative-eigenvalue count, with adaptive bisection whenever the
    spectrum moves more than half the minimal cluster gap in one step, so no
    crossing can be missed.
    """
    ok0, m0 = is_nondegenerate(path(0.0), t_resolution)
    ok1, m1 = is_nondegenerate(path(1.0), t_resolution)
    if not ok0 or not ok1:
        raise DegenerateEndError(
            f"path endpoints must be nondegenerate (margins {m0:.2e}, {m1:.2e})")

    def eigs(s):
        op = assemble_loop_operator(path(s), t_resolution)
        return np.linalg.eigvalsh(op.matrix)

    cache = {}

    def lam(s):
        key = round(s, 14)
        if key not in cache:
            cache[key] = eigs(s)
        return cache[key]

    flow = 0
    budget = max_refinements
    stack = [(i / steps, (i + 1) / steps) for i in reversed(range(steps))]
    while stack:
        a, b = stack.pop()
        la, lb = lam(a), lam(b)
        scale = 1.0 + max(np.abs(la).max(), np.abs(lb).max())
        ctol = 1e-6 * scale
        movement = float(np.abs(la - lb).max())
        gap = min(_cluster_gap(la, ctol), _cluster_gap(lb, ctol))
        if movement > 0.5 * gap and movement > 1e-9 * scale:
            budget -= 1
            if budget < 0:
                raise TrackingError("adaptive refinement exceeded the step budget")
            m = 0.5 * (a + b)
            stack.append((m, b))
            stack.append((a, m))
            continue
        flow += int(np.count_nonzero(la < 0.0)) - int(np.count_nonzero(lb < 0.0))
    return flow


def linear_path(spec0, spec1):
    """Linear interpolation between two constant-coefficient specs."""
    if spec0.dim != spec1.dim:
        raise CoefficientError("path endpoints have different dimensions")
    S0, S1 = spec0.constant_matrix(), spec1.constant_matrix()

    def path(s):
        return LoopOperatorSpec(dim=spec0.dim, period=spec0.period,
                                coeff=(1.0 - s) * S0 + s * S1)

    return path


def concatenate_paths(path_a, path_b):
    """Path traversing path_a on [0, 1/2] and path_b on [1/2, 1]."""

    def path(s):
        return path_a(2.0 * s) if s <= 0.5 else path_b(2.0 * s - 1.0)

    return path


def reversed_path(path):
    def rev(s):
        return path(1.0 - s)

    return rev
