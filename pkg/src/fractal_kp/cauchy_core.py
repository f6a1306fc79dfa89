"""Cauchy kernel matrices, Cauchy-sum evaluation, and the dense solve contract.

The kernel entry is K[j,k] = w_k / (t_j - s_k).  Principal values over the
discrete measures used here are realised by symmetric omission: entries with
|t_j - s_k| below a coincidence tolerance are dropped (and recorded), which is
the exact principal value for an atom sitting at the singularity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CoincidentNodesError, PoleEvaluationError, SingularSystemError
from .fractal_geometry import PointSet

PV_NONE = "none"
PV_OMIT_COINCIDENT = "omit-coincident"

#: tolerance factor for "these nodes coincide", relative to the set extent
COINCIDE_REL_TOL = 1e-12

#: declare a matrix numerically singular when 1/cond drops below this
SINGULAR_RCOND = float(np.finfo(float).eps)


def coincide_tolerance(targets: PointSet, sources: PointSet) -> float:
    scale = max(targets.extent(), sources.extent())
    if scale == 0.0:
        scale = max(np.abs(targets.nodes).max(), np.abs(sources.nodes).max(), 1.0)
    return COINCIDE_REL_TOL * scale


@dataclass(frozen=True)
class KernelMatrix:
    """Dense K[j,k] = w_k/(t_j - s_k) with its principal-value bookkeeping."""

    entries: np.ndarray
    targets: PointSet
    sources: PointSet
    pv_policy: str
    omitted: tuple[tuple[int, int], ...]
    coincide_tol: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.entries)):
            raise CoincidentNodesError([], self.coincide_tol)
        self.entries.setflags(write=False)


def assemble_kernel(
    targets: PointSet,
    sources: PointSet,
    pv: str = PV_NONE,
    coincide_tol: float | None = None,
) -> KernelMatrix:
    """Assemble K[j,k] = w_k/(t_j - s_k).

    With ``pv=PV_NONE`` any target/source pair closer than ``coincide_tol``
    is an error naming the offending indices.  With ``pv=PV_OMIT_COINCIDENT``
    such entries are set to zero and recorded in ``omitted``.
    """
    if pv not in (PV_NONE, PV_OMIT_COINCIDENT):
        raise ValueError(f"unknown pv policy {pv!r}")
    tol = coincide_tolerance(targets, sources) if coincide_tol is None else coincide_tol
    diff = targets.nodes[:, None] - sources.nodes[None, :]
    hits = np.abs(diff) < tol
    if hits.any():
        pairs = [(int(j), int(k)) for j, k in zip(*np.nonzero(hits))]
        if pv == PV_NONE:
            raise CoincidentNodesError(pairs, tol)
        diff = diff.copy()
        diff[hits] = np.inf
    else:
        pairs = []
    entries = sources.weight / diff
    if pairs:
        entries[hits] = 0.0
    return KernelMatrix(
        entries=entries,
        targets=targets,
        sources=sources,
        pv_policy=pv,
        omitted=tuple(pairs),
        coincide_tol=tol,
    )


def cauchy_eval(lam, sources: PointSet, coeffs, coincide_tol: float | None = None):
    """Evaluate 1 + (1/pi) sum_k w_k c_k / (lam - s_k).

    ``lam`` may be a scalar or an ndarray; evaluation at (or within the
    coincidence tolerance of) a source node is rejected.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape != sources.nodes.shape:
        raise ValueError("coefficient vector must match the source nodes")
    tol = coincide_tolerance(sources, sources) if coincide_tol is None else coincide_tol
    lam_arr = np.asarray(lam, dtype=complex)
    diff = lam_arr[..., None] - sources.nodes
    if np.abs(diff).min() < tol:
        raise PoleEvaluationError(
            f"evaluation point within {tol:.3e} of the singular support"
        )
    out = 1.0 + (sources.weight / math.pi) * (coeffs / diff).sum(axis=-1)
    return complex(out) if np.isscalar(lam) or np.ndim(lam) == 0 else out


@dataclass(frozen=True)
class SolveReport:
    residual_norm: float
    condition_estimate: float
    pivot_growth: float


class DenseFactorization:
    """LU factorization (partial pivoting) reusable across right-hand sides.

    Raises :class:`SingularSystemError` for exactly singular matrices and for
    matrices whose estimated reciprocal condition falls below
    ``SINGULAR_RCOND``.  Instances are cheap to query and must stay confined
    to the task that created them.
    """

    def __init__(self, a: np.ndarray, singular_rcond: float = SINGULAR_RCOND):
        a = np.ascontiguousarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        self._a = a
        anorm = float(np.linalg.norm(a, 1)) if a.size else 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(a)
        absdiag = np.abs(np.diag(lu))
        if absdiag.min() == 0.0:
            raise SingularSystemError("exactly singular pivot", float("inf"))
        gecon = scipy.linalg.get_lapack_funcs("gecon", (lu,))
        rcond, info = gecon(lu, anorm)
        if info != 0:
            raise SingularSystemError("condition estimation failed", float("inf"))
        self.condition_estimate = 1.0 / rcond if rcond > 0.0 else float("inf")
        maxa = np.abs(a).max()
        self.pivot_growth = float(np.abs(np.triu(lu)).max() / maxa) if maxa else 1.0
        if rcond < singular_rcond:
            raise SingularSystemError(
                "matrix is numerically singular", self.condition_estimate
            )
        self._lu = (lu, piv)

    @property
    def n(self) -> int:
        return self._a.shape[0]

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        return scipy.linalg.lu_solve(self._lu, b)

    def report_for(self, x, b) -> SolveReport:
        """Report with the residual recomputed independently of the solve."""
        return SolveReport(
            residual_norm=residual_norm(self._a, x, b),
            condition_estimate=self.condition_estimate,
            pivot_growth=self.pivot_growth,
        )


def residual_norm(a, x, b) -> float:
    """Relative residual max|Ax - b| / max|b| (zero right-hand side gives 0)."""
    r = np.abs(a @ x - np.asarray(b, dtype=complex)).max()
    scale = np.abs(b).max()
    return float(r / scale) if scale > 0.0 else float(r)


def solve_dense(a, b) -> tuple[np.ndarray, SolveReport]:
    """Solve A X = B (one or several right-hand sides) with diagnostics."""
    fac = DenseFactorization(a)
    x = fac.solve(b)
    return x, fac.report_for(x, b)
