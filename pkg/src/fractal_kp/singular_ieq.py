"""Nystrom solves of the limiting singular integral equations on the node
family itself.

One family of quadrature nodes (weights 1/N) represents the measure; both
unknown densities f1 (poles on the family) and f2 (poles on its isometric
image) are collocated at the same nodes.  The same-family kernels
1/(t - s) and 1/(phi(t) - phi(s)) are principal values, realised by omitting
the coincident node; the cross kernels are regular because the family and its
image are disjoint.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cauchy_core import (
    PV_NONE,
    PV_OMIT_COINCIDENT,
    DenseFactorization,
    SolveReport,
    assemble_kernel,
    cauchy_eval,
    coincide_tolerance,
)
from .errors import FractalKPError
from .finite_dbar import IsometrySpec, certify_disjoint, _check_amplitudes
from .fractal_geometry import PointSet

#: dressed-amplitude dynamic range beyond which conditioning degrades
DYNAMIC_RANGE_WARN = 1e12


@dataclass(frozen=True)
class IEQSolution:
    """Density values at the quadrature nodes plus solve diagnostics.

    ``chi1`` is the coefficient of 1/lam in the large-lam expansion of the
    reconstructed function: (1/pi) sum w (f1 + f2).
    """

    nodes: PointSet
    f1: np.ndarray
    f2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    iso: IsometrySpec
    report: SolveReport
    chi1: complex

    @property
    def f(self) -> np.ndarray:
        """Single-density view (meaningful when f2 is identically zero)."""
        return self.f1


def solve_ieq1(q: PointSet, r_at_nodes, iso: IsometrySpec) -> IEQSolution:
    """Single-density equation: f_j - (r_j/(pi N)) sum_k f_k/(phi(t_j)-s_k) = r_j.

    On the discrete measure this linear system coincides with the finite
    nonlocal pole-condition system, which is the cross-check used in tests.
    """
    r = _check_amplitudes(r_at_nodes, q, "r")
    phi_q = iso.map_point_set(q)
    certify_disjoint(phi_q, q, coincide_tolerance(phi_q, q), "phi(Q) vs Q")
    kern = assemble_kernel(phi_q, q, pv=PV_NONE)
    n = q.count
    m = np.eye(n, dtype=complex) - (r[:, None] / math.pi) * kern.entries
    fac = DenseFactorization(m)
    f = fac.solve(r)
    report = fac.report_for(f, r)
    chi1 = complex((q.weight / math.pi) * f.sum())
    return IEQSolution(
        nodes=q,
        f1=f,
        f2=np.zeros_like(f),
        r1=r,
        r2=np.zeros_like(f),
        iso=iso,
        report=report,
        chi1=chi1,
    )


class Ieq23System:
    """Coupled two-density system with kernels assembled once and reused.

    The 2N x 2N matrix is I - D_r * K / pi where only the diagonal D_r (the
    amplitude samples) changes between solves; the four kernel blocks are
    immutable and safe to share across threads.
    """

    def __init__(self, q: PointSet, iso: IsometrySpec, coincide_tol: float | None = None):
        phi_q = iso.map_point_set(q)
        tol = coincide_tolerance(phi_q, q) if coincide_tol is None else coincide_tol
        certify_disjoint(phi_q, q, tol, "phi(Q) vs Q")
        self.q = q
        self.iso = iso
        self.phi_q = phi_q
        self.k11 = assemble_kernel(phi_q, q, pv=PV_NONE, coincide_tol=tol)
        self.k12 = assemble_kernel(phi_q, phi_q, pv=PV_OMIT_COINCIDENT, coincide_tol=tol)
        self.k21 = assemble_kernel(q, q, pv=PV_OMIT_COINCIDENT, coincide_tol=tol)
        self.k22 = assemble_kernel(q, phi_q, pv=PV_NONE, coincide_tol=tol)
        n = q.count
        self._kernel = np.empty((2 * n, 2 * n), dtype=complex)
        self._kernel[:n, :n] = self.k11.entries
        self._kernel[:n, n:] = self.k12.entries
        self._kernel[n:, :n] = self.k21.entries
        self._kernel[n:, n:] = self.k22.entries
        self._kernel.setflags(write=False)

    def solve(
        self,
        r1_at_nodes,
        r2_at_nodes,
        rebalance: bool = False,
        derivative_coeff=None,
    ):
        """Solve for (f1, f2); optionally also the x-derivative densities.

        Differentiating the system in a parameter that scales the amplitudes
        as dr1 = c*r1, dr2 = -c*r2 leaves the matrix unchanged, so the
        derivative densities solve the same factorization against the right
        hand side (c*f1, -c*f2); ``derivative_coeff`` supplies c.

        With ``rebalance`` the rows are equilibrated by 1/max(1, |r_j|), an
        exact reformulation that keeps matrix entries bounded when the dressed
        amplitudes span a huge dynamic range.

        Returns ``IEQSolution`` or ``(IEQSolution, dchi1)``.
        """
        q = self.q
        n = q.count
        r1 = _check_amplitudes(r1_at_nodes, q, "r1")
        r2 = _check_amplitudes(r2_at_nodes, q, "r2")
        r = np.concatenate([r1, r2])

        dyn = _dynamic_range(r)
        if dyn > DYNAMIC_RANGE_WARN and not rebalance:
            warnings.warn(
                f"dressed amplitudes span a dynamic range of {dyn:.3e}; "
                "expect conditioning loss (enable rebalancing)",
                RuntimeWarning,
                stacklevel=2,
            )

        if rebalance:
            row = 1.0 / np.maximum(1.0, np.abs(r))
        else:
            row = np.ones(2 * n)
        m = -(row * r)[:, None] / math.pi * self._kernel
        m[np.diag_indices_from(m)] += row
        fac = DenseFactorization(m)
        rhs = row * r
        x = fac.solve(rhs)
        report = fac.report_for(x, rhs)
        f1, f2 = x[:n], x[n:]
        chi1 = complex((q.weight / math.pi) * (f1.sum() + f2.sum()))
        sol = IEQSolution(
            nodes=q, f1=f1, f2=f2, r1=r1, r2=r2, iso=self.iso, report=report, chi1=chi1
        )
        if derivative_coeff is None:
            return sol
        c = np.asarray(derivative_coeff, dtype=complex)
        if c.shape != q.nodes.shape:
            raise FractalKPError("derivative coefficients must match the nodes")
        dx = fac.solve(row * np.concatenate([c * f1, -c * f2]))
        dchi1 = complex((q.weight / math.pi) * dx.sum())
        return sol, dchi1


def solve_ieq23(
    q: PointSet, r1_at_nodes, r2_at_nodes, iso: IsometrySpec, rebalance: bool = False
) -> IEQSolution:
    """Assemble and solve the coupled two-density system on ``q``."""
    return Ieq23System(q, iso).solve(r1_at_nodes, r2_at_nodes, rebalance=rebalance)


def chi_tilde_eval(sol: IEQSolution, lam, iso: IsometrySpec | None = None):
    """Evaluate 1 + (1/(pi N)) sum_k [f1_k/(lam-s_k) + f2_k/(lam-phi(s_k))]."""
    iso = sol.iso if iso is None else iso
    part1 = cauchy_eval(lam, sol.nodes, sol.f1)
    if not np.any(sol.f2):
        return part1
    phi_nodes = PointSet(
        nodes=iso.apply(sol.nodes.nodes), weight=sol.nodes.weight, provenance="mapped"
    )
    part2 = cauchy_eval(lam, phi_nodes, sol.f2)
    return part1 + part2 - 1.0


def ieq_residual(sol: IEQSolution) -> float:
    """Re-evaluate both collocation equations by direct summation and return
    the largest violation relative to the density sup-norm."""
    q = sol.nodes
    s = q.nodes
    phi_s = sol.iso.apply(s)
    w = q.weight

    def pv_sum(targets, sources, dens):
        d = targets[:, None] - sources[None, :]
        near = np.abs(d) < coincide_tolerance(q, q)
        d = np.where(near, np.inf, d)
        return (w * dens[None, :] / d).sum(axis=1)

    t1 = sol.r1 + (sol.r1 / math.pi) * (
        pv_sum(phi_s, s, sol.f1) + pv_sum(phi_s, phi_s, sol.f2)
    )
    t2 = sol.r2 + (sol.r2 / math.pi) * (
        pv_sum(s, s, sol.f1) + pv_sum(s, phi_s, sol.f2)
    )
    err = max(
        float(np.abs(sol.f1 - t1).max()),
        float(np.abs(sol.f2 - t2).max()),
    )
    scale = max(float(np.abs(sol.f1).max()), float(np.abs(sol.f2).max()))
    return err / scale if scale > 0.0 else err


def densities_to_csv(sol: IEQSolution) -> str:
    """CSV body of the density values keyed by node."""
    lines = ["node_re,node_im,f1_re,f1_im,f2_re,f2_im"]
    for z, v1, v2 in zip(sol.nodes.nodes, sol.f1, sol.f2):
        lines.append(
            f"{z.real!r},{z.imag!r},{v1.real!r},{v1.imag!r},{v2.real!r},{v2.imag!r}"
        )
    return "\n".join(lines) + "\n"


def _dynamic_range(r: np.ndarray) -> float:
    mags = np.abs(r)
    nonzero = mags[mags > 0.0]
    if nonzero.size == 0:
        return 1.0
    return float(nonzero.max() / nonzero.min())
