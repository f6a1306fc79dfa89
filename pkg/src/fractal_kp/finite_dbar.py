"""Finite-N nonlocal dbar solves.

The rational function chi(lam) = 1 + (1/(pi N)) sum_j a_j/(lam - lam_j) is
pinned down by the nonlocal conditions a_j = r(lam_j) * chi(phi(lam_j)) with
phi a plane isometry mapping the pole family onto a disjoint copy.  Enforcing
the conditions row by row yields a dense linear system in the pole
coefficients; the two-family variant couples coefficient vectors on two
disjoint node families the same way.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cauchy_core import (
    PV_NONE,
    SolveReport,
    assemble_kernel,
    cauchy_eval,
    coincide_tolerance,
    solve_dense,
)
from .errors import DisjointnessError, FractalKPError
from .fractal_geometry import PointSet, min_pairwise_separation

#: warn when staggered families get closer than this fraction of the extent
PROXIMITY_WARN_REL = 1e-3


@dataclass(frozen=True)
class IsometrySpec:
    """Rigid motion phi(lam) = alpha*lam + beta with |alpha| = 1."""

    alpha: complex
    beta: complex = 0.0 + 0.0j

    def __post_init__(self):
        if abs(abs(self.alpha) - 1.0) > 1e-14:
            raise FractalKPError(
                f"|alpha| must be 1 (plane isometry), got |alpha|={abs(self.alpha)!r}"
            )

    def apply(self, z):
        return self.alpha * z + self.beta

    def inverse(self, z):
        return (z - self.beta) / self.alpha

    def map_point_set(self, ps: PointSet) -> PointSet:
        return PointSet(nodes=self.apply(ps.nodes), weight=ps.weight, provenance=ps.provenance)

    def unmap_point_set(self, ps: PointSet) -> PointSet:
        return PointSet(nodes=self.inverse(ps.nodes), weight=ps.weight, provenance=ps.provenance)


def certify_disjoint(a: PointSet, b: PointSet, tol: float, what: str) -> float:
    sep = min_pairwise_separation(a, b)
    if sep <= tol:
        raise DisjointnessError(
            f"{what}: minimum separation {sep:.3e} is within tolerance {tol:.3e}"
        )
    return sep


def _check_amplitudes(r, ps: PointSet, name: str) -> np.ndarray:
    r = np.asarray(r, dtype=complex)
    if r.shape != ps.nodes.shape:
        raise FractalKPError(f"{name} must be sampled at every node, one value each")
    if not np.all(np.isfinite(r)):
        raise FractalKPError(f"{name} contains non-finite samples")
    return r


@dataclass(frozen=True)
class OneComponentSolution:
    """Pole coefficients of chi on a single node family."""

    nodes: PointSet
    a: np.ndarray
    r: np.ndarray
    iso: IsometrySpec
    report: SolveReport


@dataclass(frozen=True)
class TwoComponentSolution:
    """Pole coefficients (a on Q-family, b on R-family) of the coupled solve.

    ``r2`` is sampled at the preimages phi^{-1}(mu_k) of the R-family nodes.
    """

    nodes_q: PointSet
    nodes_r: PointSet
    a: np.ndarray
    b: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    iso: IsometrySpec
    report: SolveReport


def solve_one_component(
    q: PointSet, r_at_nodes, iso: IsometrySpec
) -> OneComponentSolution:
    """Solve a_j - (r_j/(pi N)) sum_k a_k/(phi(lam_j) - lam_k) = r_j."""
    r = _check_amplitudes(r_at_nodes, q, "r")
    phi_q = iso.map_point_set(q)
    certify_disjoint(phi_q, q, coincide_tolerance(phi_q, q), "phi(Q) vs Q")
    kern = assemble_kernel(phi_q, q, pv=PV_NONE)
    n = q.count
    a_mat = np.eye(n, dtype=complex) - (r[:, None] / math.pi) * kern.entries
    a, report = solve_dense(a_mat, r)
    return OneComponentSolution(nodes=q, a=a, r=r, iso=iso, report=report)


def solve_two_component(
    q: PointSet,
    r_partner: PointSet,
    r1_at_nodes,
    r2_at_preimages,
    iso: IsometrySpec,
) -> TwoComponentSolution:
    """Coupled solve for coefficient vectors on two disjoint node families.

    The conditions a_j = r1(lam_j) chi(phi(lam_j)) and
    b_k = r2(phi^{-1}(mu_k)) chi(phi^{-1}(mu_k)) are enforced with chi carrying
    both pole families; every evaluation point must stay off both families.
    """
    r1 = _check_amplitudes(r1_at_nodes, q, "r1")
    r2 = _check_amplitudes(r2_at_preimages, r_partner, "r2")
    phi_q = iso.map_point_set(q)
    pre_r = iso.unmap_point_set(r_partner)

    tol = coincide_tolerance(phi_q, q)
    certify_disjoint(phi_q, q, tol, "phi(Q) vs Q")
    certify_disjoint(q, r_partner, tol, "Q vs R")
    sep = certify_disjoint(phi_q, r_partner, tol, "phi(Q) vs R")
    certify_disjoint(pre_r, q, tol, "phi^-1(R) vs Q")
    certify_disjoint(pre_r, r_partner, tol, "phi^-1(R) vs R")

    scale = max(q.extent(), r_partner.extent())
    if sep < PROXIMITY_WARN_REL * scale:
        warnings.warn(
            f"phi(Q) and R are only {sep:.3e} apart "
            f"(< {PROXIMITY_WARN_REL:g} of the extent); expect poor conditioning",
            RuntimeWarning,
            stacklevel=2,
        )

    k11 = assemble_kernel(phi_q, q, pv=PV_NONE)
    k12 = assemble_kernel(phi_q, r_partner, pv=PV_NONE)
    k21 = assemble_kernel(pre_r, q, pv=PV_NONE)
    k22 = assemble_kernel(pre_r, r_partner, pv=PV_NONE)

    nq, nr = q.count, r_partner.count
    m = np.eye(nq + nr, dtype=complex)
    m[:nq, :nq] -= (r1[:, None] / math.pi) * k11.entries
    m[:nq, nq:] -= (r1[:, None] / math.pi) * k12.entries
    m[nq:, :nq] -= (r2[:, None] / math.pi) * k21.entries
    m[nq:, nq:] -= (r2[:, None] / math.pi) * k22.entries
    rhs = np.concatenate([r1, r2])
    x, report = solve_dense(m, rhs)
    return TwoComponentSolution(
        nodes_q=q,
        nodes_r=r_partner,
        a=x[:nq],
        b=x[nq:],
        r1=r1,
        r2=r2,
        iso=iso,
        report=report,
    )


def eval_chi(sol, lam):
    """Evaluate the rational function of a solved system off its pole sets."""
    if isinstance(sol, OneComponentSolution):
        return cauchy_eval(lam, sol.nodes, sol.a)
    if isinstance(sol, TwoComponentSolution):
        part_q = cauchy_eval(lam, sol.nodes_q, sol.a)
        part_r = cauchy_eval(lam, sol.nodes_r, sol.b)
        return part_q + part_r - 1.0
    raise TypeError(f"cannot evaluate {type(sol).__name__}")


def nonlocal_residual(sol) -> float:
    """Largest violation of the defining conditions, relative to the
    coefficient sup-norm (absolute when the coefficients vanish)."""
    if isinstance(sol, OneComponentSolution):
        targets = sol.iso.apply(sol.nodes.nodes)
        lhs = sol.a
        rhs = sol.r * np.asarray(eval_chi(sol, targets))
        scale = np.abs(sol.a).max()
    elif isinstance(sol, TwoComponentSolution):
        t1 = sol.iso.apply(sol.nodes_q.nodes)
        t2 = sol.iso.inverse(sol.nodes_r.nodes)
        lhs = np.concatenate([sol.a, sol.b])
        rhs = np.concatenate(
            [
                sol.r1 * np.asarray(eval_chi(sol, t1)),
                sol.r2 * np.asarray(eval_chi(sol, t2)),
            ]
        )
        scale = np.abs(lhs).max()
    else:
        raise TypeError(f"cannot compute the residual of {type(sol).__name__}")
    err = float(np.abs(lhs - rhs).max())
    return err / scale if scale > 0.0 else err


def staggered_partner(q_partner_base: PointSet, iso: IsometrySpec) -> PointSet:
    """Default second family: the isometry applied to a companion family that
    shares the limit of Q but stays off it (midpoints / face centers)."""
    return iso.map_point_set(q_partner_base)


def solution_to_csv(sol) -> str:
    """CSV body of coefficients keyed by node (regression snapshots)."""
    lines = ["component,node_re,node_im,coeff_re,coeff_im"]

    def rows(tag, ps, vec):
        for z, c in zip(ps.nodes, vec):
            lines.append(f"{tag},{z.real!r},{z.imag!r},{c.real!r},{c.imag!r}")

    if isinstance(sol, OneComponentSolution):
        rows("q", sol.nodes, sol.a)
    elif isinstance(sol, TwoComponentSolution):
        rows("q", sol.nodes_q, sol.a)
        rows("r", sol.nodes_r, sol.b)
    else:
        raise TypeError(f"cannot serialise {type(sol).__name__}")
    return "\n".join(lines) + "\n"
