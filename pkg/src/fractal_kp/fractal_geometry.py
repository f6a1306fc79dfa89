"""Cantor / Sierpinski point families, uniform weights, embeddings, moment oracles.

All constructions run in exact rational arithmetic (interval endpoints are
dyadic-rational combinations, gasket vertices are integer barycentric indices)
and are rounded to floating point exactly once, so pairwise distinctness and
level-nesting are certifiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometryError, FractalKPError, NodeBudgetError

DEFAULT_NODE_BUDGET = 4096

CANTOR = "cantor"
SIERPINSKI = "sierpinski"

#: Equilateral triangle on the base segment [0, 1].
EQUILATERAL_BASE = (0.0 + 0.0j, 1.0 + 0.0j, 0.5 + 0.5j * math.sqrt(3.0))


@dataclass(frozen=True)
class FractalSpec:
    """Which fractal family to build, at which level, embedded where.

    ``embedding_p``/``embedding_q`` define the affine map z -> p*z + q applied
    to the canonical construction (Cantor on [0, 1], gasket on ``base``).
    ``eps`` is the removed middle fraction per Cantor step; unused for the
    gasket.
    """

    kind: str
    level: int
    eps: float = 1.0 / 3.0
    embedding_p: complex = 1.0 + 0.0j
    embedding_q: complex = 0.0 + 0.0j
    base: tuple[complex, complex, complex] = EQUILATERAL_BASE

    def __post_init__(self):
        if self.kind not in (CANTOR, SIERPINSKI):
            raise FractalKPError(f"unknown fractal kind {self.kind!r}")
        if self.level < 0:
            raise FractalKPError(f"level must be >= 0, got {self.level}")
        if self.kind == CANTOR and not 0.0 < self.eps < 1.0:
            raise FractalKPError(f"eps must lie in (0, 1), got {self.eps}")
        if self.embedding_p == 0:
            raise FractalKPError("embedding scale p must be nonzero")


@dataclass(frozen=True)
class PointSet:
    """Ordered distinct complex nodes carrying the uniform weight 1/N."""

    nodes: np.ndarray
    weight: float
    provenance: object = "explicit"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=complex)
        if nodes.ndim != 1 or nodes.size == 0:
            raise FractalKPError("PointSet needs a nonempty 1-d node array")
        if not np.all(np.isfinite(nodes)):
            raise FractalKPError("PointSet nodes must be finite")
        if np.unique(nodes).size != nodes.size:
            raise FractalKPError("PointSet nodes must be pairwise distinct")
        if abs(self.weight * nodes.size - 1.0) > 1e-12:
            raise FractalKPError("weights must sum to 1 (uniform probability)")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_nodes(cls, nodes, provenance: object = "explicit") -> "PointSet":
        nodes = np.asarray(nodes, dtype=complex)
        return cls(nodes=nodes, weight=1.0 / nodes.size, provenance=provenance)

    @property
    def count(self) -> int:
        return int(self.nodes.size)

    def extent(self) -> float:
        """Bounding-box diagonal; the length scale used for tolerances."""
        re, im = self.nodes.real, self.nodes.imag
        return math.hypot(re.max() - re.min(), im.max() - im.min())


@dataclass(frozen=True)
class IntervalList:
    """Disjoint, sorted closed intervals [l_i, r_i] on the real line."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        prev_r = -math.inf
        for l, r in self.intervals:
            if not l <= r:
                raise FractalKPError(f"interval [{l}, {r}] is inverted")
            if l <= prev_r:
                raise FractalKPError("intervals must be sorted and disjoint")
            prev_r = r

    def __len__(self):
        return len(self.intervals)


def _check_budget(count: int, budget: int, what: str):
    if count > budget:
        raise NodeBudgetError(
            f"{what} needs {count} nodes, over the budget of {budget} "
            "(dense solves downstream are O(N^3) per evaluation point)"
        )


def _exact_cantor_intervals(eps: Fraction, n: int) -> list[tuple[Fraction, Fraction]]:
    rho = (1 - eps) / 2
    intervals = [(Fraction(0), Fraction(1))]
    for _ in range(n):
        nxt = []
        for l, r in intervals:
            d = (r - l) * rho
            nxt.append((l, l + d))
            nxt.append((r - d, r))
        intervals = nxt
    return intervals


def _validate_cantor_args(eps, n) -> Fraction:
    eps_exact = Fraction(eps)
    if not 0 < eps_exact < 1:
        raise FractalKPError(f"eps must lie in (0, 1), got {eps}")
    if n < 0:
        raise FractalKPError(f"level must be >= 0, got {n}")
    return eps_exact


def cantor_intervals(eps, n: int, budget: int = DEFAULT_NODE_BUDGET) -> IntervalList:
    """Closed intervals of the n-th middle-``eps`` removal step on [0, 1].

    Level n has 2^n intervals of length rho^n, rho = (1-eps)/2; each step
    removes the open middle fraction ``eps`` of every interval.
    """
    eps_exact = _validate_cantor_args(eps, n)
    _check_budget(2**n, budget, f"cantor_intervals(level={n})")
    exact = _exact_cantor_intervals(eps_exact, n)
    return IntervalList(tuple((float(l), float(r)) for l, r in exact))


def cantor_endpoints(eps, n: int, budget: int = DEFAULT_NODE_BUDGET) -> PointSet:
    """The 2^(n+1) interval endpoints at level n, ascending, uniform weights."""
    eps_exact = _validate_cantor_args(eps, n)
    _check_budget(2 ** (n + 1), budget, f"cantor_endpoints(level={n})")
    exact = _exact_cantor_intervals(eps_exact, n)
    points = sorted({p for interval in exact for p in interval})
    nodes = np.array([float(p) for p in points], dtype=complex)
    return PointSet.from_nodes(nodes, provenance=FractalSpec(CANTOR, n, float(eps)))


def cantor_midpoints(eps, n: int, budget: int = DEFAULT_NODE_BUDGET) -> PointSet:
    """Midpoints of the 2^n level-n intervals; disjoint from the endpoints at
    every level yet converging to the same limiting measure."""
    eps_exact = _validate_cantor_args(eps, n)
    _check_budget(2**n, budget, f"cantor_midpoints(level={n})")
    exact = _exact_cantor_intervals(eps_exact, n)
    mids = sorted((l + r) / 2 for l, r in exact)
    nodes = np.array([float(m) for m in mids], dtype=complex)
    return PointSet.from_nodes(nodes, provenance="cantor-midpoints")


def _subdivide(tri):
    (a, b, c) = tri
    mab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
    mbc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
    mca = ((c[0] + a[0]) // 2, (c[1] + a[1]) // 2)
    return [(a, mab, mca), (mab, b, mbc), (mca, mbc, c)]


def _gasket_triangles(n: int):
    """Level-n gasket triangles as integer index pairs over denominator 2^n."""
    scale = 2**n
    triangles = [((0, 0), (scale, 0), (0, scale))]
    for _ in range(n):
        triangles = [t for tri in triangles for t in _subdivide(tri)]
    return triangles, scale


def _check_base(base) -> tuple[complex, complex, complex]:
    v0, v1, v2 = (complex(v) for v in base)
    cross = ((v1 - v0).conjugate() * (v2 - v0)).imag
    if cross == 0.0:
        raise DegenerateGeometryError("gasket base triangle is collinear")
    return v0, v1, v2


def sierpinski_vertex_count(n: int) -> int:
    """Vertex count at level n: v_{n+1} = 3 v_n - 3 with v_0 = 3."""
    return (3 ** (n + 1) + 3) // 2


def sierpinski_vertices(
    n: int,
    base: Sequence[complex] = EQUILATERAL_BASE,
    budget: int = DEFAULT_NODE_BUDGET,
) -> PointSet:
    """All triangle vertices of the level-n gasket iteration, uniform weights.

    Vertices are deduplicated on exact integer barycentric indices and ordered
    lexicographically by index, so the ordering is embedding-independent.
    """
    if n < 0:
        raise FractalKPError(f"level must be >= 0, got {n}")
    v0, v1, v2 = _check_base(base)
    _check_budget(sierpinski_vertex_count(n), budget, f"sierpinski_vertices(level={n})")
    triangles, scale = _gasket_triangles(n)
    indices = sorted({corner for tri in triangles for corner in tri})
    nodes = np.array(
        [v0 + (i / scale) * (v1 - v0) + (j / scale) * (v2 - v0) for i, j in indices],
        dtype=complex,
    )
    return PointSet.from_nodes(nodes, provenance=FractalSpec(SIERPINSKI, n, base=(v0, v1, v2)))


def sierpinski_face_centers(
    n: int,
    base: Sequence[complex] = EQUILATERAL_BASE,
    budget: int = DEFAULT_NODE_BUDGET,
) -> PointSet:
    """Centroids of the 3^n level-n gasket triangles; disjoint from the vertex
    sets at every level, same limiting measure."""
    if n < 0:
        raise FractalKPError(f"level must be >= 0, got {n}")
    v0, v1, v2 = _check_base(base)
    _check_budget(3**n, budget, f"sierpinski_face_centers(level={n})")
    triangles, scale = _gasket_triangles(n)
    nodes = []
    for (a, b, c) in triangles:
        i = Fraction(a[0] + b[0] + c[0], 3 * scale)
        j = Fraction(a[1] + b[1] + c[1], 3 * scale)
        nodes.append(v0 + float(i) * (v1 - v0) + float(j) * (v2 - v0))
    nodes.sort(key=lambda z: (z.real, z.imag))
    return PointSet.from_nodes(np.array(nodes, dtype=complex), provenance="gasket-centers")


def embed(ps: PointSet, p: complex, q: complex) -> PointSet:
    """Map nodes through z -> p*z + q; weights are untouched."""
    if p == 0:
        raise FractalKPError("embedding scale p must be nonzero")
    return PointSet(nodes=p * ps.nodes + q, weight=ps.weight, provenance=ps.provenance)


def generate_nodes(spec: FractalSpec, budget: int = DEFAULT_NODE_BUDGET) -> PointSet:
    """Endpoint/vertex family of ``spec``, with its embedding applied."""
    if spec.kind == CANTOR:
        ps = cantor_endpoints(spec.eps, spec.level, budget=budget)
    else:
        ps = sierpinski_vertices(spec.level, base=spec.base, budget=budget)
    return embed(ps, spec.embedding_p, spec.embedding_q)


def generate_partner_nodes(spec: FractalSpec, budget: int = DEFAULT_NODE_BUDGET) -> PointSet:
    """Companion family (interval midpoints / face centers) for staggered
    two-family solves, with the same embedding applied."""
    if spec.kind == CANTOR:
        ps = cantor_midpoints(spec.eps, spec.level, budget=budget)
    else:
        ps = sierpinski_face_centers(spec.level, base=spec.base, budget=budget)
    return embed(ps, spec.embedding_p, spec.embedding_q)


def empirical_moment(ps: PointSet, k: int) -> complex:
    """k-th moment (1/N) sum node^k of the uniform point measure."""
    if k < 0:
        raise FractalKPError(f"moment order must be >= 0, got {k}")
    return complex(np.mean(ps.nodes**k))


def cantor_moment_oracle(eps, k: int) -> float:
    """Exact k-th moment of the limiting middle-``eps`` measure on [0, 1].

    Solves the self-similarity recursion: X equals rho*X' or (1-rho) + rho*X'
    with probability 1/2 each, rho = (1-eps)/2.  Moments follow exactly by
    binomial expansion; evaluated in rational arithmetic.
    """
    eps_exact = _validate_cantor_args(eps, 0)
    if k < 0:
        raise FractalKPError(f"moment order must be >= 0, got {k}")
    rho = (1 - eps_exact) / 2
    moments = [Fraction(1)]
    for m in range(1, k + 1):
        acc = Fraction(0)
        for i in range(m):
            acc += math.comb(m, i) * (1 - rho) ** (m - i) * rho**i * moments[i]
        moments.append(acc / (2 * (1 - rho**m)))
    return float(moments[k])


def min_pairwise_separation(a: PointSet, b: PointSet) -> float:
    """min |a_i - b_j| over all pairs; 0 signals a shared point."""
    x = a.nodes
    y = b.nodes
    best = math.inf
    # chunk the pairwise table so 4096x4096 fits comfortably
    step = max(1, 2**22 // max(1, y.size))
    for lo in range(0, x.size, step):
        d = np.abs(x[lo : lo + step, None] - y[None, :])
        best = min(best, float(d.min()))
    return best


def point_set_to_csv(ps: PointSet) -> str:
    """CSV body (re, im, weight) with shortest-roundtrip float formatting."""
    lines = ["re,im,weight"]
    for z in ps.nodes:
        lines.append(f"{z.real!r},{z.imag!r},{ps.weight!r}")
    return "\n".join(lines) + "\n"
