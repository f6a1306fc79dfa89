"""Built-in amplitude-function families, sampled at spectral nodes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AmplitudeSignError, FractalKPError
from .fractal_geometry import PointSet

CONSTANT = "constant"
POLYNOMIAL = "polynomial"
GAUSSIAN_BUMP = "gaussian-bump"
TABLE_LOOKUP = "table-lookup"

SIGN_NONE = "none"
SIGN_NON_NEGATIVE = "non-negative"
SIGN_NON_POSITIVE = "non-positive"

FAMILIES = (CONSTANT, POLYNOMIAL, GAUSSIAN_BUMP, TABLE_LOOKUP)
SIGN_CONSTRAINTS = (SIGN_NONE, SIGN_NON_NEGATIVE, SIGN_NON_POSITIVE)


@dataclass(frozen=True)
class AmplitudeSpec:
    """One evaluable amplitude function on the spectral variable.

    families:
      constant       value
      polynomial     coeffs (ascending powers of s)
      gaussian-bump  amplitude * exp(-((s - center)/width)^2)
      table-lookup   values listed per node, matched by index
    """

    family: str
    value: complex = 0.0 + 0.0j
    coeffs: tuple = ()
    amplitude: complex = 1.0 + 0.0j
    center: complex = 0.0 + 0.0j
    width: float = 1.0
    values: tuple = ()
    sign_constraint: str = SIGN_NONE

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise FractalKPError(f"unknown amplitude family {self.family!r}")
        if self.sign_constraint not in SIGN_CONSTRAINTS:
            raise FractalKPError(f"unknown sign constraint {self.sign_constraint!r}")
        if self.family == GAUSSIAN_BUMP and self.width <= 0.0:
            raise FractalKPError("gaussian-bump width must be positive")

    @classmethod
    def zero(cls) -> "AmplitudeSpec":
        return cls(family=CONSTANT, value=0.0)


def sample(spec: AmplitudeSpec, nodes: PointSet) -> np.ndarray:
    """Evaluate the family at every node and enforce the sign constraint."""
    s = nodes.nodes
    if spec.family == CONSTANT:
        vals = np.full(s.size, complex(spec.value))
    elif spec.family == POLYNOMIAL:
        vals = np.zeros(s.size, dtype=complex)
        for k, ck in enumerate(spec.coeffs):
            vals += complex(ck) * s**k
    elif spec.family == GAUSSIAN_BUMP:
        vals = complex(spec.amplitude) * np.exp(-(((s - complex(spec.center)) / spec.width) ** 2))
    else:  # table lookup, matched by node index
        if len(spec.values) != s.size:
            raise FractalKPError(
                f"table-lookup needs exactly {s.size} values, got {len(spec.values)}"
            )
        vals = np.array([complex(v) for v in spec.values])
    _enforce_sign(vals, spec.sign_constraint)
    return vals


def _enforce_sign(vals: np.ndarray, constraint: str):
    if constraint == SIGN_NONE:
        return
    bad = []
    if np.any(vals.imag != 0.0):
        bad.append("values must be exactly real")
    if constraint == SIGN_NON_NEGATIVE and np.any(vals.real < 0.0):
        bad.append("values must be >= 0")
    if constraint == SIGN_NON_POSITIVE and np.any(vals.real > 0.0):
        bad.append("values must be <= 0")
    if bad:
        raise AmplitudeSignError(
            f"sign constraint {constraint!r} violated: " + "; ".join(bad)
        )
