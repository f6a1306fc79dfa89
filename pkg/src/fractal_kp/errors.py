"""Exception types shared across the package."""


class FractalKPError(Exception):
    """Base class for all package-specific errors."""


class NodeBudgetError(FractalKPError):
    """Requested construction level would exceed the configured node budget."""


class DegenerateGeometryError(FractalKPError):
    """Geometric input is degenerate (collinear triangle, zero scale, ...)."""


class CoincidentNodesError(FractalKPError):
    """Target/source nodes coincide where a regular kernel was requested."""

    def __init__(self, pairs, tol):
        self.pairs = list(pairs)
        self.tol = tol
        shown = ", ".join(f"({j},{k})" for j, k in self.pairs[:8])
        more = "" if len(self.pairs) <= 8 else f" and {len(self.pairs) - 8} more"
        super().__init__(
            f"coincident target/source pairs within tol={tol:.3e}: {shown}{more}"
        )


class PoleEvaluationError(FractalKPError):
    """Pointwise evaluation requested on (or too close to) the singular support."""


class DisjointnessError(FractalKPError):
    """Point families that must be disjoint are not (or are too close to certify)."""


class SingularSystemError(FractalKPError):
    """Dense solve failed: the system is numerically singular."""

    def __init__(self, message, condition_estimate=float("inf")):
        self.condition_estimate = condition_estimate
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")


class AmplitudeSignError(FractalKPError):
    """Sampled amplitude values violate the declared sign constraint."""


class GridTooSmallError(FractalKPError):
    """Grid has too few points for the requested finite-difference stencil."""


class ConfigError(FractalKPError):
    """Configuration text failed validation; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations)
        )
