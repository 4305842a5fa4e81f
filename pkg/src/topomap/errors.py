"""Exception types raised across the package."""

from __future__ import annotations

__all__ = [
    "TopomapError",
    "CapacityError",
    "CoverageError",
    "UnlocatableNodeError",
    "InfeasibleEvidenceError",
    "IsolatedRobotError",
    "InsufficientAnchorsError",
    "DegenerateGeometryError",
    "NumericalFailureError",
    "MetricUndefinedError",
    "RobotTrappedError",
    "MissingCountError",
]


class TopomapError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(TopomapError):
    """Scenario generation could not place the requested nodes (region too
    small for the count/spacing after the attempt budget)."""


class CoverageError(TopomapError):
    """A planner exhausted its step budget before hearing every node often
    enough. Carries the ids still below the required reception count."""

    def __init__(self, unheard_ids):
        self.unheard_ids = tuple(sorted(unheard_ids))
        super().__init__(f"coverage incomplete; unheard node ids: {self.unheard_ids}")


class UnlocatableNodeError(TopomapError):
    """A node produced no receptions at all, so it has no likelihood support."""

    def __init__(self, node_id):
        self.node_id = node_id
        super().__init__(f"node {node_id} was never received; cannot be located")


class InfeasibleEvidenceError(TopomapError):
    """Evidence is contradictory: the likelihood is zero at every grid vertex."""


class IsolatedRobotError(TopomapError):
    """The robot heard no neighbors, so it cannot estimate its own state."""


class InsufficientAnchorsError(TopomapError):
    """A sensor (or the whole run) has no anchor information to map from."""


class DegenerateGeometryError(TopomapError):
    """Anchor geometry does not determine a solution (collinear / coincident /
    inconsistent inputs)."""


class NumericalFailureError(TopomapError):
    """A filter covariance lost positive definiteness."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"numerical failure at step {step}")


class MetricUndefinedError(TopomapError):
    """A map metric cannot be evaluated (e.g. zero-length image line)."""


class RobotTrappedError(TopomapError):
    """Every candidate move around the robot is blocked."""


class MissingCountError(TopomapError):
    """An energy formula needs a count that was not supplied."""

    def __init__(self, field_name: str, algorithm: str):
        self.field_name = field_name
        super().__init__(f"energy formula for {algorithm!r} needs field {field_name!r}")
