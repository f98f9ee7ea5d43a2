"""Exception types shared across the solver stack."""

from __future__ import annotations


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


class BlowUpError(RuntimeError):
    """Backward induction escaped its a priori sup-norm guard (CLI exit code 3)."""

    def __init__(self, node: int, value: float, guard: float, component: int | None = None):
        self.node = node
        self.value = value
        self.guard = guard
        self.component = component
        where = f"component {component}, " if component is not None else ""
        super().__init__(
            f"solution blow-up: {where}node {node}: max |Y| = {value:.6g} "
            f"exceeds guard {guard:.6g}"
        )


class StitchError(RuntimeError):
    """The guaranteed-contraction window cannot be laid out on the grid."""


class TerminalBoundError(ValueError):
    """Terminal data (or a stitched terminal field) violates its declared sup bound."""
