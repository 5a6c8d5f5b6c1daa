class ConvergenceError(RuntimeError):
    """A fixed-point iteration hit its cap before reaching the tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ObstacleNotReached(ValueError):
    """The double-obstacle problem has no contact point in [0, pi/2]."""


class ScenarioError(ValueError):
    """A scenario file could not be parsed into valid configurations."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where += f" key {key!r}"
        if line is not None:
            where += f" (line {line})"
        super().__init__(message + (":" + where if where else ""))
        self.key = key
        self.line = line


class ArtifactMismatch(ValueError):
    """A stored artifact was produced with different game parameters."""
