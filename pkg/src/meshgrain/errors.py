"""Exception hierarchy shared by the simulator and the algorithms built on it."""


class MeshError(Exception):
    """Base class for every error raised by meshgrain."""


class ConfigError(MeshError, ValueError):
    """Invalid machine or algorithm configuration."""


class ConstraintViolation(MeshError):
    """A physical constraint of the machine model was broken.

    ``processor`` is the coordinate tuple of the offending processor (when
    known) and ``step`` the global step at which the violation was detected.
    """

    def __init__(self, message, processor=None, step=None):
        self.processor = tuple(int(c) for c in processor) if processor is not None else None
        self.step = step
        detail = []
        if self.processor is not None:
            detail.append(f"processor={self.processor}")
        if step is not None:
            detail.append(f"step={step}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)


class BudgetViolation(ConstraintViolation):
    """A processor holds more words than its word budget allows."""


class BandwidthViolation(ConstraintViolation):
    """More than ``link_width`` words crossed one directed link in one phase."""


class StructureViolation(ConstraintViolation):
    """Worker sets or regions that must be disjoint overlap."""


class NonHalting(MeshError):
    """A program ran past the configured step cap."""


class PlanError(ConfigError):
    """An algorithm plan cannot be realized on the requested mesh."""


class ScheduleError(ConfigError):
    """A nested-grid ring multiplication schedule cannot be built."""


class SizeError(ConfigError):
    """A distance matrix does not fit on the configured mesh."""


class NegativeCycleError(MeshError, ValueError):
    """A weight matrix contains a negative cycle."""


class UnreachableError(MeshError, LookupError):
    """A path was requested between vertices that are not connected."""
