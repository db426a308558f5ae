"""Exception hierarchy shared by all depthbench modules."""


class DepthBenchError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DepthBenchError, ValueError):
    pass


class EmptyMask(DepthBenchError, ValueError):
    """No pixel survives the validity mask."""


class NonPositiveDepth(DepthBenchError, ValueError):
    pass


class DomainError(DepthBenchError, ValueError):
    pass


class InsufficientGeometry(DepthBenchError, ValueError):
    """Not a single usable point triplet could be sampled."""


class FormatError(DepthBenchError, ValueError):
    pass


class ConfigError(DepthBenchError, ValueError):
    pass


class NotCollapsible(DepthBenchError, ValueError):
    pass


class GraphError(DepthBenchError, ValueError):
    """Graph validation or execution failure tied to a node."""

    def __init__(self, message, node_id=None):
        self.node_id = node_id
        if node_id is not None:
            message = f"node {node_id!r}: {message}"
        super().__init__(message)
