"""Exception hierarchy."""


class ExtBddError(Exception):
    pass


class PreconditionError(ExtBddError, ValueError):
    """An argument violates the documented precondition of an operation."""


class IntegrityError(ExtBddError):
    """A file or stream does not describe a well-formed (unreduced) BDD."""


class CapacityError(ExtBddError):
    """A label or identifier does not fit in its bit field."""


class ConfigurationError(ExtBddError, ValueError):
    pass


class StateError(ExtBddError, RuntimeError):
    """Package lifecycle misuse (double init, use after deinit, ...)."""


class ProtocolError(ExtBddError, RuntimeError):
    """A priority queue was driven outside its level-by-level protocol."""


class EmptyQueueError(ExtBddError, IndexError):
    pass


class EndOfStream(ExtBddError, IndexError):
    pass
