"""Exception hierarchy shared across the package.

Graph errors carry a machine-readable ``reason`` slug so the HTTP layer can
surface them in 409 responses without string matching.
"""


class FirelogError(Exception):
    """Base class for all firelog errors."""


# --- log model ---------------------------------------------------------------

class UnknownColumnError(FirelogError):
    pass


class MissingRequiredColumnError(FirelogError):
    pass


class TableInvariantError(FirelogError):
    pass


# --- ingestion ---------------------------------------------------------------

class ParseError(FirelogError):
    pass


class MissingHeaderError(ParseError):
    pass


class UnmappedRequiredColumnError(ParseError):
    pass


class MalformedInputError(ParseError):
    """Raised when too many lines were rejected (wrong delimiter, etc.)."""


class EmptySampleError(ParseError):
    pass


class DuplicateParserError(FirelogError):
    pass


class UnsupportedFormatError(ParseError):
    pass


# --- dataflow ----------------------------------------------------------------

class GraphError(FirelogError):
    reason = "graph-violation"


class UnknownNodeKindError(GraphError):
    reason = "unknown-node-kind"


class DuplicateKindError(GraphError):
    reason = "duplicate-kind"


class UnknownNodeError(GraphError):
    reason = "unknown-node"


class InvalidConfigError(GraphError):
    reason = "invalid-config"


class CycleError(GraphError):
    reason = "cycle-detected"


class TypeMismatchError(GraphError):
    reason = "type-mismatch"


class PortOccupiedError(GraphError):
    reason = "port-occupied"


class UnknownPortError(GraphError):
    reason = "unknown-port"


class NodeEvaluationError(FirelogError):
    """Raised inside node evaluate(); captured as error status, never escapes
    the engine."""


# --- analytics ---------------------------------------------------------------

class EmptyTableError(FirelogError):
    pass


class NoAttributesSelectedError(FirelogError):
    pass


class KOutOfRangeError(FirelogError):
    pass


class LengthMismatchError(FirelogError):
    pass


class InsufficientRowsError(FirelogError):
    pass


class InsufficientDimsError(FirelogError):
    pass


# --- cluster model -----------------------------------------------------------

class UnknownClusterError(FirelogError):
    pass


class NonLeafSplitError(FirelogError):
    pass


class UnknownAttributeError(FirelogError):
    pass


class UnknownIpError(FirelogError):
    pass


class InvalidCidrError(FirelogError):
    pass


class InvalidRangeError(FirelogError):
    pass


class EmptyModelError(FirelogError):
    pass


class ColumnCollisionError(FirelogError):
    pass


class WorkingSetExceededError(FirelogError):
    """Tables beyond the supported working-set size are rejected outright
    instead of degrading silently."""
