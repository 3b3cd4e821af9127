"""firelog: firewall-log analytics workbench.

Two interlinked faces over one engine: a flow-based node graph for building
analysis pipelines over firewall logs (with automatic downstream updates),
and a per-IP cluster model for interactive exploration. The two exchange
data through CSV exports carrying a boolean anomaly column.
"""

from .table import AttributeKind, Column, LogTable, Schema

__version__ = "0.1.0"

__all__ = ["AttributeKind", "Column", "LogTable", "Schema", "__version__"]
