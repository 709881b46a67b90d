"""Lower and upper bounds for min-cut vertex-separator partitioning."""
from __future__ import annotations

__version__ = "0.1.0"
