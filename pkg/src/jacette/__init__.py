"""jacette: a small data-spatial graph runtime.

Walkers traverse a typed graph held in a tiered store (session memory,
shared LRU cache, persistent files); actions are late-bound to local
functions or remote services, and an orchestrator picks the binding of
each action at runtime.
"""

from .errors import JacetteError
from .graph import Graph, Schema
from .lang import parse, pretty_print
from .runtime import Runtime, RunResult
from .storage import TierConfig, TieredStore

__version__ = "0.1.0"

__all__ = ["JacetteError", "Graph", "Schema", "parse", "pretty_print", "Runtime", "RunResult",
           "TierConfig", "TieredStore", "__version__"]
