"""Late-bound actions: local functions or remote line-protocol services."""

from .builtins import BUILTINS, ManifestEntry, default_manifest, impls_for, load_manifest, parse_manifest, synth_manifest
from .server import ActionServer, handle_line, serve_actions
from .table import LOCAL, ActionProfile, ActionSpec, ActionTable, DelayInjector, Local, Remote

__all__ = [
    "BUILTINS", "ManifestEntry", "default_manifest", "impls_for", "load_manifest", "parse_manifest", "synth_manifest",
    "ActionServer", "handle_line", "serve_actions",
    "LOCAL", "ActionProfile", "ActionSpec", "ActionTable", "DelayInjector", "Local", "Remote",
]
