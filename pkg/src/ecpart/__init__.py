"""Output-oriented equivalence class inference for embedded firmware functions."""

__version__ = "0.1.0"
