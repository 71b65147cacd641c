"""Batch-parallel 2-3 trees on a simulated fork-join machine with read-modify-write cells."""

from __future__ import annotations

__version__ = "0.1.0"
