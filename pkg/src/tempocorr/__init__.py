"""Temporal correlations: sequential quantum measurements, macrorealism tests, quantum bounds and memory costs."""

from __future__ import annotations

__version__ = "0.1.0"
