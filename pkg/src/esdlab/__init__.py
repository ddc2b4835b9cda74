"""Error suppression by derangement: simulation, estimators and experiments."""

from __future__ import annotations

__version__ = "0.1.0"
