"""Guided multi-turn task completion.

Seeded observation-action environments, a lifecycle-managed rule bank mined
from past trajectories, constraint-compliant action generation with fallback,
and a metrics engine for comparing agent variants across epochs.
"""

__version__ = "0.1.0"
