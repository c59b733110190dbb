"""Aerial overwatch simulator.

Deterministic simulation of a multirotor that visual-servoes above
teleoperated ground vehicles, transfers between them using their shared
world-frame localization, and returns home -- plus the telemetry service
the operator console connects to.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
