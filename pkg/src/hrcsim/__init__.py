"""hrcsim: deterministic simulator for anticipatory robot-motion preview.

A robot action stack that plans arm trajectories and communicates each one
over two media: an anticipated (ghost) stream emitted ahead of time and the
real execution stream delayed behind it, plus an operator console protocol
and a metrics suite for collaboration experiments.
"""

from hrcsim.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
