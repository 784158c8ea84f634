"""Thermal relaxation of a discretized real scalar field in a Brownian thermostat.

The package has two cross-validated halves:

* a classical one -- mode-space stochastic dynamics with per-trajectory
  heat/work accounting, plus the exact Gaussian (Lyapunov) moment oracle
  with entropy, entropy production, and Kullback-Leibler diagnostics;

* a quantum one -- the per-mode master equation obtained by canonical
  quantization (sandwiched double-commutator form), its 2x2 dissipator
  matrix and CPTP criterion, the GKSL reduction at detailed balance, and
  the quantum thermodynamic functionals (heat, work, von Neumann entropy,
  entropy production, relative entropies).

A scenario-driven CLI (``fieldbath``) runs classical/quantum experiments
from JSON configs and writes CSV tables, figures, and manifests.
"""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalError
from .lattice import (
    DerivativeOperator,
    LatticeSpec,
    ModeBasis,
    build_derivative,
    eigenbasis,
    from_modes,
    project_reality,
    to_modes,
)

__all__ = [
    "__version__",
    "ConfigError",
    "NumericalError",
    "LatticeSpec",
    "DerivativeOperator",
    "ModeBasis",
    "build_derivative",
    "eigenbasis",
    "to_modes",
    "from_modes",
    "project_reality",
]
