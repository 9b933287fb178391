"""driftfluid: pseudo-spectral solvers and analysis for an anisotropic
quasineutral drift-fluid system on the unit torus.

Modules by role:

* spectral      Fourier fields, dealiased products, analytic norms
* poisson       anisotropic Poisson symbol solvers and force fields
* epsilon       time integration of the eps-dependent system
* oscillations  plasma-wave Duhamel formulas, filtering, correctors
* limit         the eps -> 0 limit system with the pressure closure
* ck            iterative solution construction in shrinking norms
* twostream     two-phase reduction and growth-rate analysis
* toymodel      multi-phase toy model, energy and relative entropy
* experiments   composite sweeps shared by tests and the CLI
* cli           batch runner with declarative JSON configs
"""

__version__ = "0.1.0"

from .errors import (
    AdmissibilityError,
    BlowUpError,
    ConfigError,
    InvariantError,
    SolvabilityError,
)
from .spectral import (
    Grid,
    NormParams,
    SpectralField,
    analytic_norm,
    derivative,
    forward,
    inverse,
    perp_average,
    product,
    shrinking_norm,
)

__all__ = [
    "__version__",
    "AdmissibilityError", "BlowUpError", "ConfigError", "InvariantError",
    "SolvabilityError",
    "Grid", "NormParams", "SpectralField", "analytic_norm", "derivative",
    "forward", "inverse", "perp_average", "product", "shrinking_norm",
]
