"""Numerical laboratory for nonlocal constraints.

* :mod:`nonlocal_lab.constraints` - constraint functionals and conservation audits
* :mod:`nonlocal_lab.cylinder` - wave equation on a time-compactified cylinder
* :mod:`nonlocal_lab.mechanics` - N-body system with zero total momentum
* :mod:`nonlocal_lab.bell` - hidden-variable models, CHSH and Monte Carlo
* :mod:`nonlocal_lab.cli` - the ``nonlocal-lab`` command
"""

__version__ = "0.1.0"

from .errors import NumericalError, UsageError  # noqa: E402,F401
