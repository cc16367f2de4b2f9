"""Growth constants of primitive lattice triangulations of strips.

Modules: ``enumeration`` (exact counts), ``series`` and ``systems`` (x-adic
series solutions), ``identities`` (symbolic checks), ``kernels`` and
``quadrature`` (kernel functions and node grids), ``nystrom`` (discrete
integral-equation solvers), ``capacity`` (root finding for the constants),
``asymptotics`` (extrapolation and bounds), ``cache`` and ``cli``.
"""

__version__ = "0.1.0"
