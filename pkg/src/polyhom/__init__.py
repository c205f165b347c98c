"""polyhom: numerical laboratory for Dirichlet problems with rapidly
oscillating boundary data g(x/eps) on convex polytopes.

Subpackages cover polytope geometry and Diophantine certification,
periodic boundary data, closed-form oscillatory face integrals, a 2-D
P1 finite-element solver with harmonic-measure and corner probes, and a
sweep harness that measures empirical convergence rates against the
theoretical exponents.
"""

from . import cli, errors, fem, geometry, harness, oscillatory, periodic

__all__ = ["cli", "errors", "fem", "geometry", "harness", "oscillatory", "periodic"]

__version__ = "0.1.0"
