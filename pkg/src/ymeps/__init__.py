"""Numerical laboratory for glued SU(2) approximate-instanton connections.

Builds the two-chart connection family A(q) and its extension Atilde(q) for
q = (p, [g], lambda), evaluates the eps-deformed Yang-Mills functional, Sobolev
inner products, tangent fields and Gram-Schmidt bases, and verifies the
asymptotic eps-scaling of all of them by sweeps and log-log slope fits.
"""

__version__ = "0.1.0"
