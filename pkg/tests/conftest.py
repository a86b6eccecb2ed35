"""Shared test helpers."""

import numpy as np

from cylres.quadrature import gauss_legendre


def quad_pair(basis, l, m, fn, n=4096):
    """Brute-force quadrature oracle for transverse pair integrals."""
    cs = basis.cross_section
    x, w = gauss_legendre(n)
    y = 0.5 * cs.measure * (x + 1.0)
    vals = fn(y) * basis.mode(m)(y) * np.conj(basis.mode(l)(y))
    return complex(np.sum(vals * w) * 0.5 * cs.measure)
