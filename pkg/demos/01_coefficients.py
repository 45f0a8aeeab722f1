"""
Rate matrices and the closeness condition
=========================================

A three-species mixture (a vacancy-like species 0 plus two tracers) is
described by one exchange rate per pair. Everything the solver needs
follows from the largest and smallest rate.
"""

import numpy as np

from volfill.coefficients import (
    assemble_A,
    assemble_PB,
    check_closeness,
    coercivity_certificate,
    contraction_factor,
    from_pairs,
    min_symmetric_eigenvalue,
)

# each unordered pair is given once and mirrored internally
c = from_pairs(2, {(0, 1): 1.0, (0, 2): 1.1, (1, 2): 0.95})
print(f"K = {c.k_mean:.4f}, kappa = {c.kappa:.4f}")

holds, margin = check_closeness(c)
print(f"K - 2 n kappa = {margin:.4f} -> {'holds' if holds else 'fails'}")
print(f"Picard contraction factor 2 n kappa / K = {contraction_factor(c):.4f}")

# the reduced diffusion matrix is not symmetric, and not obviously positive
A = assemble_A(c, [0.3, 0.4])
print("A(0.3, 0.4) =\n", np.round(A, 4))

# the perturbation form K I - B(u) has a coercive symmetric part instead
M = assemble_PB(c, np.full(3, 1 / 3))
print(f"min eig of sym(K I - B) at the centre: {min_symmetric_eigenvalue(M):.4f}")

# the symmetric part is affine in u, so checking cube vertices is a proof;
# random interior points are a sanity check on top
cert = coercivity_certificate(c, n_random=1000, rng=0)
print(f"vertex minimum {cert['vertex_min']:.4f}, interior minimum {cert['interior_min']:.4f}, bound {cert['bound']:.4f}")

# a set that violates the condition: the solver will refuse it
bad = from_pairs(2, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 2.0})
print(f"bad set: margin {check_closeness(bad)[1]:+.3f}, factor {contraction_factor(bad):.3f}")
