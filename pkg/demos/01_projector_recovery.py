"""
Recovering a spectral projector from simulated curves
=====================================================

Draw samples of a random element with a known geometric eigenvalue
spectrum, estimate the covariance operator, and watch the rank-3
eigenprojector converge to the truth as the sample grows.
"""

import numpy as np

from pcasmooth.spectral import (
    eigen_localization,
    eigendecompose,
    empirical_covariance,
    hs_norm,
    projector_from,
    sup_norm,
)
from pcasmooth.synthetic import (
    ProcessSpec,
    generate_process,
    geometric_spectrum,
    true_decomposition,
    true_projector,
)

# The process lives in a 25-dimensional coefficient space with eigenvalues
# 1, 1/2, 1/4, ...  Coefficients are symmetric-uniform, so every draw obeys
# a hard norm bound and the first three directions carry ~87% of the energy.
spec = ProcessSpec(J=25, spectrum=geometric_spectrum(25, ratio=0.5), seed=424)
D = 3
truth = true_decomposition(spec)
P_true = true_projector(spec, D)

print("true eigenvalues (first 5):", np.round(truth.eigenvalues[:5], 4))

# One eigendecomposition per sample size, each on a fresh larger sample.
for n in (100, 400, 1600, 6400):
    X = generate_process(spec, n, seed=n)
    dec = eigendecompose(empirical_covariance(X))
    P_hat = projector_from(dec, D)
    print(f"n={n:5d}  sup err {sup_norm(P_hat - P_true):.4f}  "
          f"HS err {hs_norm(P_hat - P_true):.4f}  "
          f"rate sqrt(log n/n) {np.sqrt(np.log(n) / n):.4f}  "
          f"eigenvalues localized: {eigen_localization(dec, truth, D)}")

# The sup error sits below the Hilbert-Schmidt error (it always does), and
# both track sqrt(log n / n).  Localization says the top-D empirical
# eigenvalues landed in disjoint bands around the true ones, which is the
# event the equivalence theory conditions on.
