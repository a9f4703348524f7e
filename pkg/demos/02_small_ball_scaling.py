"""
Small-ball probabilities and data-driven bandwidths
===================================================

The kernel estimators live on the projected sample, so their effective
sample size at radius h is n * F(h), where F is the small-ball function
of the projected law.  This script shows F scaling like h^D near zero
and how the bandwidth rule exploits that to keep roughly 20 points in
every window at the smallest sample size.
"""

import numpy as np

from pcasmooth.experiments import BandwidthRule, RunConfig, bandwidth_schedule
from pcasmooth.kernels import (
    kernel,
    regular_variation_ratio,
    rv_index_estimate,
    small_ball_estimate,
)
from pcasmooth.synthetic import (
    ProcessSpec,
    generate_process,
    geometric_spectrum,
    projected_small_ball,
    true_projector,
)

spec = ProcessSpec(J=6, spectrum=geometric_spectrum(6, ratio=0.8, scale=0.006),
                   seed=1729)
D = 3
P = true_projector(spec, D)
X = generate_process(spec, 100_000)

# Empirical F at the origin for a ladder of radii, all small enough that
# the ball stays inside the support box.
radii = np.array([0.02, 0.025, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1])
curve = small_ball_estimate(X, np.zeros(6), P, radii)
for h, f_hat, f_exact in zip(radii, curve.values,
                             (projected_small_ball(spec, D, np.zeros(6), h) for h in radii)):
    print(f"h={h:.3f}  F_hat={f_hat:.5f}  F_exact={f_exact:.5f}")

# If F(h) ~ c h^D then F(su)/F(s) -> u^D.  With D=3: doubling the radius
# should multiply the mass by 8, halving it should divide by 8.
print("F(2s)/F(s) at s=0.05:", round(regular_variation_ratio(curve, 0.05, 2.0), 3),
      "(limit 8)")
print("F(s/2)/F(s) at s=0.05:", round(regular_variation_ratio(curve, 0.05, 0.5), 4),
      "(limit 0.125)")
print("fitted scaling index:", round(rv_index_estimate(curve), 3), "(truth 3)")

# The bandwidth rule solves M * n0 * F(h0) = 20 at the smallest n, then
# follows h ~ n^(-1/(2p+D)).  Windows widen in count even as h shrinks.
cfg = RunConfig(process=ProcessSpec(J=25, spectrum=geometric_spectrum(25), seed=7),
                D=3, kernel=kernel("naive"), n_grid=(250, 500, 1000, 2000, 4000),
                replications=1, bandwidth_rule=BandwidthRule("stone", p=2),
                anchors_per_run=1, seed=7)
for n, h in bandwidth_schedule(cfg).items():
    f = projected_small_ball(cfg.process, cfg.D, np.zeros(25), h)
    print(f"n={n:5d}  h={h:.4f}  expected points in window ~ {n * f:.1f}")
