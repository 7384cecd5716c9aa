"""Spins that tip a little between readouts.

Each spin is rotated by theta about x and then partially depolarized, which at
the sector level means each spin flips with probability
(1-lam) sin^2(theta) + lam/2. With N=100, w=5, lam=0.1 and theta=pi/32 we

* compare sampled histograms with the exact first and post-selected second
  outcome distributions,
* compare the lag-1 correlation of a strong and a weak readout.
"""

import math

import numpy as np

from spinnoise import (
    RotatingProductMap,
    RunConfig,
    conditional_matrix,
    correlation_exact,
    exact_joint,
    flip_probs_from_rotation,
    sample_trajectories,
    single_time_distribution,
)
from spinnoise.sectors import doubled_values, sector_index, total_variation

N, W, LAM, THETA = 100, 5.0, 0.1, math.pi / 32
spec = RotatingProductMap(LAM, THETA)
print("flip probability per interval:", flip_probs_from_rotation(LAM, THETA)[0])

cfg = RunConfig(N, spec, width=W, steps=2, trajectories=3000, seed=0)
d = doubled_values(N)

traj = sample_trajectories(cfg)
hist = np.array([(traj[:, 0] == x).mean() for x in d])
print(f"first readout: TV(histogram, exact) = {total_variation(hist, single_time_distribution(cfg, 1).probs):.4f}")

m1 = 10   # doubled units, i.e. m = 5
post = sample_trajectories(cfg, first_outcome=m1)
hist2 = np.array([(post[:, 1] == x).mean() for x in d])
exact2 = conditional_matrix(exact_joint(cfg, 2, 1))[:, sector_index(N, m1)]
print(f"second readout given m1={m1 // 2}: TV = {total_variation(hist2, exact2):.4f}, "
      f"mean {exact2 @ (d / 2):.3f}")

for width in (0.0, W):
    rho = correlation_exact(exact_joint(RunConfig(N, spec, width=width), 2, 1))
    print(f"lag-1 correlation, w={width}: {rho:.4f}")
