"""How fast do consecutive readouts forget each other?

Under collective depolarizing with mixing probability lam per interval, two
records k intervals apart are identical with probability (1-lam)^k and
independent otherwise. The covariance therefore decays as N/4 (1-lam)^k. The
script compares the exact chain, that closed form, and a Monte Carlo estimate
with its jackknife error, for a strong and a weak readout.
"""

from spinnoise import (
    RunConfig,
    CollectiveDepolarizing,
    covariance_closed_form,
    covariance_empirical,
    covariance_exact,
    exact_joint,
    sample_trajectories,
)

N, LAM = 40, 0.25

for width in (0.0, 3.0):
    cfg = RunConfig(N, CollectiveDepolarizing(LAM), width=width, steps=12, trajectories=4000, seed=1)
    traj = sample_trajectories(cfg, n_jobs=4)
    print(f"readout width w={width}")
    print(" lag   exact     closed    empirical")
    for k in (1, 2, 4, 8):
        exact = covariance_exact(exact_joint(cfg, 1 + k, 1))
        est, err = covariance_empirical(traj, k)
        print(f" {k:3d}  {exact:8.4f}  {covariance_closed_form(N, LAM, k):8.4f}  {est:8.4f} +- {err:.4f}")
    print()
