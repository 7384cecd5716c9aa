"""Checking the sector engine against full density matrices.

For a handful of spins the 2^N x 2^N state can be propagated directly. The
cross-check walks every outcome branch for three readouts and compares
outcome distributions, posteriors, and whether each posterior is still
uniform inside its magnetization sector.

Collective mixing and incoherent flips keep states uniform in-sector, so the
two descriptions agree to rounding. A coherent rotation does not: coherences
created inside a sector survive the readout and turn into populations at the
next rotation, and from the third readout on the sector chain drifts away.
"""

import math

from spinnoise import (
    CollectiveDepolarizing,
    ProductMap,
    RotatingProductMap,
    RunConfig,
)
from spinnoise.oracle import crosscheck

cases = {
    "collective depolarizing, weak": RunConfig(6, CollectiveDepolarizing(0.3), width=1.0),
    "incoherent flips, strong": RunConfig(6, ProductMap(0.2, 0.1)),
    "rotation + depolarizing, weak": RunConfig(6, RotatingProductMap(0.1, math.pi / 32), width=1.0),
}

for name, cfg in cases.items():
    rep = crosscheck(cfg, steps=3)
    tv = ", ".join(f"{x:.1e}" for x in rep.tv_by_round)
    dev = ", ".join(f"{x:.1e}" for x in rep.deviation_by_round)
    print(f"{name:32s} TV per round [{tv}]  in-sector deviation [{dev}]")
