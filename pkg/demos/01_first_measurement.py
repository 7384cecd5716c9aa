"""First readout of an unpolarized ensemble, strong versus weak.

A projective readout of the maximally mixed state reproduces the binomial
sector weights, so the magnetization spreads by sqrt(N)/2. A Gaussian readout
of width w adds its own spread on top, and near the edges of the spectrum the
truncated kernel is no longer a clean Gaussian; ``validate_kernel`` reports
exactly where.
"""

import math

from spinnoise import (
    RunConfig,
    CollectiveDepolarizing,
    moments,
    single_time_distribution,
    validate_kernel,
)

N = 100

for width in (0.0, 2.0, 5.0):
    cfg = RunConfig(N, CollectiveDepolarizing(0.0), width=width)
    mom = moments(single_time_distribution(cfg, 1))
    expected = math.sqrt(N / 4 + width ** 2)
    print(f"w={width:3.1f}  mean={mom.mean:+.2e}  std={mom.std:.4f}  "
          f"(sqrt(N/4 + w^2) = {expected:.4f})")

report = validate_kernel(RunConfig(N, CollectiveDepolarizing(0.0), width=5.0).kernel)
print()
print(f"kernel N={N}, w=5: trace preserving={report.trace_preserving}, "
      f"interior |m| <= {report.interior_limit:g} clean={report.interior_ok}")
print(f"{len(report.warnings)} boundary warnings, e.g. {report.warnings[0]!r}")
