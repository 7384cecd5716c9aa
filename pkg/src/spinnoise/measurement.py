"""Collective magnetization measurements at sector level.

A measurement with outcomes ``m`` is described by the POVM elements
``E_m = sum_l D(m, l) Pi_l``. Because every ``E_m`` is diagonal in the sector
basis, the whole measurement reduces to the column-stochastic matrix ``D``:
``D[m, l]`` is the probability of recording ``m`` when the ensemble is in
sector ``l``. Strong (projective) measurement is ``D = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sectors import SectorDistribution, doubled_values, magnetizations, sector_index

__all__ = [
    "MeasurementKernel",
    "MeasurementRecord",
    "ValidationReport",
    "KernelError",
    "ImpossibleOutcomeError",
    "gaussian_kernel",
    "strong_kernel",
    "validate_kernel",
    "outcome_distribution",
    "posterior_update",
]

STOCHASTIC_TOL = 1e-12


class KernelError(ValueError):
    """A measurement kernel violates trace preservation."""


class ImpossibleOutcomeError(ValueError):
    """Conditioning on an outcome that has zero probability."""


@dataclass(frozen=True, eq=False)
class MeasurementKernel:
    """Outcome kernel ``D[m, l]`` with its column normalizers ``A_l``.

    ``width`` is the Gaussian width in magnetization units; ``0`` is the
    projective limit and ``math.inf`` the uninformative one.
    """

    n: int
    width: float
    matrix: np.ndarray
    normalizers: np.ndarray

    def __post_init__(self):
        for name in ("matrix", "normalizers"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.matrix.shape != (self.n + 1, self.n + 1):
            raise ValueError(f"kernel matrix must be {(self.n + 1,) * 2}, got {self.matrix.shape}")

    @property
    def is_strong(self):
        return self.width == 0

    @property
    def sqrt_matrix(self):
        """Entrywise square root: the diagonal of ``sqrt(E_m)`` per sector."""
        return np.sqrt(self.matrix)


@dataclass(frozen=True)
class MeasurementRecord:
    step: int
    outcome: int
    probability: float


@dataclass
class ValidationReport:
    """Result of checking a kernel against the POVM constraints.

    ``trace_preserving``: every column sums to one.
    ``interior_ok``: on the interior sectors, each row peaks on the diagonal
    and falls off monotonically away from it. Failures outside the interior
    are listed in ``warnings`` instead.
    """

    n: int
    width: float
    max_column_error: float
    trace_preserving: bool
    interior_limit: float
    interior_ok: bool
    interior_failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    max_asymmetry: float = 0.0

    @property
    def symmetric(self):
        return self.max_asymmetry <= STOCHASTIC_TOL

    @property
    def passed(self):
        return self.trace_preserving and self.interior_ok

    def to_dict(self):
        return {
            "n": self.n,
            "width": self.width if math.isfinite(self.width) else "inf",
            "max_column_error": self.max_column_error,
            "trace_preserving": self.trace_preserving,
            "interior_limit": self.interior_limit,
            "interior_ok": self.interior_ok,
            "interior_failures": self.interior_failures,
            "warnings": self.warnings,
            "max_asymmetry": self.max_asymmetry,
            "symmetric": self.symmetric,
            "passed": self.passed,
        }


def strong_kernel(n):
    return gaussian_kernel(n, 0.0)


def gaussian_kernel(n, width):
    """Truncated-Gaussian outcome kernel ``D(m, l) = A_l exp(-(m - l)^2 / 2 w^2)``.

    The normalizer ``A_l`` is the reciprocal of the explicit sum over the
    ``N + 1`` admissible outcomes, so columns are exactly stochastic also
    next to the boundaries ``m = +-N/2``.

    Parameters
    ----------
    n : int
        Number of spins.
    width : float
        Width ``w`` in magnetization units. ``0`` gives the projective kernel,
        ``math.inf`` the uniform kernel.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    width = float(width)
    if math.isnan(width) or width < 0:
        raise ValueError(f"kernel width must be >= 0, got {width}")
    size = n + 1
    if width == 0:
        return MeasurementKernel(n, 0.0, np.eye(size), np.ones(size))
    if math.isinf(width):
        return MeasurementKernel(n, math.inf, np.full((size, size), 1.0 / size), np.full(size, 1.0 / size))

    m = magnetizations(n)
    # (delta / w)**2 rather than delta**2 / w**2: w*w underflows for tiny widths
    with np.errstate(over="ignore"):
        gauss = np.exp(-0.5 * ((m[:, None] - m[None, :]) / width) ** 2)
    normalizers = 1.0 / gauss.sum(axis=0)
    matrix = gauss * normalizers[None, :]
    # exact column sums after rounding
    matrix /= matrix.sum(axis=0, keepdims=True)
    return MeasurementKernel(n, width, matrix, normalizers)


def _interior_limit(kernel):
    # in doubled units: |d| <= N - 2 ceil(4 w)
    if math.isinf(kernel.width):
        return -1
    return kernel.n - 2 * math.ceil(4 * kernel.width)


def validate_kernel(kernel):
    """Check a kernel against the POVM constraints.

    Column sums of one (trace preservation) are a hard requirement: a
    violation raises :class:`KernelError`. The peak condition
    (``argmax_l D(m, l) = m``) and monotone fall-off (``D(m, l)`` decreasing in
    ``|l - m|`` along rows and columns) are checked on the interior
    ``|l|, |m| <= N/2 - ceil(4 w)``; rows or columns that fail outside the
    interior become warnings. Symmetry is not required, so asymmetry is only
    recorded.
    """
    D = kernel.matrix
    col_err = float(np.max(np.abs(D.sum(axis=0) - 1.0)))
    if col_err > STOCHASTIC_TOL or np.any(D < 0):
        raise KernelError(
            f"kernel is not trace preserving: max |sum_m D(m,l) - 1| = {col_err:.3e}"
        )

    d = doubled_values(kernel.n)
    limit = _interior_limit(kernel)
    inside = np.abs(d) <= limit
    report = ValidationReport(
        n=kernel.n,
        width=kernel.width,
        max_column_error=col_err,
        trace_preserving=True,
        interior_limit=limit / 2.0,
        interior_ok=True,
        max_asymmetry=float(np.max(np.abs(D - D.T))),
    )
    if kernel.is_strong or math.isinf(kernel.width):
        return report

    def monotone_away(vec, centre):
        return bool(np.all(np.diff(vec[: centre + 1]) >= 0) and np.all(np.diff(vec[centre:]) <= 0))

    def problems_in(block):
        sub = D[np.ix_(block, block)]
        found = []
        for pos, idx in enumerate(block):
            row, col = sub[pos], sub[:, pos]
            dm = int(d[idx])
            if row.max() > row[pos]:
                found.append((idx, f"d={dm}: row maximum at d={int(d[block[np.argmax(row)]])}"))
            if not monotone_away(row, pos):
                found.append((idx, f"d={dm}: row not decreasing away from the diagonal"))
            if not monotone_away(col, pos):
                found.append((idx, f"d={dm}: column not decreasing away from the diagonal"))
        return found

    everything = np.arange(kernel.n + 1)
    interior = everything[inside]
    if interior.size:
        report.interior_failures = [msg for _, msg in problems_in(interior)]
    report.interior_ok = not report.interior_failures
    report.warnings = [msg for idx, msg in problems_in(everything) if not inside[idx]]
    return report


def _check_dims(kernel, q):
    if kernel.n != q.n:
        raise ValueError(f"kernel is for N={kernel.n} but distribution has N={q.n}")


def outcome_distribution(kernel, q):
    """Outcome probabilities ``P(m) = sum_l D(m, l) q(l)``."""
    _check_dims(kernel, q)
    return SectorDistribution.from_weights(q.n, kernel.matrix @ q.probs)


def posterior_update(kernel, q, outcome):
    """Sector distribution after recording ``outcome`` (doubled units).

    Uses the square-root update ``rho -> sqrt(E_m) rho sqrt(E_m) / P(m)``,
    which on sector mixtures reads ``q'(l) = D(m, l) q(l) / P(m)``.
    """
    _check_dims(kernel, q)
    row = kernel.matrix[sector_index(q.n, outcome)]
    weights = row * q.probs
    p = weights.sum()
    if not p > 0:
        raise ImpossibleOutcomeError(
            f"outcome d={outcome} has zero probability under the current state"
        )
    return SectorDistribution(q.n, weights / p)
