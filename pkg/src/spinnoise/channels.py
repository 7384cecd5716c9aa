"""Evolution channels and their action on magnetization sectors.

Every channel here maps a state that is uniform inside each sector onto a
state whose sector populations depend only on the input populations. The
action over one evolution interval is therefore a column-stochastic
``TransitionKernel`` with ``T[m', m]`` the probability of landing in sector
``m'`` from the uniform state of sector ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sectors import (
    Moments,
    SectorDistribution,
    binomial_pmf,
    magnetizations,
    sector_index,
)

__all__ = [
    "CollectiveDepolarizing",
    "EpsilonPolarizing",
    "ProductMap",
    "RotatingProductMap",
    "ChannelSpec",
    "TransitionKernel",
    "decay_probability",
    "flip_probs_from_rotation",
    "product_transition_kernel",
    "conditional_moments",
    "mixing_kernel",
    "transition_kernel",
    "apply_channel",
    "identity_kernel",
]


def _check_prob(name, value):
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def decay_probability(dt, t_relax):
    """Mixing probability ``lambda = 1 - exp(-dt / T)`` of one interval."""
    if t_relax <= 0 or dt < 0:
        raise ValueError("need dt >= 0 and T > 0")
    return -math.expm1(-dt / t_relax)


# ---------------------------------------------------------------------------
# declarative channel specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollectiveDepolarizing:
    """``rho -> (1 - lam) rho + lam * 1 / 2**N``."""

    lam: float

    def __post_init__(self):
        _check_prob("lambda", self.lam)


@dataclass(frozen=True)
class EpsilonPolarizing:
    """``rho -> (1 - lam) rho + lam * rho_ref``, relaxing toward a reference state.

    ``rho_ref = sum_k q_ref(k) Pi_k / Tr[Pi_k]``; its mean magnetization plays
    the role of the thermal polarization.
    """

    lam: float
    q_ref: tuple

    def __post_init__(self):
        _check_prob("lambda", self.lam)
        q = SectorDistribution(len(self.q_ref) - 1, np.asarray(self.q_ref, dtype=float))
        object.__setattr__(self, "q_ref", tuple(float(x) for x in q.probs))

    @classmethod
    def toward(cls, lam, q_ref):
        return cls(lam, tuple(np.asarray(q_ref, dtype=float)))

    @property
    def n(self):
        return len(self.q_ref) - 1

    @property
    def reference(self):
        return SectorDistribution(self.n, np.array(self.q_ref))

    @property
    def polarization(self):
        return float(np.dot(magnetizations(self.n), self.q_ref))


@dataclass(frozen=True)
class ProductMap:
    """Identical single-spin channel on every spin, seen through its flip probabilities.

    ``alpha`` is the up-to-down and ``beta`` the down-to-up flip probability.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        _check_prob("alpha", self.alpha)
        _check_prob("beta", self.beta)


@dataclass(frozen=True)
class RotatingProductMap:
    """Per-spin depolarization after an x-rotation: ``(1 - lam) U rho U^+ + lam 1/2``.

    ``U = exp(-i theta sigma_x)``, so a spin flips with probability
    ``sin(theta)**2`` under the rotation alone.
    """

    lam: float
    theta: float

    def __post_init__(self):
        _check_prob("lambda", self.lam)

    @property
    def flip_probs(self):
        return flip_probs_from_rotation(self.lam, self.theta)


ChannelSpec = CollectiveDepolarizing | EpsilonPolarizing | ProductMap | RotatingProductMap


def flip_probs_from_rotation(lam, theta):
    """Flip probabilities ``alpha = beta = (1 - lam) sin^2(theta) + lam / 2``."""
    _check_prob("lambda", lam)
    p = (1.0 - lam) * math.sin(theta) ** 2 + 0.5 * lam
    return p, p


# ---------------------------------------------------------------------------
# transition kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransitionKernel:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        arr = np.array(self.matrix, dtype=float)
        if arr.shape != (self.n + 1, self.n + 1):
            raise ValueError(f"transition matrix must be {(self.n + 1,) * 2}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    def column(self, d):
        return self.matrix[:, sector_index(self.n, d)]

    def __matmul__(self, other):
        if isinstance(other, TransitionKernel):
            if other.n != self.n:
                raise ValueError("kernel sizes differ")
            return TransitionKernel(self.n, self.matrix @ other.matrix)
        return NotImplemented


def identity_kernel(n):
    return TransitionKernel(n, np.eye(n + 1))


def product_transition_kernel(n, alpha, beta):
    """Sector kernel of ``Phi^{(x)N}`` with flip probabilities ``alpha``, ``beta``.

    From a uniform state with ``u`` up spins, ``k ~ Bin(u, alpha)`` up spins and
    ``l ~ Bin(N - u, beta)`` down spins flip, landing at ``u - k + l`` up spins.
    Each column is the convolution of the two binomials.
    """
    _check_prob("alpha", alpha)
    _check_prob("beta", beta)
    size = n + 1
    matrix = np.zeros((size, size))
    for u in range(size):
        down_flips = binomial_pmf(u, alpha)        # k
        up_flips = binomial_pmf(n - u, beta)       # l
        # index j of the convolution is l - k + u
        col = np.convolve(up_flips, down_flips[::-1])
        col = np.clip(col, 0.0, None)
        matrix[:, u] = col / col.sum()
    return TransitionKernel(n, matrix)


def conditional_moments(n, alpha, beta, d1):
    """Mean and std of the next outcome after a product map, given outcome ``d1``.

    With ``m1 = d1 / 2``::

        mean = m1 (1 - alpha - beta) + (N/2) (beta - alpha)
        var  = (N/2) (alpha(1-alpha) + beta(1-beta)) + m1 (alpha(1-alpha) - beta(1-beta))

    A positive ``alpha`` drains up spins, so the drift term carries
    ``beta - alpha``.
    """
    sector_index(n, d1)
    m1 = d1 / 2.0
    va, vb = alpha * (1 - alpha), beta * (1 - beta)
    mean = m1 * (1 - (alpha + beta)) + 0.5 * n * (beta - alpha)
    var = 0.5 * n * (va + vb) + m1 * (va - vb)
    return Moments(mean, math.sqrt(max(var, 0.0)))


def mixing_kernel(n, lam, q_ref):
    """``T = (1 - lam) 1 + lam q_ref 1^T``: every column relaxes toward ``q_ref``."""
    _check_prob("lambda", lam)
    if q_ref.n != n:
        raise ValueError(f"reference distribution has N={q_ref.n}, expected {n}")
    matrix = (1.0 - lam) * np.eye(n + 1) + lam * np.outer(q_ref.probs, np.ones(n + 1))
    return TransitionKernel(n, matrix)


@lru_cache(maxsize=64)
def _cached_kernel(spec, n):
    if isinstance(spec, CollectiveDepolarizing):
        return mixing_kernel(n, spec.lam, SectorDistribution.mixed(n))
    if isinstance(spec, EpsilonPolarizing):
        return mixing_kernel(n, spec.lam, spec.reference)
    if isinstance(spec, ProductMap):
        return product_transition_kernel(n, spec.alpha, spec.beta)
    if isinstance(spec, RotatingProductMap):
        return product_transition_kernel(n, *spec.flip_probs)
    raise TypeError(f"unsupported channel specification {spec!r}")


def transition_kernel(spec, n):
    """Sector transition kernel of ``spec`` for ``n`` spins (cached)."""
    if isinstance(spec, EpsilonPolarizing) and spec.n != n:
        raise ValueError(f"reference distribution has N={spec.n}, expected {n}")
    return _cached_kernel(spec, n)


def apply_channel(kernel, q):
    """Push a sector distribution through one evolution interval."""
    if kernel.n != q.n:
        raise ValueError(f"kernel is for N={kernel.n} but distribution has N={q.n}")
    return SectorDistribution.from_weights(q.n, kernel.matrix @ q.probs)
