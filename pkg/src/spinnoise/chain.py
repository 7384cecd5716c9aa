"""Repeated measure-then-evolve sequences over the magnetization sectors.

The chain state is the full sector distribution ``q``. One round is::

    P(m)  = D q                 (predict)
    q    <- D[m] * q / P(m)     (condition on the sampled outcome)
    q    <- T q                 (evolve for one interval)

Outcomes alone are not Markov under weak measurement, so nothing here
shortcuts through an outcome-to-outcome matrix.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    ChannelSpec,
    CollectiveDepolarizing,
    EpsilonPolarizing,
    ProductMap,
    RotatingProductMap,
    transition_kernel,
)
from .measurement import (
    ImpossibleOutcomeError,
    gaussian_kernel,
    outcome_distribution,
)
from .sectors import (
    SectorDistribution,
    binomial_pmf,
    doubled_values,
    magnetizations,
    sector_index,
)

__all__ = [
    "MixedState",
    "ProductState",
    "SectorDensity",
    "RunConfig",
    "Trajectory",
    "JointDistribution",
    "initial_sector_distribution",
    "make_stream",
    "run_trajectory",
    "sample_trajectories",
    "eta",
    "single_time_distribution",
    "exact_joint",
    "joint_closed_form",
    "conditional_matrix",
    "covariance_exact",
    "correlation_exact",
    "covariance_closed_form",
    "covariance_empirical",
    "correlation_empirical",
    "joint_route",
    "break_even_spin_count",
]


# ---------------------------------------------------------------------------
# initial states and run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixedState:
    """The maximally mixed state ``1 / 2**N``."""


@dataclass(frozen=True)
class ProductState:
    """``rho^{(x)N}`` with ``rho = a|up><up| + (1-a)|dn><dn| + b|up><dn| + h.c.``

    The coherence ``b`` never shows up in z-measurement statistics; it is kept
    only so the dense oracle can build the full state.
    """

    a: float
    b: complex = 0j

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"up-spin population a must lie in [0, 1], got {self.a}")
        if abs(self.b) ** 2 > self.a * (1.0 - self.a) + 1e-15:
            raise ValueError("single-spin state with this coherence is not positive")


@dataclass(frozen=True)
class SectorDensity:
    """``sum_k q0(k) Pi_k / Tr[Pi_k]`` for a given sector distribution."""

    q0: tuple

    def __post_init__(self):
        q = SectorDistribution(len(self.q0) - 1, np.asarray(self.q0, dtype=float))
        object.__setattr__(self, "q0", tuple(float(x) for x in q.probs))


InitialState = MixedState | ProductState | SectorDensity


def initial_sector_distribution(spec, n):
    """Sector populations of an initial state."""
    if isinstance(spec, MixedState):
        return SectorDistribution.mixed(n)
    if isinstance(spec, ProductState):
        return SectorDistribution(n, binomial_pmf(n, spec.a))
    if isinstance(spec, SectorDensity):
        if len(spec.q0) != n + 1:
            raise ValueError(f"initial density has {len(spec.q0)} entries, expected {n + 1}")
        return SectorDistribution(n, np.array(spec.q0))
    raise TypeError(f"unsupported initial state {spec!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to run or propagate one measurement chain.

    ``width`` is the Gaussian kernel width in magnetization units (``0`` for
    strong measurement).
    """

    n: int
    channel: ChannelSpec
    width: float = 0.0
    steps: int = 2
    trajectories: int = 1
    seed: int = 0
    initial: InitialState = field(default_factory=MixedState)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.trajectories < 0:
            raise ValueError("trajectories must be non-negative")
        if self.width < 0:
            raise ValueError("kernel width must be >= 0")

    @property
    def kernel(self):
        return gaussian_kernel(self.n, self.width)

    @property
    def transition(self):
        return transition_kernel(self.channel, self.n)

    @property
    def initial_distribution(self):
        return initial_sector_distribution(self.initial, self.n)


@dataclass(frozen=True)
class Trajectory:
    index: int
    seed: int
    outcomes: tuple

    def __len__(self):
        return len(self.outcomes)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """``matrix[a, b] = P(m_i = d[a], m_j = d[b])`` for steps ``i > j``."""

    n: int
    i: int
    j: int
    matrix: np.ndarray

    @property
    def lag(self):
        return self.i - self.j

    @property
    def marginal_i(self):
        return self.matrix.sum(axis=1)

    @property
    def marginal_j(self):
        return self.matrix.sum(axis=0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def make_stream(seed, index):
    """Counter-based Philox stream keyed by ``(seed, trajectory index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _draw(probs, rng):
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, len(probs) - 1)


def run_trajectory(config, index, first_outcome=None, *, _kernels=None):
    """Sample one outcome sequence ``m_1 .. m_K`` (doubled units).

    ``first_outcome`` post-selects the first record: the chain is conditioned
    on it instead of sampling it, which is how a post-selected ensemble of
    second measurements is produced without rejection.
    """
    D, T = _kernels if _kernels is not None else (config.kernel.matrix, config.transition.matrix)
    n = config.n
    rng = make_stream(config.seed, index)
    d_vals = doubled_values(n)
    q = config.initial_distribution.probs.copy()
    outcomes = []
    for step in range(config.steps):
        predictive = D @ q
        if step == 0 and first_outcome is not None:
            k = sector_index(n, first_outcome)
            if not predictive[k] > 0:
                raise ImpossibleOutcomeError(f"first outcome d={first_outcome} has zero probability")
        else:
            k = _draw(predictive, rng)
        outcomes.append(int(d_vals[k]))
        q = D[k] * q
        q /= q.sum()
        q = T @ q
    return Trajectory(index, config.seed, tuple(outcomes))


def sample_trajectories(config, n_jobs=1, first_outcome=None):
    """Sample ``config.trajectories`` trajectories; returns an int array ``(trajectories, steps)``.

    Each trajectory owns its RNG stream, so results do not depend on
    ``n_jobs``.
    """
    kernels = (config.kernel.matrix, config.transition.matrix)

    def one(idx):
        return run_trajectory(config, idx, first_outcome, _kernels=kernels).outcomes

    indices = range(config.trajectories)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(one, indices))
    else:
        rows = [one(i) for i in indices]
    return np.array(rows, dtype=np.int64).reshape(config.trajectories, config.steps)


# ---------------------------------------------------------------------------
# exact propagation
# ---------------------------------------------------------------------------

def eta(lam, k):
    """Probability that records ``k`` intervals apart are independent.

    ``eta_k = lam + (1 - lam) eta_{k-1}`` with ``eta_0 = 0``.
    """
    if k < 0:
        raise ValueError("lag must be non-negative")
    value = 0.0
    for _ in range(k):
        value = lam + (1.0 - lam) * value
    return value


def _sector_before(config, step):
    # averaging over an unobserved outcome leaves q unchanged: sum_m D(m, l) = 1
    q = config.initial_distribution.probs
    T = config.transition.matrix
    for _ in range(step - 1):
        q = T @ q
    return q


def single_time_distribution(config, step):
    """Outcome distribution of the ``step``-th measurement (1-based)."""
    if step < 1:
        raise ValueError("steps are numbered from 1")
    q = SectorDistribution.from_weights(config.n, _sector_before(config, step))
    return outcome_distribution(config.kernel, q)


def exact_joint(config, i, j):
    """Exact joint distribution of the outcomes at steps ``i > j >= 1``.

    ``P(m_i, m_j) = D T^{i-j} diag(q_j) D^T`` where ``q_j`` is the sector
    distribution just before measurement ``j``.
    """
    if not i > j >= 1:
        raise ValueError(f"need i > j >= 1, got i={i}, j={j}")
    D = config.kernel.matrix
    T = config.transition.matrix
    weights = D.T * _sector_before(config, j)[:, None]    # [l, m_j] = D(m_j, l) q_j(l)
    for _ in range(i - j):
        weights = T @ weights
    matrix = D @ weights
    return JointDistribution(config.n, i, j, matrix / matrix.sum())


def _mixing_parts(config):
    ch = config.channel
    if isinstance(ch, CollectiveDepolarizing):
        return ch.lam, SectorDistribution.mixed(config.n).probs
    if isinstance(ch, EpsilonPolarizing):
        return ch.lam, np.asarray(ch.q_ref)
    raise ValueError("closed forms exist only for collective mixing channels")


def joint_closed_form(config, i, j):
    """Closed-form joint distribution for collective mixing channels.

    Uses ``T^k = (1-lam)^k 1 + eta_k q_ref 1^T``::

        P(m_i, m_j) = (1-lam)^k sum_l D(m_i,l) D(m_j,l) q_j(l) + eta_k P_ref(m_i) P(m_j)

    which for a stationary start (``q_j = q_ref``) and strong measurement is
    ``(1-lam)^k delta P(m_j) + eta_k P(m_i) P(m_j)``.
    """
    if not i > j >= 1:
        raise ValueError(f"need i > j >= 1, got i={i}, j={j}")
    lam, q_ref = _mixing_parts(config)
    k = i - j
    D = config.kernel.matrix
    q_j = _sector_before(config, j)
    p_j = D @ q_j
    overlap = (D * q_j[None, :]) @ D.T
    matrix = (1.0 - lam) ** k * overlap + eta(lam, k) * np.outer(D @ q_ref, p_j)
    return JointDistribution(config.n, i, j, matrix)


def conditional_matrix(joint):
    """``C[a, b] = P(m_i = d[a] | m_j = d[b])``; columns of impossible ``m_j`` are NaN."""
    pj = joint.marginal_j
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(pj[None, :] > 0, joint.matrix / pj[None, :], np.nan)


def _joint_moments(joint):
    m = magnetizations(joint.n)
    pi, pj = joint.marginal_i, joint.marginal_j
    mean_i, mean_j = m @ pi, m @ pj
    cov = float((m - mean_i) @ joint.matrix @ (m - mean_j))
    var_i = float(((m - mean_i) ** 2) @ pi)
    var_j = float(((m - mean_j) ** 2) @ pj)
    return cov, var_i, var_j


def covariance_exact(joint):
    """``E[M_i M_j] - E[M_i] E[M_j]`` from a joint distribution (hbar = 1 units)."""
    return _joint_moments(joint)[0]


def correlation_exact(joint):
    cov, var_i, var_j = _joint_moments(joint)
    return cov / math.sqrt(var_i * var_j)


def covariance_closed_form(n, lam, k, first_mean=0.0):
    """``R(k) = N/4 (1-lam)^k + (eta_k - 1) E[M; t1]^2`` for ``k >= 1``.

    With a mixed start (``first_mean = 0``) this is ``N/4 exp(-t_k / T)``.
    The expression is exact only when ``E[M_1^2] = N/4``; for a mixing chain
    the exact value is ``(1-lam)^k Var(M_1)``, which ``covariance_exact``
    returns for any start.
    """
    if k < 1:
        raise ValueError("the closed form is a k >= 1 quantity")
    return 0.25 * n * (1.0 - lam) ** k + (eta(lam, k) - 1.0) * first_mean ** 2


def _lag_pairs(trajectories, k):
    x = np.asarray(trajectories, dtype=float) / 2.0
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two trajectories")
    if not 0 <= k < x.shape[1]:
        raise ValueError(f"lag {k} needs trajectories longer than {k} steps")
    return x[:, : x.shape[1] - k], x[:, k:]


def _jackknife(stat, a):
    # a[r] holds additive sufficient statistics of trajectory r
    t = a.shape[0]
    total = a.sum(axis=0)
    full = stat(total)
    leave = stat(total[None, :] - a)
    err = math.sqrt((t - 1) / t * float(np.sum((leave - leave.mean()) ** 2)))
    return float(full), err


def covariance_empirical(trajectories, k):
    """Pooled lag-``k`` sample covariance with a delete-one-trajectory jackknife error.

    Returns ``(estimate, stderr)`` in magnetization units.
    """
    x, y = _lag_pairs(trajectories, k)
    # per-trajectory sufficient statistics: sum x, sum y, sum xy, pair count
    a = np.stack(
        [x.sum(1), y.sum(1), (x * y).sum(1), np.full(x.shape[0], x.shape[1], dtype=float)],
        axis=1,
    )

    def stat(s):
        c = s[..., 3]
        return s[..., 2] / c - (s[..., 0] / c) * (s[..., 1] / c)

    return _jackknife(stat, a)


def correlation_empirical(trajectories, k):
    """Pooled lag-``k`` sample correlation coefficient with jackknife error."""
    x, y = _lag_pairs(trajectories, k)
    per = x.shape[1]
    a = np.stack(
        [x.sum(1), y.sum(1), (x * y).sum(1), (x * x).sum(1), (y * y).sum(1),
         np.full(x.shape[0], per, dtype=float)],
        axis=1,
    )

    def stat(s):
        c = s[..., 5]
        mx, my = s[..., 0] / c, s[..., 1] / c
        cov = s[..., 2] / c - mx * my
        vx = s[..., 3] / c - mx * mx
        vy = s[..., 4] / c - my * my
        return cov / np.sqrt(vx * vy)

    return _jackknife(stat, a)


def joint_route(config):
    """Label of how the exact joint relates to a known closed form."""
    if isinstance(config.channel, (CollectiveDepolarizing, EpsilonPolarizing)):
        return "closed-form"
    if isinstance(config.channel, (ProductMap, RotatingProductMap)) and config.width == 0:
        return "product-chain"
    return "extension: weak measurement with product channel (exact chain, no closed form)"


# ---------------------------------------------------------------------------
# break-even ensemble size
# ---------------------------------------------------------------------------

def break_even_spin_count(flip_angle, polarization):
    """Largest ``N`` for which spin noise beats the steady-state Ernst-angle signal.

    ``N < (sqrt((1 - cos b) / (1 + cos b)) * eps)**-2``; the square root is
    evaluated as ``tan(b / 2)``. Returns ``math.inf`` for zero polarization.
    """
    if not 0.0 < flip_angle <= math.pi / 2:
        raise ValueError("flip angle must lie in (0, pi/2]")
    if not 0.0 <= polarization <= 1.0:
        raise ValueError("polarization must lie in [0, 1]")
    if polarization == 0.0:
        return math.inf
    bound = (math.tan(0.5 * flip_angle) * polarization) ** -2
    nearest = round(bound)
    if abs(bound - nearest) <= 1e-9 * bound:
        return int(nearest)
    return int(math.floor(bound))
