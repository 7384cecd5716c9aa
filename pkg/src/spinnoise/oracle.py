"""Brute-force density-matrix reference for small ensembles.

Works with full ``2**N x 2**N`` states in the computational basis. Bit ``s``
of a basis index (most significant first) is ``0`` for spin up and ``1`` for
spin down. Everything diagonal (projectors, POVM elements and their square
roots) is stored as a real vector; states are full complex matrices.

This module deliberately shares nothing with the sector engine except the
specification objects and the outcome kernel ``D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    CollectiveDepolarizing,
    EpsilonPolarizing,
    ProductMap,
    RotatingProductMap,
)
from .chain import MixedState, ProductState, SectorDensity
from .measurement import ImpossibleOutcomeError
from .sectors import total_variation

__all__ = [
    "MAX_N",
    "DenseState",
    "DensePOVM",
    "CrossCheckReport",
    "up_counts",
    "dense_projectors",
    "dense_povm",
    "single_spin_kraus",
    "kraus_completeness_error",
    "dense_channel",
    "dense_initial_state",
    "dense_measure",
    "sector_populations",
    "in_sector_deviation",
    "crosscheck",
]

MAX_N = 10

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_n(n):
    if not 1 <= n <= MAX_N:
        raise ValueError(f"dense oracle supports 1 <= N <= {MAX_N}, got N={n}")


@dataclass(frozen=True, eq=False)
class DenseState:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        dim = 2 ** self.n
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"state must be {dim}x{dim}")

    def check(self, tol=1e-12):
        """Raise if the matrix is not a density matrix to within ``tol``."""
        rho = self.matrix
        herm = np.max(np.abs(rho - rho.conj().T))
        tr = abs(np.trace(rho) - 1.0)
        min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if herm > tol or tr > tol or min_eig < -1e-10:
            raise ValueError(
                f"not a density matrix: hermiticity {herm:.2e}, trace error {tr:.2e}, "
                f"min eigenvalue {min_eig:.2e}"
            )
        return self


def up_counts(n):
    """Number of up spins of every computational basis state."""
    _check_n(n)
    idx = np.arange(2 ** n)
    downs = np.zeros(2 ** n, dtype=int)
    for s in range(n):
        downs += (idx >> s) & 1
    return n - downs


def dense_projectors(n):
    """Diagonals of ``Pi_m`` for ``m = -N/2 .. N/2`` (sector order)."""
    ups = up_counts(n)
    return [(ups == i).astype(float) for i in range(n + 1)]


@dataclass(frozen=True, eq=False)
class DensePOVM:
    """Diagonals of ``E_m = sum_l D(m, l) Pi_l`` and of ``sqrt(E_m)``."""

    effects: np.ndarray
    roots: np.ndarray


def dense_povm(kernel):
    ups = up_counts(kernel.n)
    effects = kernel.matrix[:, ups]
    roots = np.sqrt(kernel.matrix)[:, ups]
    return DensePOVM(effects, roots)


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

def single_spin_kraus(spec):
    """Kraus operators of the single-spin map behind a product channel.

    ``RotatingProductMap``: ``{sqrt(1-lam) U, sqrt(lam)/2 {1, X, Y, Z}}`` with
    ``U = exp(-i theta X)``. ``ProductMap``: the incoherent flip channel
    ``{sqrt(1-a)|u><u|, sqrt(a)|d><u|, sqrt(1-b)|d><d|, sqrt(b)|u><d|}``.
    """
    if isinstance(spec, RotatingProductMap):
        u = math.cos(spec.theta) * _I2 - 1j * math.sin(spec.theta) * _X
        half = 0.5 * math.sqrt(spec.lam)
        return [math.sqrt(1.0 - spec.lam) * u] + [half * p for p in (_I2, _X, _Y, _Z)]
    if isinstance(spec, ProductMap):
        a, b = spec.alpha, spec.beta
        up_keep = np.array([[math.sqrt(1 - a), 0], [0, 0]], dtype=complex)
        up_flip = np.array([[0, 0], [math.sqrt(a), 0]], dtype=complex)
        dn_keep = np.array([[0, 0], [0, math.sqrt(1 - b)]], dtype=complex)
        dn_flip = np.array([[0, math.sqrt(b)], [0, 0]], dtype=complex)
        return [up_keep, up_flip, dn_keep, dn_flip]
    raise TypeError(f"{type(spec).__name__} is not a product channel")


def kraus_completeness_error(kraus):
    total = sum(k.conj().T @ k for k in kraus)
    return float(np.max(np.abs(total - np.eye(total.shape[0]))))


def _apply_local(rho, n, kraus):
    # superoperator S[a, b, a', b'] = sum_K K[a, a'] conj(K[b, b'])
    sup = sum(np.einsum("ac,bd->abcd", k, k.conj()) for k in kraus)
    t = rho.reshape((2,) * (2 * n))
    for s in range(n):
        t = np.tensordot(sup, t, axes=([2, 3], [s, n + s]))
        # new axes 0, 1 belong at positions s and n + s
        t = np.moveaxis(t, [0, 1], [s, n + s])
    return t.reshape(2 ** n, 2 ** n)


def dense_channel(spec, state):
    """Exact action of a channel specification on a dense state."""
    n = state.n
    rho = state.matrix
    dim = 2 ** n
    if isinstance(spec, CollectiveDepolarizing):
        out = (1.0 - spec.lam) * rho + spec.lam * np.eye(dim) / dim
    elif isinstance(spec, EpsilonPolarizing):
        if spec.n != n:
            raise ValueError("reference distribution size does not match the state")
        ups = up_counts(n)
        weights = np.array(spec.q_ref) / np.array([math.comb(n, i) for i in range(n + 1)])
        out = (1.0 - spec.lam) * rho + spec.lam * np.diag(weights[ups]).astype(complex)
    elif isinstance(spec, (ProductMap, RotatingProductMap)):
        out = _apply_local(rho, n, single_spin_kraus(spec))
    else:
        raise TypeError(f"unsupported channel specification {spec!r}")
    return DenseState(n, out)


# ---------------------------------------------------------------------------
# states and measurement
# ---------------------------------------------------------------------------

def dense_initial_state(spec, n):
    _check_n(n)
    dim = 2 ** n
    if isinstance(spec, MixedState):
        return DenseState(n, np.eye(dim, dtype=complex) / dim)
    if isinstance(spec, ProductState):
        single = np.array([[spec.a, spec.b], [np.conj(spec.b), 1.0 - spec.a]], dtype=complex)
        rho = np.ones((1, 1), dtype=complex)
        for _ in range(n):
            rho = np.kron(rho, single)
        return DenseState(n, rho)
    if isinstance(spec, SectorDensity):
        ups = up_counts(n)
        weights = np.array(spec.q0) / np.array([math.comb(n, i) for i in range(n + 1)])
        return DenseState(n, np.diag(weights[ups]).astype(complex))
    raise TypeError(f"unsupported initial state {spec!r}")


def dense_measure(state, kernel, min_prob=0.0):
    """Outcome probabilities ``Tr[E_m rho]`` and square-root-update posteriors.

    Returns ``(probs, posteriors)`` where ``posteriors[k]`` is the dense state
    after outcome index ``k``, or ``None`` when ``probs[k] <= min_prob``.
    """
    if kernel.n != state.n:
        raise ValueError("kernel and state sizes differ")
    povm = dense_povm(kernel)
    diag = np.real(np.diag(state.matrix))
    probs = povm.effects @ diag
    posteriors = []
    for k, p in enumerate(probs):
        if p <= min_prob or p <= 0:
            posteriors.append(None)
            continue
        r = povm.roots[k]
        posteriors.append(DenseState(state.n, (r[:, None] * state.matrix * r[None, :]) / p))
    return probs, posteriors


def posterior_for(state, kernel, outcome_index):
    probs, posts = dense_measure(state, kernel)
    if posts[outcome_index] is None:
        raise ImpossibleOutcomeError(f"outcome index {outcome_index} has zero probability")
    return posts[outcome_index]


def sector_populations(state):
    ups = up_counts(state.n)
    diag = np.real(np.diag(state.matrix))
    return np.bincount(ups, weights=diag, minlength=state.n + 1)


def in_sector_deviation(state):
    """Max entrywise distance from ``sum_k q(k) Pi_k / Tr[Pi_k]`` with matching ``q``."""
    n = state.n
    ups = up_counts(n)
    q = sector_populations(state)
    sizes = np.array([math.comb(n, i) for i in range(n + 1)])
    uniform = np.diag((q / sizes)[ups])
    return float(np.max(np.abs(state.matrix - uniform)))


# ---------------------------------------------------------------------------
# equivalence harness
# ---------------------------------------------------------------------------

@dataclass
class CrossCheckReport:
    n: int
    steps: int
    tolerance: float
    max_tv: float = 0.0
    max_posterior_tv: float = 0.0
    max_in_sector_deviation: float = 0.0
    tv_by_round: list = field(default_factory=list)
    deviation_by_round: list = field(default_factory=list)
    branches: int = 0

    @property
    def passed(self):
        return (self.max_tv < self.tolerance
                and self.max_posterior_tv < self.tolerance
                and self.max_in_sector_deviation < self.tolerance)

    def to_dict(self):
        return {
            "n": self.n,
            "steps": self.steps,
            "tolerance": self.tolerance,
            "max_tv": self.max_tv,
            "max_posterior_tv": self.max_posterior_tv,
            "max_in_sector_deviation": self.max_in_sector_deviation,
            "tv_by_round": self.tv_by_round,
            "deviation_by_round": self.deviation_by_round,
            "branches": self.branches,
            "passed": self.passed,
        }


def crosscheck(config, steps=3, tolerance=1e-10, sector_kernel=None, min_branch_prob=1e-12):
    """Run dense and sector chains over the full outcome tree and compare them.

    At every node the two predicted outcome distributions are compared in
    total variation; every dense posterior is compared with the sector
    posterior and checked for uniformity inside each sector. Branches whose
    path probability falls below ``min_branch_prob`` are not expanded.

    ``sector_kernel`` replaces the outcome kernel on the sector side only
    (negative control).
    """
    n = config.n
    _check_n(n)
    kernel = config.kernel
    D_sector = (sector_kernel if sector_kernel is not None else kernel).matrix
    T = config.transition.matrix
    report = CrossCheckReport(n, steps, tolerance)

    frontier = [(1.0, dense_initial_state(config.initial, n), config.initial_distribution.probs)]
    for rnd in range(steps):
        last = rnd == steps - 1
        round_tv, round_dev = 0.0, 0.0
        next_frontier = []
        for weight, dense, q in frontier:
            probs_dense, posts = dense_measure(dense, kernel)
            probs_sector = D_sector @ q
            round_tv = max(round_tv, total_variation(probs_dense, probs_sector))
            for k, post in enumerate(posts):
                if post is None or weight * probs_dense[k] < min_branch_prob:
                    continue
                q_post = D_sector[k] * q
                if not q_post.sum() > 0:
                    report.max_posterior_tv = 1.0
                    continue
                q_post = q_post / q_post.sum()
                report.max_posterior_tv = max(
                    report.max_posterior_tv, total_variation(sector_populations(post), q_post)
                )
                round_dev = max(round_dev, in_sector_deviation(post))
                report.branches += 1
                if not last:
                    next_frontier.append(
                        (weight * probs_dense[k], dense_channel(config.channel, post), T @ q_post)
                    )
        report.tv_by_round.append(round_tv)
        report.deviation_by_round.append(round_dev)
        frontier = next_frontier
    report.max_tv = max(report.tv_by_round)
    report.max_in_sector_deviation = max(report.deviation_by_round)
    return report
