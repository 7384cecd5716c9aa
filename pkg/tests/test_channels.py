import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinnoise.channels import (
    CollectiveDepolarizing,
    EpsilonPolarizing,
    ProductMap,
    RotatingProductMap,
    apply_channel,
    conditional_moments,
    decay_probability,
    flip_probs_from_rotation,
    identity_kernel,
    mixing_kernel,
    product_transition_kernel,
    transition_kernel,
)
from spinnoise.sectors import SectorDistribution, binomial_pmf, magnetizations

# (1 - 0.1) sin^2(pi/32) + 0.05, evaluated independently
ROTATION_FLIP_PROB = 0.0586466238185463


def enumerated_kernel(n, alpha, beta):
    """Brute force over every flip pattern of one representative configuration."""
    T = np.zeros((n + 1, n + 1))
    for u in range(n + 1):
        spins = [1] * u + [0] * (n - u)           # 1 = up
        for flips in itertools.product((0, 1), repeat=n):
            p = 1.0
            for s, f in zip(spins, flips):
                rate = alpha if s else beta
                p *= rate if f else 1 - rate
            ups = sum(s ^ f for s, f in zip(spins, flips))
            T[ups, u] += p
    return T


class TestFlipProbabilities:
    def test_examples(self):
        assert flip_probs_from_rotation(0, 0) == (0.0, 0.0)
        assert flip_probs_from_rotation(1, 0.7) == (0.5, 0.5)
        a, b = flip_probs_from_rotation(0.1, math.pi / 32)
        assert a == b == pytest.approx(ROTATION_FLIP_PROB, abs=1e-15)
        assert abs(a - 0.058648) < 5e-6

    def test_full_flip(self):
        a, _ = flip_probs_from_rotation(0.0, math.pi / 2)
        assert a == pytest.approx(1.0, abs=1e-15)

    def test_decay_probability(self):
        assert decay_probability(0, 1) == 0
        assert decay_probability(1, 1) == pytest.approx(1 - math.exp(-1), abs=1e-16)
        with pytest.raises(ValueError):
            decay_probability(1, 0)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            CollectiveDepolarizing(1.2)
        with pytest.raises(ValueError):
            ProductMap(0.1, -0.1)
        with pytest.raises(ValueError):
            EpsilonPolarizing(0.1, (0.5, 0.6))


class TestProductKernel:
    def test_identity(self):
        np.testing.assert_array_equal(product_transition_kernel(7, 0, 0).matrix, np.eye(8))

    def test_single_spin(self):
        T = product_transition_kernel(1, 0.2, 0.3).matrix
        np.testing.assert_allclose(T, [[0.7, 0.2], [0.3, 0.8]], atol=1e-15)

    def test_full_flip_reverses(self):
        T = product_transition_kernel(5, 1, 1).matrix
        np.testing.assert_allclose(T, np.eye(6)[::-1], atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 3, 6, 9])
    @pytest.mark.parametrize("alpha, beta", [(0.1, 0.3), (0.5, 0.5), (0.9, 0.02), (0.0, 0.4)])
    def test_matches_enumeration(self, n, alpha, beta):
        np.testing.assert_allclose(
            product_transition_kernel(n, alpha, beta).matrix,
            enumerated_kernel(n, alpha, beta), atol=1e-14,
        )

    @given(n=st.integers(1, 120), alpha=st.floats(0, 1), beta=st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_column_stochastic(self, n, alpha, beta):
        T = product_transition_kernel(n, alpha, beta).matrix
        assert np.all(T >= 0)
        assert np.max(np.abs(T.sum(axis=0) - 1)) <= 1e-12

    def test_binomial_fixed_point(self):
        # the product of single-spin steady states is stationary
        alpha, beta = 0.2, 0.05
        a = beta / (alpha + beta)
        q = binomial_pmf(30, a)
        T = product_transition_kernel(30, alpha, beta).matrix
        np.testing.assert_allclose(T @ q, q, atol=1e-14)


class TestConditionalMoments:
    def test_examples(self):
        mom = conditional_moments(10, 0.0, 0.0, 4)
        assert mom == (2.0, 0.0)
        mom = conditional_moments(4, 0.2, 0.0, 4)    # all four spins up, alpha drains
        assert mom.mean == pytest.approx(2 * 0.8 - 2 * 0.2, abs=1e-15)
        assert mom.std == pytest.approx(math.sqrt(4 * 0.16), abs=1e-15)

    def test_drift_sign(self):
        # with beta > alpha the mean moves up from an empty start
        assert conditional_moments(10, 0.0, 0.3, -10).mean > -5

    @given(n=st.integers(1, 200), alpha=st.floats(0, 1), beta=st.floats(0, 1), data=st.data())
    @settings(max_examples=80, deadline=None)
    def test_kernel_columns(self, n, alpha, beta, data):
        i = data.draw(st.integers(0, n))
        T = product_transition_kernel(n, alpha, beta).matrix
        m = magnetizations(n)
        col = T[:, i]
        mean = m @ col
        var = ((m - mean) ** 2) @ col
        mom = conditional_moments(n, alpha, beta, 2 * i - n)
        assert mean == pytest.approx(mom.mean, abs=1e-10)
        assert var == pytest.approx(mom.std ** 2, abs=1e-10)


class TestMixing:
    def test_collective_kernel(self):
        T = transition_kernel(CollectiveDepolarizing(0.25), 4).matrix
        mixed = binomial_pmf(4, 0.5)
        np.testing.assert_allclose(T, 0.75 * np.eye(5) + 0.25 * mixed[:, None], atol=1e-15)

    def test_extremes(self):
        np.testing.assert_array_equal(transition_kernel(CollectiveDepolarizing(0.0), 6).matrix, np.eye(7))
        T = transition_kernel(CollectiveDepolarizing(1.0), 6).matrix
        np.testing.assert_allclose(T, np.repeat(binomial_pmf(6, 0.5)[:, None], 7, axis=1), atol=1e-15)

    def test_semigroup(self):
        lam = 0.3
        T = transition_kernel(CollectiveDepolarizing(lam), 10)
        T3 = T @ T @ T
        lam3 = 1 - (1 - lam) ** 3
        np.testing.assert_allclose(T3.matrix, transition_kernel(CollectiveDepolarizing(lam3), 10).matrix,
                                   atol=1e-14)

    def test_epsilon_polarizing_relaxes(self):
        ref = binomial_pmf(8, 0.6)
        spec = EpsilonPolarizing.toward(0.4, ref)
        assert spec.polarization == pytest.approx(8 * 0.1, abs=1e-12)
        q = SectorDistribution.delta(8, -8)
        for _ in range(200):
            q = apply_channel(transition_kernel(spec, 8), q)
        np.testing.assert_allclose(q.probs, ref, atol=1e-12)

    def test_reference_size_checked(self):
        spec = EpsilonPolarizing.toward(0.4, binomial_pmf(4, 0.5))
        with pytest.raises(ValueError):
            transition_kernel(spec, 6)
        with pytest.raises(ValueError):
            mixing_kernel(6, 0.1, SectorDistribution.mixed(4))

    def test_rotating_uses_flip_probs(self):
        spec = RotatingProductMap(0.1, math.pi / 32)
        np.testing.assert_allclose(
            transition_kernel(spec, 12).matrix,
            product_transition_kernel(12, ROTATION_FLIP_PROB, ROTATION_FLIP_PROB).matrix, atol=1e-15,
        )


def test_apply_channel_identity():
    q = SectorDistribution(5, binomial_pmf(5, 0.3))
    np.testing.assert_array_equal(apply_channel(identity_kernel(5), q).probs, q.probs)
    with pytest.raises(ValueError):
        apply_channel(identity_kernel(4), q)
