import math

import numpy as np
import pytest

from spinnoise.chain import MixedState, ProductState, RunConfig, SectorDensity
from spinnoise.channels import CollectiveDepolarizing, EpsilonPolarizing, ProductMap, RotatingProductMap
from spinnoise.measurement import gaussian_kernel, strong_kernel
from spinnoise.oracle import (
    DenseState,
    crosscheck,
    dense_channel,
    dense_initial_state,
    dense_measure,
    dense_povm,
    dense_projectors,
    in_sector_deviation,
    kraus_completeness_error,
    sector_populations,
    single_spin_kraus,
    up_counts,
)
from spinnoise.sectors import binomial_pmf


class TestProjectors:
    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_ranks_and_completeness(self, n):
        projs = dense_projectors(n)
        assert [int(p.sum()) for p in projs] == [math.comb(n, i) for i in range(n + 1)]
        np.testing.assert_array_equal(sum(projs), np.ones(2 ** n))
        for a in range(n + 1):
            for b in range(a + 1, n + 1):
                assert not np.any(projs[a] * projs[b])

    def test_basis_convention(self):
        # index 0 is all spins up
        assert up_counts(3)[0] == 3 and up_counts(3)[-1] == 0

    def test_size_limit(self):
        with pytest.raises(ValueError):
            up_counts(11)


class TestPOVM:
    def test_roots_square_to_effects(self):
        povm = dense_povm(gaussian_kernel(5, 1.2))
        np.testing.assert_allclose(povm.roots ** 2, povm.effects, atol=1e-15)
        np.testing.assert_allclose(povm.effects.sum(axis=0), np.ones(32), atol=1e-12)

    def test_strong_povm_is_projective(self):
        povm = dense_povm(strong_kernel(4))
        np.testing.assert_array_equal(povm.effects, np.array(dense_projectors(4)))


class TestKraus:
    @pytest.mark.parametrize("spec", [
        RotatingProductMap(0.0, 0.3), RotatingProductMap(0.4, 1.1), RotatingProductMap(1.0, 0.0),
        ProductMap(0.2, 0.7), ProductMap(1.0, 0.0),
    ])
    def test_complete(self, spec):
        assert kraus_completeness_error(single_spin_kraus(spec)) < 1e-15

    def test_rotation_flip_probability(self):
        # one spin up, rotated by theta with no depolarizing: P(down) = sin^2 theta
        theta = 0.3
        rho = DenseState(1, np.array([[1, 0], [0, 0]], dtype=complex))
        out = dense_channel(RotatingProductMap(0.0, theta), rho)
        assert out.matrix[1, 1].real == pytest.approx(math.sin(theta) ** 2, abs=1e-15)

    def test_collective_not_product(self):
        with pytest.raises(TypeError):
            single_spin_kraus(CollectiveDepolarizing(0.1))


class TestDenseDynamics:
    def test_initial_states(self):
        n = 4
        for spec, q in [(MixedState(), binomial_pmf(n, 0.5)),
                        (ProductState(0.8), binomial_pmf(n, 0.8)),
                        (SectorDensity((0.1, 0.2, 0.3, 0.2, 0.2)), [0.1, 0.2, 0.3, 0.2, 0.2])]:
            state = dense_initial_state(spec, n).check()
            np.testing.assert_allclose(sector_populations(state), q, atol=1e-14)

    def test_product_coherence_kept(self):
        state = dense_initial_state(ProductState(0.5, 0.3), 2).check()
        assert in_sector_deviation(state) > 0.05

    def test_collective_depolarizing(self):
        rho = dense_initial_state(ProductState(1.0), 3)
        out = dense_channel(CollectiveDepolarizing(0.25), rho).check()
        assert out.matrix[0, 0].real == pytest.approx(0.75 + 0.25 / 8)

    def test_channel_preserves_state(self):
        rho = dense_initial_state(ProductState(0.7, 0.2 + 0.1j), 4)
        for spec in (RotatingProductMap(0.3, 0.5), ProductMap(0.1, 0.6),
                     EpsilonPolarizing.toward(0.4, binomial_pmf(4, 0.9))):
            dense_channel(spec, rho).check()

    def test_measure(self):
        state = dense_initial_state(MixedState(), 3)
        probs, posts = dense_measure(state, strong_kernel(3))
        np.testing.assert_allclose(probs, [1 / 8, 3 / 8, 3 / 8, 1 / 8], atol=1e-15)
        np.testing.assert_allclose(sector_populations(posts[1]), [0, 1, 0, 0], atol=1e-15)
        assert in_sector_deviation(posts[1]) < 1e-15

    def test_measure_zero_branch(self):
        state = dense_initial_state(ProductState(1.0), 2)
        probs, posts = dense_measure(state, strong_kernel(2))
        assert posts[0] is None and posts[2] is not None


class TestCrossCheck:
    @pytest.mark.parametrize("config", [
        RunConfig(4, CollectiveDepolarizing(0.3), width=0.0),
        RunConfig(4, CollectiveDepolarizing(0.3), width=0.9),
        RunConfig(5, EpsilonPolarizing.toward(0.2, binomial_pmf(5, 0.7)), width=1.3,
                  initial=ProductState(0.4)),
        RunConfig(6, ProductMap(0.15, 0.05), width=0.7, initial=ProductState(0.9)),
        RunConfig(3, ProductMap(0.3, 0.3), width=0.0, initial=SectorDensity((0.4, 0.1, 0.1, 0.4))),
    ])
    def test_sector_engine_is_exact(self, config):
        report = crosscheck(config, steps=3, tolerance=1e-10)
        assert report.passed, report.to_dict()
        assert report.branches > 0

    def test_rotation_exact_for_two_rounds(self):
        report = crosscheck(RunConfig(6, RotatingProductMap(0.1, math.pi / 32), width=1.0), steps=2)
        assert max(report.tv_by_round) < 1e-10
        assert report.deviation_by_round[0] < 1e-10

    def test_rotation_leaves_in_sector_coherence(self):
        # the coherent rotation moves population out of a sector without keeping it
        # uniform, so the third outcome distribution no longer follows the sector chain
        report = crosscheck(RunConfig(4, RotatingProductMap(0.1, math.pi / 32), width=1.0), steps=3)
        assert report.tv_by_round[0] < 1e-12 and report.tv_by_round[1] < 1e-12
        assert report.deviation_by_round[1] > 1e-4
        assert report.tv_by_round[2] > 1e-4
        assert not report.passed

    def test_corrupted_kernel_detected(self):
        config = RunConfig(4, CollectiveDepolarizing(0.3), width=1.0)
        report = crosscheck(config, steps=2, sector_kernel=gaussian_kernel(4, 1.5))
        assert not report.passed
        assert report.max_tv > 1e-3

    def test_product_state_coherence_is_invisible(self):
        # coherent input: statistics still agree, only in-sector uniformity fails
        config = RunConfig(4, CollectiveDepolarizing(0.2), width=0.8, initial=ProductState(0.5, 0.4))
        report = crosscheck(config, steps=2)
        assert report.max_tv < 1e-12 and report.max_posterior_tv < 1e-12
        assert report.max_in_sector_deviation > 1e-3
