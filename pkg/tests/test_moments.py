import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from spectral_hmm.hmm import BUILTIN_MODELS, HmmModel, TripleSet, builtin_model, sample_triples
from spectral_hmm.moments import (MomentSet, analytic_moments, analytic_view_means,
                                  brute_force_moments, contract_third_order, estimate_moments,
                                  load_moments, save_moments)

from .conftest import random_model

NAMES = ("P1", "P21", "P31", "P32", "P312")


class TestEstimateMoments:
    def test_single_triple(self):
        m = estimate_moments(TripleSet([[0, 1, 2]], d=3))
        np.testing.assert_array_equal(m.P1, [1, 0, 0])
        expected21 = np.zeros((3, 3))
        expected21[1, 0] = 1
        np.testing.assert_array_equal(m.P21, expected21)
        expected312 = np.zeros((3, 3, 3))
        expected312[2, 0, 1] = 1
        np.testing.assert_array_equal(m.P312, expected312)
        assert m.P31[2, 0] == 1 and m.P32[2, 1] == 1

    def test_pair_frequency_model_a(self, model_a):
        # analytic value summed over hidden states: 0.061 + 0.1016
        assert brute_force_moments(model_a).P21[0, 0] == pytest.approx(0.1626, rel=1e-12)
        m = estimate_moments(sample_triples(model_a, 100_000, rng=4))
        assert abs(m.P21[0, 0] - 0.1626) <= 0.005

    def test_duplicated_triples_give_same_moments(self):
        one = estimate_moments(TripleSet([[0, 1, 2]], d=3))
        two = estimate_moments(TripleSet([[0, 1, 2], [0, 1, 2]], d=3))
        for name in NAMES:
            np.testing.assert_array_equal(getattr(one, name), getattr(two, name))

    def test_normalisation_and_marginals(self, model_a):
        m = estimate_moments(sample_triples(model_a, 5000, rng=0))
        for name in NAMES:
            arr = getattr(m, name)
            assert arr.min() >= 0
            assert arr.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(m.counts.sum(axis=2), np.round(m.P31 * m.n))
        np.testing.assert_allclose(m.P3r1.sum(axis=0), m.P31, atol=1e-15)

    def test_vector_mode_matches_categorical(self, model_a):
        triples = sample_triples(model_a, 2000, rng=1)
        cat = estimate_moments(triples)
        vec = estimate_moments(triples.as_vectors())
        for name in NAMES:
            np.testing.assert_allclose(getattr(vec, name), getattr(cat, name), atol=1e-14)

    def test_converges_to_analytic(self, model_a):
        n = 100_000
        emp = estimate_moments(sample_triples(model_a, n, rng=8))
        pop = analytic_moments(model_a)
        hits, total = 0, 0
        for name in NAMES:
            p, q = getattr(pop, name), getattr(emp, name)
            bound = 5 * np.sqrt(p * (1 - p) / n)
            hits += np.sum(np.abs(q - p) <= bound + 1e-15)
            total += p.size
        assert hits / total >= 0.99


class TestContraction:
    def test_basis_vector_picks_slice(self, model_a):
        m = analytic_moments(model_a)
        for r in range(3):
            np.testing.assert_array_equal(contract_third_order(m.P312, np.eye(3)[r]), m.P3r1[r])

    def test_ones_marginalises(self, model_a):
        m = analytic_moments(model_a)
        np.testing.assert_allclose(contract_third_order(m.P312, np.ones(3)), m.P31, atol=1e-15)

    def test_zero(self, model_a):
        m = analytic_moments(model_a)
        np.testing.assert_array_equal(contract_third_order(m.P312, np.zeros(3)), np.zeros((3, 3)))

    def test_shape_mismatch(self, model_a):
        with pytest.raises(ValueError):
            contract_third_order(analytic_moments(model_a).P312, np.ones(4))


class TestViewMeans:
    def test_mixing_weights(self, model_a):
        np.testing.assert_allclose(analytic_view_means(model_a).w, [0.78, 0.22], atol=1e-15)

    def test_third_view_means(self, model_a):
        M3 = analytic_view_means(model_a).M3
        np.testing.assert_allclose(M3, [[0.305, 0.635], [0.46, 0.22], [0.235, 0.145]], atol=1e-15)
        np.testing.assert_allclose(M3.sum(axis=0), 1)

    def test_identity_chain(self, model_a):
        model = HmmModel(np.eye(2), model_a.O, model_a.pi)
        vm = analytic_view_means(model)
        np.testing.assert_allclose(vm.M1, model_a.O)
        np.testing.assert_allclose(vm.M3, model_a.O)
        np.testing.assert_allclose(vm.w, model_a.pi)

    @pytest.mark.parametrize("name", BUILTIN_MODELS)
    def test_first_view_is_posterior_mean(self, name):
        # M1 e_j = E[x1 | h2 = j], checked against enumeration over h1
        model = builtin_model(name)
        vm = analytic_view_means(model)
        np.testing.assert_allclose(vm.M1.sum(axis=0), 1, atol=1e-14)
        for j in range(model.k):
            post = model.T[j] * model.pi / (model.T[j] @ model.pi)
            np.testing.assert_allclose(vm.M1[:, j], model.O @ post, atol=1e-14)

    def test_division_guard(self):
        model = HmmModel(np.array([[1.0, 1.0], [0.0, 0.0]]), np.eye(2), [0.5, 0.5])
        with pytest.raises(ValueError):
            analytic_view_means(model)


class TestAnalyticMoments:
    def test_first_moment(self, model_a):
        np.testing.assert_allclose(analytic_moments(model_a).P1, [0.36, 0.42, 0.22], atol=1e-15)

    @pytest.mark.parametrize("name", BUILTIN_MODELS)
    def test_matches_enumeration(self, name):
        model = builtin_model(name)
        pop, bf = analytic_moments(model), brute_force_moments(model)
        for key in NAMES:
            np.testing.assert_allclose(getattr(pop, key), getattr(bf, key), atol=1e-15)
        assert pop.P312.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(contract_third_order(pop.P312, np.ones(model.d)), pop.P31, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 100_000), k=st.integers(1, 3), extra=st.integers(0, 4))
    def test_tensor_identity_for_any_probe(self, seed, k, extra):
        # P312(eta) = M3 diag(M2^T eta) diag(w) M1^T
        model = random_model(seed, k, k + extra)
        assume(model is not None)
        vm = analytic_view_means(model)
        pop = analytic_moments(model)
        eta = np.random.default_rng(seed).standard_normal(model.d)
        rhs = vm.M3 @ np.diag(vm.M2.T @ eta) @ np.diag(vm.w) @ vm.M1.T
        np.testing.assert_allclose(contract_third_order(pop.P312, eta), rhs, atol=1e-12)
        np.testing.assert_allclose(pop.P31, vm.M3 @ np.diag(vm.w) @ vm.M1.T, atol=1e-12)


def test_moment_file_round_trip(tmp_path, model_a):
    pop = analytic_moments(model_a)
    path = tmp_path / "moments.json"
    save_moments(pop, path)
    back = load_moments(path)
    assert isinstance(back, MomentSet) and back.source == "analytic"
    for name in NAMES:
        np.testing.assert_array_equal(getattr(back, name), getattr(pop, name))
