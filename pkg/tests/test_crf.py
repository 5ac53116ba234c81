import itertools

import numpy as np
import pytest
from scipy import sparse

from problem_gen import random_link_problem, random_signed_problem

from ctxseg.crf import (CrfProblem, UnaryModel, UnaryTrainConfig, beta_adaptive,
                        brute_force_oracle, build_pairwise, energy, infer,
                        qpbo_fuse, train_unary, unary_potentials)
from ctxseg.propagation import LinkScoreMatrix
from ctxseg.regions import Region, VideoSequence


def seq_with_features(F, frames=None):
    frames = frames or [0] * len(F)
    regions = [Region(i, frames[i], np.asarray(f, dtype=float), 1)
               for i, f in enumerate(F)]
    return VideoSequence(regions, [], frame_count=max(frames) + 1)


def scores_from_entries(entries, n, converged=True):
    """entries: {(m, n_cls): [(i, j, s), ...]}"""
    out = {}
    for pair, items in entries.items():
        mat = np.zeros((n, n))
        for i, j, s in items:
            mat[i, j] = s
        out[pair] = LinkScoreMatrix(pair, sparse.csr_matrix(mat), converged, 0, 0)
    return out


class TestTrainUnary:
    def test_separable_features_full_accuracy(self):
        seq = seq_with_features([[1.0, 0.0], [-1.0, 0.0]] * 5)
        labeled = {i: i % 2 for i in range(10)}
        model = train_unary(labeled, seq, UnaryTrainConfig(epochs=100, seed=1))
        pred = model.probabilities(seq.feature_matrix()).argmax(axis=1)
        assert np.array_equal(pred, [i % 2 for i in range(10)])

    def test_single_example_per_class_at_poles(self):
        seq = seq_with_features([[1.0, 0.0], [-1.0, 0.0]])
        model = train_unary({0: 0, 1: 1}, seq)
        probs = model.probabilities(seq.feature_matrix())
        assert probs[0, 0] > 0.5
        assert probs[1, 1] > 0.5

    def test_seeded_training_bitwise_deterministic(self):
        rng = np.random.default_rng(2)
        F = rng.standard_normal((12, 4))
        F /= np.linalg.norm(F, axis=1, keepdims=True)
        seq = seq_with_features(F.tolist())
        labeled = {i: i % 3 for i in range(12)}
        cfg = UnaryTrainConfig(epochs=30, seed=9)
        m1 = train_unary(labeled, seq, cfg)
        m2 = train_unary(labeled, seq, cfg)
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.biases, m2.biases)

    def test_missing_class_listed_in_error(self):
        seq = seq_with_features([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(ValueError, match=r"\[1\]"):
            train_unary({0: 0, 1: 2}, seq, num_classes=3)

    def test_identical_features_warns_but_returns(self, caplog):
        seq = seq_with_features([[1.0, 0.0]] * 4)
        with caplog.at_level("WARNING"):
            model = train_unary({0: 0, 1: 1, 2: 0, 3: 1}, seq)
        assert model.weights.shape == (2, 2)
        assert any("identical" in m for m in caplog.messages)

    def test_probabilities_form_simplex(self):
        rng = np.random.default_rng(3)
        F = rng.standard_normal((9, 5))
        F /= np.linalg.norm(F, axis=1, keepdims=True)
        seq = seq_with_features(F.tolist())
        model = train_unary({i: i % 3 for i in range(9)}, seq)
        probs = model.probabilities(seq.feature_matrix())
        assert np.all(probs > 0)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestUnaryPotentials:
    def test_certain_class_costs_zero(self):
        seq = seq_with_features([[1.0, 0.0]])
        model = UnaryModel(np.array([[100.0, 0.0], [-100.0, 0.0]]),
                           np.zeros(2), UnaryTrainConfig())
        psi = unary_potentials(model, seq)
        assert psi[0, 0] == pytest.approx(0.0, abs=1e-9)

    def test_probability_floor(self):
        seq = seq_with_features([[1.0, 0.0]])
        model = UnaryModel(np.array([[100.0, 0.0], [-100.0, 0.0]]),
                           np.zeros(2), UnaryTrainConfig())
        psi = unary_potentials(model, seq)
        assert psi[0, 1] == pytest.approx(-np.log(1e-6), abs=1e-9)
        assert psi[0, 1] == pytest.approx(13.8155, abs=1e-3)

    def test_uniform_probabilities(self):
        seq = seq_with_features([[1.0, 0.0]])
        model = UnaryModel(np.zeros((4, 2)), np.zeros(4), UnaryTrainConfig())
        psi = unary_potentials(model, seq)
        assert np.allclose(psi[0], np.log(4.0), atol=1e-12)


class TestBetaAdaptive:
    def test_single_score(self):
        scores = scores_from_entries({(0, 1): [(0, 1, 1.0)]}, 3)
        assert beta_adaptive(scores) == 1.0

    def test_mean_of_squares(self):
        scores = scores_from_entries({(0, 1): [(0, 1, 1.0), (1, 2, 1.0)],
                                      (1, 0): [(2, 0, 2.0)]}, 3)
        assert beta_adaptive(scores) == pytest.approx(2.0)

    def test_empty_guard(self):
        assert beta_adaptive({}) == 1.0


class TestBuildPairwise:
    def test_zero_score_class_pairs_cost_zero(self):
        scores = scores_from_entries({(1, 2): [(0, 1, 1.0)]}, 2)
        tables = build_pairwise(scores, 1.0, 1.0, num_classes=3)
        tbl = tables[(0, 1)]
        assert tbl[1, 2] != 0.0
        mask = np.ones((3, 3), dtype=bool)
        mask[1, 2] = False
        assert np.all(tbl[mask] == 0.0)

    def test_exponent_minus_one_value(self):
        beta = 0.5  # S^2 = 2*beta at S = 1
        scores = scores_from_entries({(0, 1): [(0, 1, 1.0)]}, 2)
        tables = build_pairwise(scores, beta, 2.0, num_classes=2)
        assert tables[(0, 1)][0, 1] == pytest.approx(2.0 * (np.exp(-1.0) - 1.0))
        assert tables[(0, 1)][0, 1] == pytest.approx(-0.63212 * 2.0, abs=1e-4)

    def test_diagonal_scores_ignored(self):
        scores = scores_from_entries({(0, 1): [(1, 1, 1.0)]}, 3)
        assert build_pairwise(scores, 1.0, 1.0, 2) == {}

    @pytest.mark.parametrize("seed", range(20))
    def test_shift_leaves_minimizers_unchanged(self, seed):
        # literal tables exp(-S^2/2b) vs shifted exp(-S^2/2b) - 1 on the same
        # pair set: brute force both and compare the full minimizer sets
        rng = np.random.default_rng(seed)
        n, L = 4, int(rng.integers(2, 5))
        unary = rng.uniform(0, 3, (n, L))
        from problem_gen import random_scores
        scores = random_scores(rng, n, L)
        beta = beta_adaptive(scores)
        lam = float(rng.uniform(0.5, 2.0))
        shifted = build_pairwise(scores, beta, lam, L)
        literal = {k: t + lam for k, t in shifted.items()}
        p_shift = CrfProblem(unary, shifted)
        p_lit = CrfProblem(unary, literal)

        def minimizers(problem):
            energies = {z: energy(problem, np.array(z))
                        for z in itertools.product(range(L), repeat=n)}
            lo = min(energies.values())
            return {z for z, e in energies.items() if e <= lo + 1e-9}

        assert minimizers(p_shift) == minimizers(p_lit)

    def test_constant_on_single_table_preserves_minimizers(self):
        rng = np.random.default_rng(44)
        n, L = 4, 3
        unary = rng.uniform(0, 3, (n, L))
        pairwise = {(0, 1): rng.normal(size=(L, L)),
                    (1, 2): rng.normal(size=(L, L)),
                    (2, 3): rng.normal(size=(L, L))}
        bumped = dict(pairwise)
        bumped[(1, 2)] = pairwise[(1, 2)] + 7.5

        def minimizers(pw):
            problem = CrfProblem(unary, pw)
            energies = {z: energy(problem, np.array(z))
                        for z in itertools.product(range(L), repeat=n)}
            lo = min(energies.values())
            return {z for z, e in energies.items() if e <= lo + 1e-9}

        assert minimizers(pairwise) == minimizers(bumped)


class TestEnergy:
    def test_unary_only(self):
        p = CrfProblem(np.array([[1.0, 2.0], [0.5, 3.0]]), {})
        assert energy(p, np.array([0, 0])) == pytest.approx(1.5)
        assert energy(p, np.array([1, 1])) == pytest.approx(5.0)

    def test_hand_table_all_labelings(self):
        psi = np.array([[1.0, 2.0], [3.0, 0.5]])
        tbl = np.array([[0.0, -1.0], [0.25, 0.75]])
        p = CrfProblem(psi, {(0, 1): tbl})
        want = {
            (0, 0): 1.0 + 3.0 + 0.0,
            (0, 1): 1.0 + 0.5 - 1.0,
            (1, 0): 2.0 + 3.0 + 0.25,
            (1, 1): 2.0 + 0.5 + 0.75,
        }
        for z, e in want.items():
            assert energy(p, np.array(z)) == pytest.approx(e)

    def test_additive_over_disconnected_components(self):
        rng = np.random.default_rng(4)
        u1 = rng.uniform(0, 3, (3, 3))
        u2 = rng.uniform(0, 3, (2, 3))
        t1 = rng.normal(size=(3, 3))
        t2 = rng.normal(size=(3, 3))
        p1 = CrfProblem(u1, {(0, 1): t1})
        p2 = CrfProblem(u2, {(0, 1): t2})
        joint = CrfProblem(np.vstack([u1, u2]), {(0, 1): t1, (3, 4): t2})
        x1 = np.array([2, 0, 1])
        x2 = np.array([1, 1])
        assert energy(joint, np.concatenate([x1, x2])) == pytest.approx(
            energy(p1, x1) + energy(p2, x2))


class TestQpboFuse:
    def test_identity_proposal(self):
        rng = np.random.default_rng(5)
        p = random_link_problem(rng)
        x = rng.integers(0, p.num_classes, p.n)
        fused = qpbo_fuse(p, x, x.copy())
        assert np.array_equal(fused, x)

    @pytest.mark.parametrize("seed", range(15))
    def test_binary_submodular_fusion_exact(self, seed):
        # attractive link tables are submodular after restriction to two
        # labels whenever the cross options are the rewarded ones; instead
        # force submodularity by construction on random binary tables
        rng = np.random.default_rng(200 + seed)
        n = int(rng.integers(2, 9))
        unary = rng.uniform(0, 3, (n, 2))
        pairwise = {}
        for a in range(n):
            for b in range(a + 1, n):
                if rng.random() < 0.7:
                    t = rng.normal(size=(2, 2))
                    gap = t[0, 1] + t[1, 0] - t[0, 0] - t[1, 1]
                    if gap < 0:
                        t[0, 1] += -gap + 0.05
                    pairwise[(a, b)] = t
        p = CrfProblem(unary, pairwise)
        current = np.zeros(p.n, dtype=int)
        proposal = np.ones(p.n, dtype=int)
        fused = qpbo_fuse(p, current, proposal)
        assert energy(p, fused) == pytest.approx(brute_force_oracle(p).energy,
                                                 abs=1e-9)

    @pytest.mark.parametrize("seed", range(15))
    def test_fusion_never_increases_energy(self, seed):
        rng = np.random.default_rng(300 + seed)
        p = random_signed_problem(rng)  # arbitrary sign: nonsubmodular fusions
        for _ in range(5):
            cur = rng.integers(0, p.num_classes, p.n)
            prop = rng.integers(0, p.num_classes, p.n)
            fused = qpbo_fuse(p, cur, prop)
            assert energy(p, fused) <= energy(p, cur) + 1e-9

    def test_adversarial_nonsubmodular_triangle(self):
        # three regions, equal unaries, frustrated pairwise preferences
        anti = np.array([[1.0, -1.0], [-1.0, 1.0]])
        p = CrfProblem(np.zeros((3, 2)),
                       {(0, 1): anti, (1, 2): anti, (0, 2): anti})
        cur = np.array([0, 0, 0])
        fused = qpbo_fuse(p, cur, np.array([1, 1, 1]))
        assert energy(p, fused) <= energy(p, cur) + 1e-9


class TestInfer:
    def test_no_pairwise_gives_unary_argmin(self):
        rng = np.random.default_rng(6)
        unary = rng.uniform(0, 3, (10, 4))
        result = infer(CrfProblem(unary, {}))
        assert np.array_equal(result.assignment, unary.argmin(axis=1))
        assert result.energy == pytest.approx(unary.min(axis=1).sum())

    def test_strong_link_resolves_ambiguous_unaries(self):
        # classes: 0 bg, 1 'horse', 2 'person'; both regions equally torn
        # between 1 and 2, the link rewards the joint (1, 2) assignment
        psi = np.array([[5.0, 1.0, 1.0], [5.0, 1.0, 1.0]])
        scores = scores_from_entries({(1, 2): [(0, 1, 1.0)],
                                      (2, 1): [(1, 0, 1.0)]}, 2)
        beta = beta_adaptive(scores)
        tables = build_pairwise(scores, beta, 1.0, 3)
        p = CrfProblem(psi, tables, beta=beta)
        result = infer(p)
        assert tuple(result.assignment) == (1, 2)
        # 2-node brute force agrees
        assert result.energy == pytest.approx(brute_force_oracle(p).energy)

    @pytest.mark.parametrize("seed", range(25))
    def test_bracketed_by_oracle_and_unary_argmin(self, seed):
        rng = np.random.default_rng(400 + seed)
        p = random_link_problem(rng)
        result = infer(p)
        floor = brute_force_oracle(p).energy
        ceil = energy(p, p.unary.argmin(axis=1))
        assert floor - 1e-9 <= result.energy <= ceil + 1e-9
        # trace is non-increasing
        assert all(b <= a + 1e-9 for a, b in zip(result.energy_trace,
                                                 result.energy_trace[1:]))

    @pytest.mark.parametrize("seed", range(10))
    def test_mixed_sign_tables_still_bracketed(self, seed):
        rng = np.random.default_rng(500 + seed)
        p = random_signed_problem(rng)
        result = infer(p)
        assert result.energy >= brute_force_oracle(p).energy - 1e-9
        assert result.energy <= energy(p, p.unary.argmin(axis=1)) + 1e-9

    def test_binary_submodular_reaches_exact_optimum(self):
        for seed in range(10):
            rng = np.random.default_rng(600 + seed)
            n = int(rng.integers(2, 8))
            unary = rng.uniform(0, 3, (n, 2))
            pairwise = {}
            for a in range(n):
                for b in range(a + 1, n):
                    t = rng.normal(size=(2, 2))
                    gap = t[0, 1] + t[1, 0] - t[0, 0] - t[1, 1]
                    if gap < 0:
                        t[0, 1] += -gap + 0.05
                    pairwise[(a, b)] = t
            p = CrfProblem(unary, pairwise)
            assert infer(p).energy == pytest.approx(brute_force_oracle(p).energy,
                                                    abs=1e-9)


class TestBruteForce:
    def test_single_region(self):
        p = CrfProblem(np.array([[3.0, 1.0, 2.0]]), {})
        result = brute_force_oracle(p)
        assert result.assignment.tolist() == [1]
        assert result.energy == 1.0

    def test_decoupled_product_of_argmins(self):
        unary = np.array([[2.0, 1.0], [0.25, 4.0], [5.0, 0.5]])
        result = brute_force_oracle(CrfProblem(unary, {}))
        assert result.assignment.tolist() == [1, 0, 1]

    def test_three_by_three_explicit_enumeration(self):
        rng = np.random.default_rng(8)
        p = CrfProblem(rng.uniform(0, 2, (3, 3)),
                       {(0, 1): rng.normal(size=(3, 3)),
                        (1, 2): rng.normal(size=(3, 3))})
        want = min(energy(p, np.array(z))
                   for z in itertools.product(range(3), repeat=3))
        assert brute_force_oracle(p).energy == pytest.approx(want)

    def test_lexicographic_tie_break(self):
        p = CrfProblem(np.zeros((3, 2)), {})  # all 8 labelings tie at 0
        assert brute_force_oracle(p).assignment.tolist() == [0, 0, 0]

    def test_size_guard(self):
        with pytest.raises(ValueError, match="too large"):
            brute_force_oracle(CrfProblem(np.zeros((30, 4)), {}))
