import math

import numpy as np
import pytest

from inliq import (ThresholdLadder, TransitionMatrix, analytic_matrix, contract,
                   drifted_escape_probability, island_members, islands,
                   successor_codes, two_threshold_matrix)


def random_ladder(rng, n, lo=1.2, hi=3.0, delta1=0.001):
    ratios = rng.uniform(lo, hi, size=n - 1)
    return ThresholdLadder(tuple(delta1 * np.cumprod(np.r_[1.0, ratios])))


class TestTwoThreshold:
    def test_doubling_branch_probability(self):
        m = two_threshold_matrix(0.001, 0.002)
        assert m.prob(1, 3) == pytest.approx(math.exp(-1), abs=1e-15)
        assert m.prob(2, 0) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_blind_rows_certain(self):
        m = two_threshold_matrix(0.001, 0.0017)
        assert m.prob(0, 1) == 1.0
        assert m.prob(3, 2) == 1.0

    def test_close_thresholds_limit(self):
        m = two_threshold_matrix(0.001, 0.001 + 1e-12)
        assert m.prob(1, 3) == pytest.approx(1.0, abs=1e-9)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            two_threshold_matrix(0.002, 0.001)

    def test_matrix_layout_appendix_form(self):
        alpha = math.exp(-0.7)
        m = two_threshold_matrix(0.001, 0.0017)
        W = m.dense()
        expected = np.array([
            [0, 1, 0, 0],
            [1 - alpha, 0, 0, alpha],
            [alpha, 0, 0, 1 - alpha],
            [0, 0, 1, 0],
        ])
        assert np.allclose(W, expected, atol=1e-12)


class TestAnalyticMatrix:
    def test_three_ladder_doubling_value(self):
        m = analytic_matrix(ThresholdLadder((0.001, 0.002, 0.004)))
        expected = math.exp(-2) / (1 - (1 - math.exp(-1)) * math.exp(-1))
        assert m.prob(3, 7) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.17634, abs=5e-6)

    def test_first_gap_probability_any_ladder(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 7))
            lad = random_ladder(rng, n)
            m = analytic_matrix(lad)
            a2 = math.exp(-(lad[1] - lad[0]) / lad[0])
            # states with far index 2: (1,0,...) and (0,1,...)
            assert m.prob(1, 3) == pytest.approx(a2, abs=1e-14)

    def test_rows_sum_to_one_and_sparsity(self, rng):
        for n in range(1, 9):
            lad = random_ladder(rng, max(n, 1)) if n > 1 else ThresholdLadder((0.001,))
            m = analytic_matrix(lad)
            m.validate(atol=1e-12)
            W = m.dense()
            assert np.allclose(W.sum(axis=1), 1.0, atol=1e-12)
            for s in range(1 << m.n):
                nz = set(np.flatnonzero(W[s]).tolist())
                assert nz <= set(successor_codes(s, m.n))

    def test_scale_invariance(self, rng):
        lad = random_ladder(rng, 6)
        m1 = analytic_matrix(lad)
        for c in (1e-3, 7.7, 1e4):
            m2 = analytic_matrix(lad.scaled(c))
            assert np.max(np.abs(m1.dense() - m2.dense())) <= 1e-12

    def test_single_threshold_alternator(self):
        W = analytic_matrix(ThresholdLadder((0.005,))).dense()
        assert np.array_equal(W, np.array([[0.0, 1.0], [1.0, 0.0]]))


class TestContraction:
    def test_identity_n2_to_8(self, rng):
        for n in range(2, 9):
            lad = random_ladder(rng, n)
            full = analytic_matrix(lad)
            reduced = analytic_matrix(lad.tail())
            err = np.max(np.abs(contract(full).dense() - reduced.dense()))
            assert err <= 1e-12, f"n={n}: {err}"

    def test_two_to_one_gives_alternator(self):
        m = contract(two_threshold_matrix(0.001, 0.0023))
        assert np.array_equal(m.dense(), np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_iterated_contraction_reaches_alternator(self, rng):
        lad = random_ladder(rng, 7)
        m = analytic_matrix(lad)
        while m.n > 1:
            m = contract(m)
        assert np.allclose(m.dense(), np.array([[0.0, 1.0], [1.0, 0.0]]), atol=1e-12)

    def test_needs_two_thresholds(self):
        with pytest.raises(ValueError):
            contract(analytic_matrix(ThresholdLadder((0.001,))))

    def test_contracted_rows_stochastic_for_any_stochastic_input(self, rng):
        # row sums survive contraction exactly, even for empirical-style
        # perturbed (but stochastic) inputs
        lad = random_ladder(rng, 4)
        m = analytic_matrix(lad)
        probs = m.probs.copy()
        far = m.succ[:, 1] >= 0
        noise = rng.uniform(-0.05, 0.05, size=far.sum())
        probs[far, 1] = np.clip(probs[far, 1] + noise, 0.01, 0.99)
        probs[far, 0] = 1.0 - probs[far, 1]
        m2 = TransitionMatrix(m.n, m.succ, probs)
        mc = contract(m2)
        assert np.allclose(mc.row_sums(), 1.0, atol=1e-12)


class TestIslands:
    def test_members(self):
        assert island_members(7) == (14, 15)
        assert island_members(0) == (0, 1)

    def test_level_one_islands(self):
        isl = islands(4, level=1)
        assert len(isl) == 8
        assert isl[3].members == (6, 7)
        assert all(i.level == 1 for i in isl)

    def test_level_bounds(self):
        with pytest.raises(ValueError):
            islands(3, level=0)
        with pytest.raises(ValueError):
            islands(3, level=4)


class TestDriftedEscape:
    def test_driftless_is_exponential(self):
        assert drifted_escape_probability(1.0, 1.0, 0.0, 1.0) == pytest.approx(
            math.exp(-1), abs=1e-15)
        assert drifted_escape_probability(2.5, 1.0, 0.0, 0.3) == pytest.approx(
            math.exp(-2.5), abs=1e-15)

    def test_driftless_limit_continuous(self):
        # the mu -> 0 limit of the drifted form approaches the analytic value
        base = drifted_escape_probability(1.3, 0.9, 0.0, 1.0)
        for mu in (1e-6, -1e-6, 1e-9):
            assert drifted_escape_probability(1.3, 0.9, mu, 1.0) == pytest.approx(
                base, rel=1e-5)

    def test_strong_drift_limits(self):
        assert drifted_escape_probability(1.0, 1.0, 200.0, 1.0) == pytest.approx(1.0, abs=1e-12)
        assert drifted_escape_probability(1.0, 1.0, -200.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_monotone_in_drift(self):
        mus = np.linspace(-3, 3, 25)
        vals = [drifted_escape_probability(1.0, 1.0, m, 1.0) for m in mus]
        assert np.all(np.diff(vals) > 0)

    def test_invalid_inputs(self):
        for bad in ((0.0, 1.0, 0.0, 1.0), (1.0, -1.0, 0.0, 1.0), (1.0, 1.0, 0.0, 0.0)):
            with pytest.raises(ValueError):
                drifted_escape_probability(*bad)


class TestMatrixCsv:
    def test_round_trip_preserves_probabilities_exactly(self, rng):
        lad = random_ladder(rng, 5)
        m = analytic_matrix(lad)
        back = TransitionMatrix.from_csv(m.to_csv())
        assert back.n == m.n
        assert np.array_equal(back.probs, m.probs)
        assert np.array_equal(back.succ, m.succ)

    def test_rejects_illegal_edge(self):
        text = "from,to,prob\n0,3,0.5\n"
        with pytest.raises(ValueError, match="not legal"):
            TransitionMatrix.from_csv(text, n=2)

    def test_from_dense_rejects_mass_off_pattern(self):
        W = np.zeros((4, 4))
        W[0, 2] = 1.0  # 0 -> 2 is not an edge
        with pytest.raises(ValueError):
            TransitionMatrix.from_dense(W, 2)
