import numpy as np
import pytest

from mcnpower import (
    GameSizeError,
    IndexKind,
    Method,
    PowerVector,
    Rule,
    RuleSet,
    ZeroTotalWeightError,
    coalition_value,
    exact_alg4_estimand,
    exact_alg5_estimand,
    exact_banzhaf_eq1,
    exact_shapley_eq2,
)
from mcnpower.errors import DataFormatError

from conftest import random_game, random_generated_game
from _reference import (
    naive_alg4,
    naive_alg5,
    naive_banzhaf_eq1,
    naive_shapley_eq2,
    set_rules,
)

# Hand-enumerated index vectors for the worked example (see tests for the
# characteristic function in test_game.py). alg4/alg5 values were computed
# by brute force over all 8 coalitions / all 6 orderings and frozen here.
WORKED_EQ = np.array([2.0, 2.5, -1.5])
WORKED_ALG4 = np.array([1 / 6, 5 / 24, 1 / 8])
WORKED_ALG5 = np.array([5 / 36, 7 / 36, 0.0])


class TestWorkedExample:
    def test_classical_banzhaf(self, worked_example):
        pv = exact_banzhaf_eq1(worked_example)
        np.testing.assert_allclose(pv.values, WORKED_EQ, atol=1e-12)
        assert pv.kind is IndexKind.BANZHAF_EQ1
        assert pv.method is Method.EXACT

    def test_classical_shapley(self, worked_example):
        pv = exact_shapley_eq2(worked_example)
        np.testing.assert_allclose(pv.values, WORKED_EQ, atol=1e-12)

    def test_shapley_efficiency(self, worked_example):
        total = exact_shapley_eq2(worked_example).values.sum()
        grand = coalition_value(worked_example, worked_example.full_mask())
        assert total == pytest.approx(grand, abs=1e-12)

    def test_sampling_estimand_banzhaf(self, worked_example):
        pv = exact_alg4_estimand(worked_example)
        np.testing.assert_allclose(pv.values, WORKED_ALG4, atol=1e-12)

    def test_sampling_estimand_shapley_golden(self, worked_example):
        pv = exact_alg5_estimand(worked_example)
        np.testing.assert_allclose(pv.values, WORKED_ALG5, atol=1e-12)


class TestSpecialGames:
    def test_all_agents_required_splits_banzhaf_evenly(self):
        m = 6
        rs = RuleSet(m=m, rules=(Rule(req=(1 << m) - 1, ban=0, weight=1.0),))
        pv = exact_banzhaf_eq1(rs)
        np.testing.assert_allclose(pv.values, np.full(m, 1 / 2 ** (m - 1)))

    def test_dummy_agent_is_exactly_zero_under_all_semantics(self):
        # agent 3 appears in no rule
        rs = RuleSet(m=4, rules=(Rule(0b001, 0b010, 2.0), Rule(0b100, 0, 1.0)))
        for fn in (exact_banzhaf_eq1, exact_shapley_eq2, exact_alg4_estimand,
                   exact_alg5_estimand):
            assert fn(rs).values[3] == 0.0

    def test_empty_ruleset_classical_indices_are_zero(self):
        rs = RuleSet(m=3, rules=())
        assert np.all(exact_banzhaf_eq1(rs).values == 0.0)
        assert np.all(exact_shapley_eq2(rs).values == 0.0)

    def test_zero_total_weight_is_an_error_for_normalized_kinds(self):
        empty = RuleSet(m=3, rules=())
        cancelling = RuleSet(m=3, rules=(Rule(0b1, 0, 1.0), Rule(0b10, 0, -1.0)))
        for rs in (empty, cancelling):
            with pytest.raises(ZeroTotalWeightError):
                exact_alg4_estimand(rs)
            with pytest.raises(ZeroTotalWeightError):
                exact_alg5_estimand(rs)

    def test_sole_gatekeeper_takes_all_ordering_credit(self):
        rs = RuleSet(m=2, rules=(Rule(req=0b01, ban=0, weight=1.0),))
        np.testing.assert_allclose(exact_alg5_estimand(rs).values, [1.0, 0.0])

    def test_scale_invariance_of_normalized_estimands(self):
        rng = np.random.default_rng(7)
        base = random_game(rng, m=5)
        doubled = RuleSet(
            m=5, rules=tuple(Rule(r.req, r.ban, 2.0 * r.weight) for r in base.rules)
        )
        np.testing.assert_allclose(
            exact_alg4_estimand(base).values, exact_alg4_estimand(doubled).values,
            atol=1e-12,
        )
        np.testing.assert_allclose(
            exact_alg5_estimand(base).values, exact_alg5_estimand(doubled).values,
            atol=1e-12,
        )


class TestSizeCaps:
    def test_subset_enumeration_cap(self):
        rs = RuleSet(m=21, rules=(Rule(1, 0, 1.0),))
        for fn in (exact_banzhaf_eq1, exact_shapley_eq2, exact_alg4_estimand):
            with pytest.raises(GameSizeError):
                fn(rs)

    def test_permutation_enumeration_cap(self):
        rs = RuleSet(m=11, rules=(Rule(1, 0, 1.0),))
        with pytest.raises(GameSizeError):
            exact_alg5_estimand(rs)


class TestAgainstNaiveReference:
    """Cross-validation against set-based pure-python enumeration."""

    @pytest.mark.parametrize("seed", range(12))
    def test_all_four_semantics_on_random_games(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 6))
        rs = random_game(rng, m=m, nonnegative=seed % 2 == 0)
        if rs.total_weight == 0.0:
            return
        rules = set_rules(rs)
        np.testing.assert_allclose(
            exact_banzhaf_eq1(rs).values, naive_banzhaf_eq1(m, rules), atol=1e-10
        )
        np.testing.assert_allclose(
            exact_shapley_eq2(rs).values, naive_shapley_eq2(m, rules), atol=1e-10
        )
        np.testing.assert_allclose(
            exact_alg4_estimand(rs).values, naive_alg4(m, rules), atol=1e-10
        )
        np.testing.assert_allclose(
            exact_alg5_estimand(rs).values, naive_alg5(m, rules), atol=1e-10
        )

    @pytest.mark.parametrize("seed", range(8))
    def test_alg4_closed_form(self, seed):
        # independent derivation: a rule changes status for an agent in its
        # masks in exactly 2^(m - |req| - |ban|) coalitions, so the estimand
        # is sum over participating rules of w * 2^-(|req|+|ban|), normalized
        rng = np.random.default_rng(100 + seed)
        m = int(rng.integers(3, 13))
        rs = random_game(rng, m=m)
        expected = np.zeros(m)
        for rule in rs.rules:
            size = bin(rule.req | rule.ban).count("1")
            for a in range(m):
                if (rule.req | rule.ban) >> a & 1:
                    expected[a] += rule.weight * 2.0**-size
        expected /= rs.total_weight
        np.testing.assert_allclose(exact_alg4_estimand(rs).values, expected, atol=1e-10)


class TestInvariants:
    @pytest.mark.parametrize("seed", range(20))
    def test_shapley_efficiency_on_random_games(self, seed):
        rng = np.random.default_rng(200 + seed)
        m = int(rng.integers(2, 9))
        rs = random_game(rng, m=m, nonnegative=False)
        total = exact_shapley_eq2(rs).values.sum()
        grand = coalition_value(rs, rs.full_mask())
        assert total == pytest.approx(grand - coalition_value(rs, 0), abs=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_symmetric_agents_get_equal_values(self, seed):
        # duplicate every rule with agents 0 and 1 swapped; the rule set is
        # then invariant under exchanging them
        rng = np.random.default_rng(300 + seed)
        base = random_game(rng, m=5, n=4)
        swapped = tuple(
            Rule(_swap01(r.req), _swap01(r.ban), r.weight) for r in base.rules
        )
        rs = RuleSet(m=5, rules=base.rules + swapped)
        if rs.total_weight == 0.0:
            return
        for fn in (exact_banzhaf_eq1, exact_shapley_eq2, exact_alg4_estimand,
                   exact_alg5_estimand):
            values = fn(rs).values
            assert values[0] == pytest.approx(values[1], abs=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_ordering_estimand_bounded_for_nonnegative_weights(self, seed):
        rng = np.random.default_rng(400 + seed)
        rs = random_generated_game(rng, m=int(rng.integers(2, 7)))
        values = exact_alg5_estimand(rs).values
        assert np.all(values >= 0.0)
        assert np.all(values <= 1.0)
        assert values.sum() <= 1.0 + 1e-9

    @pytest.mark.parametrize("seed", range(6))
    def test_argmax_stable_under_uniform_scaling(self, seed):
        rng = np.random.default_rng(500 + seed)
        rs = random_game(rng, m=5)
        scaled = RuleSet(
            m=5, rules=tuple(Rule(r.req, r.ban, 3.5 * r.weight) for r in rs.rules)
        )
        for fn in (exact_banzhaf_eq1, exact_shapley_eq2, exact_alg4_estimand,
                   exact_alg5_estimand):
            assert np.argmax(fn(rs).values) == np.argmax(fn(scaled).values)


def _swap01(mask: int) -> int:
    low = (mask & 0b01) << 1 | (mask & 0b10) >> 1
    return (mask & ~0b11) | low


class TestPowerVector:
    def test_json_roundtrip(self, worked_example):
        pv = exact_banzhaf_eq1(worked_example)
        again = PowerVector.from_dict(pv.to_dict())
        np.testing.assert_array_equal(pv.values, again.values)
        assert again.kind is pv.kind and again.method is pv.method

    def test_exact_method_forbids_sampling_metadata(self):
        with pytest.raises(ValueError):
            PowerVector(np.zeros(2), IndexKind.BANZHAF_EQ1, Method.EXACT, samples=10)

    def test_inconsistent_length_rejected(self):
        doc = {"kind": "banzhaf_eq1", "method": "exact", "m": 3, "values": [0.0]}
        with pytest.raises(DataFormatError):
            PowerVector.from_dict(doc)
