import numpy as np
import pytest

from mcnpower import GenMethod, GenSpec, Rule, RuleSet, WeightScheme, generate_rulesets


@pytest.fixture
def worked_example() -> RuleSet:
    """Three agents a, b, c with rules (a and b) -> 3, (a and not c) -> 1,
    (b and not c) -> 2. Hand-verified values: v({a})=1, v({b})=2, v({a,b})=6."""
    return RuleSet(
        m=3,
        rules=(
            Rule(req=0b011, ban=0b000, weight=3.0),
            Rule(req=0b001, ban=0b100, weight=1.0),
            Rule(req=0b010, ban=0b100, weight=2.0),
        ),
        agent_names=("a", "b", "c"),
    )


A, B, C = 0b001, 0b010, 0b100  # agent bits for the worked example


def random_game(rng: np.random.Generator, m: int, n: int | None = None,
                nonnegative: bool = True) -> RuleSet:
    """A random rule set with nonempty patterns and nonzero total weight."""
    n = n if n is not None else int(rng.integers(3, 12))
    rules = []
    for _ in range(n):
        req = ban = 0
        for a in range(m):
            draw = rng.random()
            if draw < 0.35:
                req |= 1 << a
            elif draw < 0.55:
                ban |= 1 << a
        if nonnegative:
            weight = float(rng.uniform(0.1, 5.0))
        else:
            weight = float(rng.uniform(-5.0, 5.0))
        rules.append(Rule(req=req, ban=ban, weight=weight))
    return RuleSet(m=m, rules=tuple(rules))


def random_generated_game(rng: np.random.Generator, m: int) -> RuleSet:
    """A random game drawn through one of the three dataset generators."""
    method = GenMethod(["uniform", "coinflip", "mog"][int(rng.integers(3))])
    scheme = WeightScheme(["uniform", "gauss_low", "gauss_high"][int(rng.integers(3))])
    spec = GenSpec(
        method=method,
        k=1,
        n=int(rng.integers(5, 21)),
        m=m,
        p=float(rng.uniform(0.2, 0.8)),
        c=int(rng.integers(1, m + 1)),
        weight_scheme=scheme,
        seed=int(rng.integers(2**63)),
    )
    return generate_rulesets(spec)[0]
