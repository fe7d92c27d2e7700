import numpy as np
import pytest

from regret_umdp.model import MdpSample, Umdp


def chain_two_actions(cost_a1=1.0, cost_a2=2.0):
    """s0 --a1 (cost 1)--> g, s0 --a2 (cost 2)--> g; goal is state 1."""
    rows = [(0, 0, 1, 1.0, cost_a1), (0, 1, 1, 1.0, cost_a2), (1, 0, 1, 1.0, 0.0), (1, 1, 1, 1.0, 0.0)]
    return MdpSample.from_triples(2, 2, 0, (1,), rows)


def matrix_game():
    """One decision state, two samples: a1 costs (1, 3), a2 costs (2, 2)."""
    return Umdp.from_samples([chain_two_actions(1.0, 2.0), chain_two_actions(3.0, 2.0)])


def deceptive_chain():
    """Cheap first step into an expensive region versus a dearer direct route.

    s0 --a0 (cost 0.1)--> s1 --(cost 5)--> g ;  s0 --a1 (cost 1)--> g.
    """
    rows = [(0, 0, 1, 1.0, 0.1), (0, 1, 3, 1.0, 1.0),
            (1, 0, 2, 1.0, 5.0), (1, 1, 2, 1.0, 5.0),
            (2, 0, 3, 1.0, 5.0), (2, 1, 3, 1.0, 5.0),
            (3, 0, 3, 1.0, 0.0), (3, 1, 3, 1.0, 0.0)]
    return MdpSample.from_triples(4, 2, 0, (3,), rows)


@pytest.fixture
def chain():
    return chain_two_actions()


@pytest.fixture
def game():
    return matrix_game()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
