from __future__ import annotations

import numpy as np
import pytest

from pseudochain.blackbox import BlackBoxChain
from pseudochain.dynamics import Propagator
from pseudochain.errors import NotABlock, OutOfRange
from pseudochain.hilbert import build_hamiltonian
from pseudochain.topology import PseudoChainSpec
from pseudochain.traps import (
    TrapScenario,
    branch_probabilities,
    dark_states,
    find_discrimination_time,
    flip_decomposition,
    flush_exact_statistics,
    flush_monte_carlo,
    flush_protocol,
    posterior_update,
    symmetric_state,
    transfer_probability_with_trap,
)


@pytest.fixture
def scenario121(chain121):
    return TrapScenario.build(chain121, 1, 0.5)


def test_dark_states_are_orthonormal_and_decoupled(chain121, chain131):
    for spec, block in ((chain121, 1), (chain131, 1)):
        dark = dark_states(spec, block)
        assert dark.shape == (spec.sizes[block] - 1, spec.n_spins)
        assert np.allclose(dark @ dark.T, np.eye(len(dark)), atol=1e-14)
        assert np.allclose(dark @ symmetric_state(spec, block), 0.0, atol=1e-14)
        h = build_hamiltonian(spec, 1).toarray()
        # H maps a dark state onto its own block only
        outside = np.delete(h @ dark.T, list(range(1, 1 + spec.sizes[block])), axis=0)
        assert np.max(np.abs(outside)) < 1e-15


def test_dark_state_stays_in_block():
    spec = PseudoChainSpec.from_lists((1, 3, 2, 1), (0.9, 1.2, 0.7), (0.1, -0.4, 0.3, 0.2), (0, 0.6, -0.2, 0))
    dark = dark_states(spec, 1)
    t = np.linspace(0, 100, 51)
    psi = Propagator(build_hamiltonian(spec, 1)).series(dark[1], t)
    assert np.max(np.abs(psi[:, [0, 4, 5, 6]])) < 1e-10


def test_single_spin_block_has_no_dark_states(chain121):
    with pytest.raises(NotABlock):
        dark_states(chain121, 0)
    with pytest.raises(OutOfRange):
        dark_states(chain121, 7)


def test_flip_decomposition(chain121, chain131):
    assert flip_decomposition(chain121, 1, 0) == pytest.approx((1 / 2, 1 / 2))
    assert flip_decomposition(chain131, 1, 2) == pytest.approx((1 / 3, 2 / 3))


def test_scenario_validation(chain121):
    with pytest.raises(OutOfRange):
        TrapScenario(chain121, 1, np.array([0, 1, 1, 0]) / np.sqrt(2), 0.5)
    with pytest.raises(OutOfRange):
        TrapScenario(chain121, 1, dark_states(chain121, 1)[0], 1.5)


def test_mixture_is_convex(chain131):
    sc = TrapScenario.build(chain131, 1, 0.3, rng=np.random.default_rng(0))
    t = np.linspace(0, 10, 41)
    tr, un = branch_probabilities(sc, t)
    mix = transfer_probability_with_trap(sc, t)
    assert np.allclose(mix.values, 0.3 * tr.values + 0.7 * un.values, atol=1e-14)


def test_two_spin_trap_blocks_transfer(scenario121):
    tr, un = branch_probabilities(scenario121, np.linspace(0, 20, 201))
    assert tr.values.max() < 1e-20
    assert un.values.max() > 0.99


def test_discrimination_time(scenario121):
    d = find_discrimination_time(scenario121, window=(0.0, 20.0))
    assert d is not None and d.p_trapped <= 1e-3 and d.p_untrapped >= 0.2
    assert d.certifying
    with pytest.raises(OutOfRange):
        find_discrimination_time(scenario121, eps=0.3, theta=0.2)


def test_linear_chain_has_no_trap():
    with pytest.raises(NotABlock):
        TrapScenario.build(PseudoChainSpec.linear((1.0, 1.0)), 1)


def test_posterior_rules():
    assert posterior_update(0.5, -1, 0.0, 0.8) == 0.0
    assert posterior_update(0.0, +1, 0.0, 0.8) == 0.0
    assert posterior_update(0.5, +1, 0.0, 0.8) == pytest.approx(0.5 / (0.5 + 0.5 * 0.2))


def test_flush_flat_when_prior_zero(chain121):
    sc = TrapScenario.build(chain121, 1, 0.0)
    result = flush_protocol(BlackBoxChain(chain121, seed=0), sc, 5)
    assert result.posteriors == [0.0] * 5


def test_flush_untrapped_detection_certifies(chain121, scenario121):
    result = flush_protocol(BlackBoxChain(chain121, seed=3), scenario121, 6, trapped=False)
    first = result.outcomes.index(-1)
    assert all(q == 0.0 for q in result.posteriors[first:])


def test_no_false_certification(chain121, scenario121):
    box = BlackBoxChain(chain121, seed=11)
    d = find_discrimination_time(scenario121)
    for _ in range(50):
        result = flush_protocol(box, scenario121, 5, d, trapped=True)
        assert -1 not in result.outcomes
        assert all(q > 0 for q in result.posteriors)


def test_monte_carlo_matches_exact_statistics(chain121, scenario121):
    d = find_discrimination_time(scenario121)
    runs, rounds = 300, 4
    traj = flush_monte_carlo(BlackBoxChain(chain121, seed=2), scenario121, rounds, runs, d)
    mean, var, _ = flush_exact_statistics(0.5, d.p_trapped, d.p_untrapped, rounds)
    assert np.all(np.abs(traj.mean(axis=0) - mean) <= 3 * np.sqrt(var / runs) + 1e-12)
