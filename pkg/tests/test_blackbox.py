from __future__ import annotations

import numpy as np
import pytest

from pseudochain.blackbox import BlackBoxChain, ModeError
from pseudochain.dynamics import survival_amplitude
from pseudochain.hilbert import enumerate_sector
from pseudochain.topology import PseudoChainSpec


def test_exact_mode_is_ideal(chain121):
    box = BlackBoxChain(chain121)
    t = np.linspace(0, 3, 7)
    assert np.array_equal(box.query_survival(t).values, survival_amplitude(chain121, t).values)
    series = box.two_excitation_return_series(4)
    assert series[0] == pytest.approx(1.0)
    assert series[1] == 0 and series[3] == 0


def test_sampled_mode_is_seeded_and_unbiased(chain121):
    t = np.linspace(0, 3, 400)
    a = BlackBoxChain(chain121, "sampled", shots=10_000, seed=5).query_survival(t).values
    b = BlackBoxChain(chain121, "sampled", shots=10_000, seed=5).query_survival(t).values
    assert np.array_equal(a, b)
    exact = survival_amplitude(chain121, t).values
    z = (a.real - exact.real) / np.sqrt((1 - exact.real**2 + 1e-12) / 10_000)
    assert abs(z.mean()) < 0.2 and 0.8 < z.std() < 1.2


def test_series_refused_in_sampled_mode(chain121):
    box = BlackBoxChain(chain121, "sampled", seed=0)
    with pytest.raises(ModeError):
        box.mixed_correlator_series(4)
    with pytest.raises(ModeError):
        box.two_excitation_return_series(4)


def test_bad_mode(chain121):
    with pytest.raises(ValueError):
        BlackBoxChain(chain121, "noisy")


def test_hidden_spec_not_exposed(chain121):
    box = BlackBoxChain(chain121)
    public = [name for name in vars(box) if not name.startswith("_")]
    assert "spec" not in public and "hidden" not in public
    assert "PseudoChainSpec" not in repr(box)


def test_end_measurement_collapses(chain121):
    box = BlackBoxChain(chain121, seed=1)
    basis = enumerate_sector(4, 1)
    e1 = basis.basis_vector(1)
    t = np.pi / np.sqrt(2)  # perfect transfer for the uniform (1,2,1) chain
    meas = box.measure_end_Z(e1, 1, t)
    assert meas.outcome == -1
    assert meas.probabilities[-1] == pytest.approx(1.0)
    assert abs(meas.state[basis.rank(0b1000)]) == pytest.approx(1.0)


def test_sector_dim():
    box = BlackBoxChain(PseudoChainSpec.from_lists((1, 3, 1), (1.0, 1.0)))
    assert box.sector_dim(2) == 10
