from __future__ import annotations

import numpy as np
import pytest

from pseudochain.blackbox import BlackBoxChain
from pseudochain.dynamics import TimeSeries
from pseudochain.errors import Breakdown, NonPositiveWeights, RankDeficient
from pseudochain.tomography import (
    SpectralData,
    estimate_spectrum,
    reconstruct_jacobi,
    run_tomography,
    spectral_data,
)
from pseudochain.topology import ModelChainSpec, PseudoChainSpec


def test_forward_map_weights_sum_to_one():
    data = spectral_data(ModelChainSpec((1.0, 0.5), (0.1, 0.2, -0.3)))
    assert data.weights.sum() == pytest.approx(1.0)
    assert np.all(np.diff(data.eigenvalues) > 0)


def test_jacobi_round_trip():
    model = ModelChainSpec((0.9, 1.3, 0.6, 1.1), (0.2, -0.5, 0.4, 0.0, -0.1))
    back = reconstruct_jacobi(spectral_data(model))
    assert np.allclose(back.couplings, model.couplings, atol=1e-12)
    assert np.allclose(back.effective_fields, model.effective_fields, atol=1e-12)


def test_jacobi_rejects_bad_data():
    with pytest.raises(NonPositiveWeights):
        reconstruct_jacobi(SpectralData(np.array([0.0, 1.0]), np.array([1.0, 0.0])))
    with pytest.raises(Breakdown):
        reconstruct_jacobi(SpectralData(np.array([0.0, 0.0]), np.array([0.5, 0.5])))


def test_uniform_three_chain_from_exact_box(linear3):
    report = run_tomography(BlackBoxChain(linear3))
    assert np.allclose(report.model.couplings, (1.0, 1.0), atol=1e-6)
    assert np.allclose(report.model.effective_fields, 0.0, atol=1e-6)
    assert report.to_dict()["n_points"] == report.n_points


def test_single_spin_gives_field_only():
    report = run_tomography(BlackBoxChain(PseudoChainSpec.linear((), (0.37,))))
    assert report.model.couplings == ()
    assert report.model.effective_fields[0] == pytest.approx(0.37, abs=1e-9)


def test_pseudo_chain_gives_effective_model():
    spec = PseudoChainSpec.from_lists((1, 3, 1), (1.0, 0.8), (0.1, 0.2, -0.1), (0.0, 0.3, 0.0))
    report = run_tomography(BlackBoxChain(spec))
    assert np.allclose(report.model.effective_fields, (0.1, 0.8, -0.1), atol=1e-9)


def test_pencil_recovers_modes():
    t = 0.1 * np.arange(200)
    lam, w = np.array([-1.3, 0.2, 0.9]), np.array([0.2, 0.5, 0.3])
    data = estimate_spectrum(TimeSeries(t, np.exp(-1j * np.outer(t, lam)) @ w))
    assert np.allclose(data.eigenvalues, lam, atol=1e-10)
    assert np.allclose(data.weights, w, atol=1e-10)


def test_pencil_needs_uniform_grid():
    t = np.array([0.0, 0.1, 0.3, 0.4])
    with pytest.raises(RankDeficient):
        estimate_spectrum(TimeSeries(t, np.ones(4, complex)))


def test_sampled_round_trip_small_chain():
    model = ModelChainSpec((1.0, 0.8), (0.2, -0.1, 0.3))
    box = BlackBoxChain(model.as_pseudo_chain(), "sampled", shots=10**6, seed=3)
    report = run_tomography(box)
    assert report.model.n_sites == 3
    assert np.allclose(report.model.couplings, model.couplings, atol=1e-2)
    assert np.allclose(report.model.effective_fields, model.effective_fields, atol=1e-2)
