from __future__ import annotations

import numpy as np

from pseudochain.calibration import FEATURES, calibrate, design, render_report, write_report
from pseudochain.inference import even_onset_coefficient
from pseudochain.topology import effective_model


def test_design_is_seeded():
    a, b = design(3, seed=4), design(3, seed=4)
    assert [i.spec for i in a] == [i.spec for i in b]
    assert all(2 <= i.block_index <= 4 and i.size >= 2 for i in a)


def test_fit_recovers_integer_bracket():
    result = calibrate(n_design=12, n_held_out=4, seed=1)
    assert len(result.fit.coefficients) == len(FEATURES)
    assert np.allclose(result.fit.coefficients, (3, -1, 1, 0, 0, -2, 0, 0), atol=1e-8)
    assert result.held_out < 1e-6


def test_fitted_law_matches_inference_form():
    for inst in design(4, seed=9):
        model = effective_model(inst.spec)
        law = even_onset_coefficient(model, inst.block_index, inst.size, inst.intra)
        assert abs(law - inst.exact_coefficient()) <= 1e-9 * abs(inst.exact_coefficient())


def test_report_written(tmp_path):
    result = write_report(tmp_path / "cal.md", calibrate(n_design=12, n_held_out=3))
    text = (tmp_path / "cal.md").read_text()
    assert text == render_report(result)
    assert "2^N" in text and "Held-out" in text
