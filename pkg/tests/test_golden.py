"""Pinned outcomes of the built-in presets.

Start positions, gains and bounds of the presets are our own choices; these
frozen numbers catch any change in how they play out.
"""
import json
from pathlib import Path

import numpy as np
import pytest

GOLDEN = json.loads((Path(__file__).parent / "golden" / "preset_outcomes.json").read_text())


@pytest.mark.parametrize("key", sorted(GOLDEN))
def test_preset_outcome_is_pinned(key, runs):
    name, _, mode = key.partition("/")
    sym = None if not mode else mode == "symmetric"
    _, log_, m, _ = runs.get(name, sym)
    g = GOLDEN[key]
    assert log_.n_steps == g["n_steps"]
    assert m.completion_step == g["completion_step"]
    assert (m.deadlock_start_step, m.deadlock_end_step) == (g["deadlock_start_step"], g["deadlock_end_step"])
    assert float(m.min_distance_series.min()) == pytest.approx(g["min_distance"], abs=1e-9)
    np.testing.assert_allclose(log_.x[-1], g["final_x"], atol=1e-9)
