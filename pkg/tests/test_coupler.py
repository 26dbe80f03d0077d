import math
from dataclasses import replace

import numpy as np
import pytest

from sfwmarray.coupler import (
    CouplerSpec,
    anti_crossing_sweep,
    anti_crossing_width,
    coupling_at_gap,
    gap_for_coupling_length,
    phase_matched_width,
    refine_anti_crossing,
    supermodes,
)
from sfwmarray.errors import BracketError, InvalidModel, ModeCutoff

# regression values for the 1.3 um sweep (0.55-0.80 um, 26 steps, gap 0.4 um)
REF_1300_WIDTH = 0.651892036436906
REF_1300_C = 0.018129340093737234


@pytest.fixture(scope="module")
def base(lib):
    return CouplerSpec(0.30, 0.65, 0.4, 0.22, lib["silicon"], lib["silica"], lib["air"], 1.37)


@pytest.fixture(scope="module")
def symmetric(base):
    return replace(base, width_aux=0.30, aux_order=0)


@pytest.fixture(scope="module")
def sweep_1370(base):
    return anti_crossing_sweep(base, (0.55, 0.85), 31)


@pytest.fixture(scope="module")
def tuned(base):
    return replace(base, width_aux=phase_matched_width(base, (0.6, 0.72)))


def test_symmetric_coupler(symmetric):
    r = supermodes(symmetric)
    assert r.detuning == 0
    assert r.coupling_C > 0
    assert r.beta_even > r.beta_odd
    cs = [coupling_at_gap(symmetric, g) for g in (0.2, 0.4, 0.8, 1.6)]
    assert np.all(np.diff(cs) < 0)
    assert coupling_at_gap(symmetric, 5.0) < 1e-6


def test_regression_1300(base):
    spec = replace(base, wavelength=1.3)
    pts = anti_crossing_sweep(spec, (0.55, 0.80), 26)
    assert all(p.ok for p in pts)
    best = refine_anti_crossing(spec, pts)
    assert best.width_aux == pytest.approx(REF_1300_WIDTH, abs=1e-5)
    assert best.splitting / 2 == pytest.approx(REF_1300_C, rel=1e-6)
    # C at the anti-crossing is half the minimum splitting
    assert supermodes(replace(spec, width_aux=best.width_aux)).coupling_C == pytest.approx(best.splitting / 2)
    assert best.splitting <= min(p.splitting for p in pts)


def test_sweep_shape(sweep_1370):
    assert all(p.ok for p in sweep_1370)
    s = np.array([p.splitting for p in sweep_1370])
    assert np.all(s > 0)
    k = int(np.argmin(s))
    assert 0 < k < s.size - 1
    # branches approach then repel: one interior minimum
    assert np.all(np.diff(s[: k + 1]) < 0) and np.all(np.diff(s[k:]) > 0)
    for p in sweep_1370:
        assert p.n_even > p.n_odd
        assert p.beta_even == pytest.approx(2 * math.pi / 1.37 * p.n_even, rel=1e-14)


def test_refined_width_near_zero_detuning(base, sweep_1370, tuned):
    best = refine_anti_crossing(base, sweep_1370)
    assert abs(best.width_aux - anti_crossing_width(sweep_1370).width_aux) <= 0.01
    assert abs(supermodes(tuned).detuning) < 1e-8
    assert best.width_aux == pytest.approx(tuned.width_aux, abs=2e-3)


def test_gap_solve_monotone(tuned):
    s500 = gap_for_coupling_length(tuned, 500.0)
    s1000 = gap_for_coupling_length(tuned, 1000.0)
    assert s1000.gap > s500.gap
    for target, sol in ((500.0, s500), (1000.0, s1000)):
        assert sol.coupling_length == pytest.approx(target, rel=1e-2)
        assert sol.coupling_length == pytest.approx(math.pi / sol.coupling, rel=1e-14)


def test_gap_solve_unreachable(tuned):
    with pytest.raises(BracketError, match="outside"):
        gap_for_coupling_length(tuned, 1.0)
    with pytest.raises(InvalidModel):
        gap_for_coupling_length(tuned, -5.0)
    with pytest.raises(InvalidModel):
        gap_for_coupling_length(tuned, 500.0, (1.0, 0.5))


def test_detuned_floor_reported(base):
    # far from phase matching the half-splitting cannot drop below |detuning| / 2
    spec = replace(base, width_aux=0.68)
    floor = 0.5 * abs(supermodes(spec).detuning)
    assert coupling_at_gap(spec, 1.5) >= floor
    assert math.pi / floor < 100.0
    with pytest.raises(BracketError, match="detuning"):
        gap_for_coupling_length(spec, 100.0)


def test_cutoff_and_validation(base):
    with pytest.raises(ModeCutoff):
        supermodes(replace(base, width_aux=0.2))
    with pytest.raises(InvalidModel):
        replace(base, gap=0.0)
    with pytest.raises(InvalidModel):
        anti_crossing_sweep(base, (0.5, 0.6), 1)


def test_sweep_marks_failures(base):
    pts = anti_crossing_sweep(base, (0.2, 0.7), 6)
    assert not pts[0].ok and "ModeCutoff" in pts[0].error
    assert math.isnan(pts[0].splitting)
    # coarse steps near the aux cutoff: the weakly bound branch jumps past a neighbour once
    assert [p.ok for p in pts] == [False, False, True, False, True, True]
    assert "lost track" in pts[3].error
