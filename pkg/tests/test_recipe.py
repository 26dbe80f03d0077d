import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfwmarray.array import ModalEnvelope
from sfwmarray.errors import BoundaryMaximum, DegenerateFlat, InvalidModel, NoPhasematch
from sfwmarray.jsa import ChannelSet, DispersionChannel, GridSpec, PumpSpec, build_jsa
from sfwmarray.materials import wavelength_to_omega
from sfwmarray.recipe import (
    DESIGN_NOMINAL,
    ChannelNominal,
    DesignReport,
    default_bandwidth_bracket,
    energy_conserving_idler,
    find_phasematch_point,
    fit_design_dispersion,
    gvm_residual,
    optimize_pump_bandwidth,
    purity_objective,
    run_recipe,
    waveguide_dispersion,
)
from sfwmarray.schmidt import schmidt_decompose

PUMP = PumpSpec(1.17, 0.0133, 1.37)


def constant_channels(beta1s, carriers=(1.6, 1.2, 1.3, 1.5)):
    roles = ("main", "aux", "signal", "idler")
    return ChannelSet(*[DispersionChannel(r, w, (0.5 * w, 1.5 * w), taylor=(5.0, b)) for r, w, b in
                        zip(roles, carriers, beta1s)])


def test_gvm_trivial_cases():
    assert gvm_residual(constant_channels((1.0, 9.0, 1.0, 1.0))) == 0
    assert gvm_residual(constant_channels((2.0, 0.0, 1.0, 3.0))) == 0
    assert gvm_residual(constant_channels((1.0, 0.0, 1.0, 2.0))) == pytest.approx(-1.0)


def test_gvm_linear_in_main(channels):
    # residual is linear in the main inverse group velocity with slope 2
    r0 = gvm_residual(channels)
    main = channels.main
    shifted = DispersionChannel("main", main.carrier, main.window,
                                taylor=(main.taylor[0], main.taylor[1] + 1e-3) + main.taylor[2:])
    r1 = gvm_residual(ChannelSet(shifted, channels.aux, channels.signal, channels.idler))
    assert r1 - r0 == pytest.approx(2e-3, rel=1e-9)
    assert r0 == 0


def _perturbed(channels, ds, di):
    def bump(ch, d):
        t = ch.taylor
        return DispersionChannel(ch.role, ch.carrier, ch.window, taylor=(t[0], t[1] + d) + t[2:])

    return ChannelSet(channels.main, channels.aux, bump(channels.signal, ds), bump(channels.idler, di))


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-1e-2, 1e-2), b=st.floats(-1e-2, 1e-2))
def test_gvm_signal_idler_exchange(channels, a, b):
    # exchanging the two perturbations leaves the residual unchanged; opposite ones cancel
    r_ab = gvm_residual(_perturbed(channels, a, b))
    assert r_ab == pytest.approx(gvm_residual(_perturbed(channels, b, a)), abs=1e-13)
    assert gvm_residual(_perturbed(channels, a, -a)) == pytest.approx(0.0, abs=1e-13)
    assert r_ab == pytest.approx(-(a + b), abs=1e-13)


def test_energy_conserving_idler():
    lam_i = energy_conserving_idler(1.17, 1.37, 1.54)
    assert lam_i == pytest.approx(DESIGN_NOMINAL["idler"].wavelength, abs=1e-15)
    assert 1 / lam_i == pytest.approx(1 / 1.17 + 1 / 1.37 - 1 / 1.54, rel=1e-14)
    assert abs(lam_i - 1.08) < 0.015
    with pytest.raises(InvalidModel):
        energy_conserving_idler(1.17, 1.37, 0.5)


def test_fit_rejects_non_conserving_carriers():
    bad = dict(DESIGN_NOMINAL, idler=replace(DESIGN_NOMINAL["idler"], wavelength=1.08))
    with pytest.raises(InvalidModel, match="energy"):
        fit_design_dispersion(bad)
    with pytest.raises(InvalidModel):
        fit_design_dispersion({k: v for k, v in DESIGN_NOMINAL.items() if k != "aux"})


def test_nominal_table_matches_effective_index(lib):
    for role, nom in DESIGN_NOMINAL.items():
        got = waveguide_dispersion(0.22, 0.30, lib["silicon"], lib["silica"], lib["air"], nom.wavelength)
        assert got.n_eff == pytest.approx(nom.n_eff, abs=1e-9)
        assert got.n_group == pytest.approx(nom.n_group, abs=1e-4)
        assert got.gvd == pytest.approx(nom.gvd, abs=1e-3)


def test_phasematch_point(channels):
    pt = find_phasematch_point(channels, 1.37, (1.1, 1.25), main_wavelength=1.17)
    assert pt.signal == pytest.approx(1.54, abs=1e-9)
    assert pt.idler == pytest.approx(1.069201715251007, abs=1e-9)
    assert abs(pt.gvm_residual) < 1e-12
    # without a fixed main wavelength the GVM sign change selects the design point
    free = find_phasematch_point(channels, 1.37, (1.1, 1.25))
    assert free.main == pytest.approx(1.17, abs=1e-6)
    assert free.signal == pytest.approx(1.54, abs=1e-6)


def test_phasematch_continuity(channels):
    base = find_phasematch_point(channels, 1.37, (1.1, 1.25), main_wavelength=1.17)
    moved = find_phasematch_point(channels, 1.38, (1.1, 1.25), main_wavelength=1.17)
    assert 0 < abs(moved.signal - base.signal) < 0.05
    assert 1 / moved.signal + 1 / moved.idler == pytest.approx(1 / 1.17 + 1 / 1.38, rel=1e-12)


def test_degenerate_flat():
    chans = constant_channels((1.0, 1.0, 1.0, 1.0), carriers=(1.4, 1.4, 1.4, 1.4))
    with pytest.raises(DegenerateFlat):
        find_phasematch_point(chans, 1.3454, (1.3, 1.5), main_wavelength=1.3454)


def test_no_phasematch():
    # a constant offset in the aux phase constant can never be cancelled
    w = wavelength_to_omega(1.4)
    roles = ("main", "aux", "signal", "idler")
    chans = ChannelSet(*[DispersionChannel(r, w, (0.8 * w, 1.2 * w), taylor=(5.0 + (r == "aux"), 1.0))
                         for r in roles])
    with pytest.raises(NoPhasematch):
        find_phasematch_point(chans, 1.4, (1.35, 1.45), main_wavelength=1.4)
    with pytest.raises(NoPhasematch):
        find_phasematch_point(chans, 1.4, (1.35, 1.45))
    with pytest.raises(InvalidModel):
        find_phasematch_point(chans, 1.4, (1.45, 1.35))


def test_optimizer_interior_maximum():
    opt = optimize_pump_bandwidth(lambda b: math.exp(-math.log(b / 0.02) ** 2), (1e-3, 1.0))
    assert opt.bandwidth == pytest.approx(0.02, rel=2e-3)
    assert not opt.flat
    assert opt.purity == pytest.approx(1.0, abs=1e-5)


def test_optimizer_flat_and_boundary():
    opt = optimize_pump_bandwidth(lambda b: 0.5, (1e-3, 1e-1))
    assert opt.flat and opt.bandwidth == pytest.approx(1e-2) and opt.purity == 0.5
    with pytest.raises(BoundaryMaximum):
        optimize_pump_bandwidth(lambda b: b, (1e-3, 1e-1))
    with pytest.raises(InvalidModel):
        optimize_pump_bandwidth(lambda b: b, (1e-3, 5e-3))


def test_default_bracket(channels):
    lo, hi = default_bandwidth_bracket(channels, 305.0)
    assert hi == pytest.approx(20 * lo)
    chans = constant_channels((1.0, 1.0, 1.0, 1.0))
    with pytest.raises(InvalidModel):
        default_bandwidth_bracket(chans, 305.0)


def test_recipe_is_deterministic(reference_inputs, reference_report):
    again = run_recipe(reference_inputs)
    assert again.to_dict() == reference_report.to_dict()
    assert reference_report.ok
    assert list(DesignReport.STEPS) == ["gvm", "phasematch", "anti_crossing", "gap_solve", "array", "bandwidth",
                                        "purity"]


def test_recipe_reports_failing_step(reference_inputs):
    rep = run_recipe(replace(reference_inputs, target_Lc=1.0))
    assert not rep.ok
    assert rep.errors == [rep.errors[0]] and rep.errors[0]["step"] == 4
    assert rep.errors[0]["name"] == "gap_solve" and rep.errors[0]["error"] == "BracketError"
    assert rep.aux_width is not None and rep.gap is None and rep.baseline_purity is None


def test_fixed_bandwidth_and_length(reference_inputs, reference_report):
    rep = run_recipe(replace(reference_inputs, bandwidth=reference_report.optimal_bandwidth,
                             length=reference_report.device_length))
    assert rep.device_length == reference_report.device_length
    assert rep.apodized_purity == pytest.approx(reference_report.apodized_purity, abs=1e-9)


@pytest.mark.parametrize("scale", [0.97, 1.0, 1.03])
def test_apodization_helps_across_dispersion_family(guide7_envelope, scale):
    # perturb signal/idler group indices; the fit restores phase and group-velocity matching
    nominal = dict(DESIGN_NOMINAL)
    for r in ("signal", "idler"):
        c = nominal[r]
        nominal[r] = ChannelNominal(c.wavelength, c.n_eff, c.n_group * scale, c.gvd)
    chans = fit_design_dispersion(nominal)
    grid = GridSpec(128, 128)
    bracket = default_bandwidth_bracket(chans, guide7_envelope.length)
    best = optimize_pump_bandwidth(purity_objective(PUMP, chans, guide7_envelope, grid), bracket, rtol=1e-2)
    flat = ModalEnvelope.constant(1.0, guide7_envelope.length)
    baseline = schmidt_decompose(build_jsa(PUMP.with_bandwidth(best.bandwidth), chans, flat, grid)).purity
    assert best.purity > baseline + 0.1
    assert best.purity > 0.95
