"""Three-step source design: group-velocity matching and phasematch point,
auxiliary-guide tuning to the anti-crossing, and gap choice for a target
coupling length; then pump-bandwidth optimization and purity comparison.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .array import ArraySpec, envelope_of_guide, first_zero_after_peak, propagate, ModalEnvelope
from .coupler import CouplerSpec, anti_crossing_sweep, gap_for_coupling_length, refine_anti_crossing
from .errors import BoundaryMaximum, DegenerateFlat, InvalidModel, NoPhasematch, OutOfWindow, SfwmError
from .jsa import (
    ChannelSet,
    DispersionChannel,
    GridSpec,
    PumpSpec,
    build_jsa,
    jsi_sidelobe_ratio,
    phase_mismatch,
)
from .materials import C_UM_PER_FS, omega_to_wavelength, wavelength_to_omega
from .schmidt import schmidt_decompose
from .slab import effective_index_waveguide

ROLES = ("main", "aux", "signal", "idler")


@dataclass(frozen=True)
class ChannelNominal:
    """Phase index, group index and GVD (fs^2/um) of one field at its carrier."""

    wavelength: float
    n_eff: float
    n_group: float
    gvd: float = 0.0


# Nominal 0.22 x 0.30 um silicon strip values (effective-index chain, default
# materials): wavelength um, n_eff, n_group, GVD fs^2/um. The idler carrier is the
# energy-conserving partner of the other three.
DESIGN_NOMINAL = {
    "main": ChannelNominal(1.17, 2.5441627514, 4.3875, 1.2857),
    "aux": ChannelNominal(1.37, 2.2417271284, 4.1951, 5.1573),
    "signal": ChannelNominal(1.54, 2.0191655136, 3.8273, 11.4519),
    "idler": ChannelNominal(1.069201715251007, 2.7050633467, 4.4328, 0.8421),
}


def waveguide_dispersion(
    height, width, core, substrate, top, wavelength, polarization="TE", lateral=None, rel_step=2e-3
) -> ChannelNominal:
    """Nominal dispersion of a strip guide's fundamental mode from the effective-index chain.

    ``beta(w)`` is differentiated by central differences with step ``rel_step * w``.
    """
    w0 = wavelength_to_omega(wavelength)
    h = rel_step * w0

    def beta(w):
        lam = omega_to_wavelength(w)
        mode = effective_index_waveguide(height, width, core, substrate, top, lam, polarization=polarization,
                                         lateral=lateral)
        return mode.effective_index * w / C_UM_PER_FS

    bp, b0, bm = beta(w0 + h), beta(w0), beta(w0 - h)
    return ChannelNominal(
        float(wavelength),
        b0 * C_UM_PER_FS / w0,
        (bp - bm) / (2 * h) * C_UM_PER_FS,
        (bp - 2 * b0 + bm) / h**2,
    )


def energy_conserving_idler(main_wavelength, aux_wavelength, signal_wavelength) -> float:
    """Idler wavelength fixed by ``w_i = w_m + w_a - w_s``."""
    wi = wavelength_to_omega(main_wavelength) + wavelength_to_omega(aux_wavelength) - wavelength_to_omega(
        signal_wavelength
    )
    if wi <= 0:
        raise InvalidModel("signal frequency exceeds the total pump frequency")
    return omega_to_wavelength(wi)


def fit_design_dispersion(nominal: dict[str, ChannelNominal], window_fraction: float = 0.3) -> ChannelSet:
    """Quadratic channels that phasematch and group-velocity match exactly at the carriers.

    The aux phase constant absorbs the nominal mismatch so that ``dbeta = 0``, and the
    main inverse group velocity is set to the signal/idler mean so that
    ``2/v_m - 1/v_s - 1/v_i = 0``. Signal and idler keep their nominal values.
    """
    missing = [r for r in ROLES if r not in nominal]
    if missing:
        raise InvalidModel(f"nominal dispersion lacks channels {missing}")
    ch = {
        r: DispersionChannel.from_indices(r, c.wavelength, c.n_eff, c.n_group, c.gvd, window_fraction)
        for r, c in nominal.items()
        if r in ROLES
    }
    ws, wi, wm, wa = (ch[r].carrier for r in ("signal", "idler", "main", "aux"))
    if abs(ws + wi - wm - wa) > 1e-9 * wm:
        raise InvalidModel("nominal carriers are not energy conserving (w_s + w_i != w_m + w_a)")
    b_s, b_i = ch["signal"].taylor, ch["idler"].taylor
    main = ch["main"].taylor
    main = (main[0], 0.5 * (b_s[1] + b_i[1])) + main[2:]
    aux = ch["aux"].taylor
    aux = (b_s[0] + b_i[0] - main[0],) + aux[1:]
    ch["main"] = _with_taylor(ch["main"], main)
    ch["aux"] = _with_taylor(ch["aux"], aux)
    return ChannelSet(ch["main"], ch["aux"], ch["signal"], ch["idler"])


def _with_taylor(channel: DispersionChannel, taylor) -> DispersionChannel:
    return DispersionChannel(channel.role, channel.carrier, channel.window, taylor=tuple(taylor))


def gvm_residual(channels: ChannelSet, omega_m=None, omega_s=None, omega_i=None) -> float:
    """``2/v_m - 1/v_s - 1/v_i`` in fs/um, at the carriers unless frequencies are given."""
    return float(
        2 * channels.main.beta1(omega_m) - channels.signal.beta1(omega_s) - channels.idler.beta1(omega_i)
    )


@dataclass(frozen=True)
class PhasematchPoint:
    signal: float  # um
    idler: float
    main: float
    aux: float
    gvm_residual: float  # at this point, fs/um

    def as_tuple(self):
        return (self.signal, self.idler, self.main, self.aux)


def _root_on_line(channels: ChannelSet, omega_m, omega_a, scan_points, tol):
    """Signal frequency on ``w_s + w_i = w_m + w_a`` where ``dbeta = 0``, nearest the signal carrier."""
    total = omega_m + omega_a
    lo = max(channels.signal.window[0], total - channels.idler.window[1])
    hi = min(channels.signal.window[1], total - channels.idler.window[0])
    if not lo < hi:
        return None, False

    def db(ws):
        return phase_mismatch(channels, ws, total - ws, omega_a)

    ws = np.linspace(lo, hi, scan_points)
    f = np.asarray(db(ws))
    scale = max(float(np.max(np.abs(channels.signal.beta(ws)))), 1.0)
    if np.max(np.abs(f)) <= 1e-13 * scale:
        return None, True
    idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]
    if idx.size == 0:
        return None, False
    k = idx[np.argmin(np.abs(ws[idx] - channels.signal.carrier))]
    a, b = ws[k], ws[k + 1]
    fa = f[k]
    if fa == 0:
        return float(a), False
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = float(db(m))
        if fm == 0 or b - a < tol:
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b), False


def find_phasematch_point(
    channels: ChannelSet,
    aux_wavelength: float,
    main_window: tuple[float, float],
    main_wavelength: float | None = None,
    n_candidates: int = 41,
    scan_points: int = 2001,
    tol: float = 1e-13,
) -> PhasematchPoint:
    """Phasematched signal/idler pair on the frequency-matching contour.

    Each candidate main wavelength in ``main_window`` gives one straight
    frequency-matching line, searched for ``dbeta = 0`` by scan and bisection.
    With ``main_wavelength`` given, that line alone is used; otherwise the
    candidate where the group-velocity-matching residual changes sign is chosen.
    """
    wa = wavelength_to_omega(aux_wavelength)

    def solve(lam_m):
        wm = wavelength_to_omega(lam_m)
        ws, flat = _root_on_line(channels, wm, wa, scan_points, tol)
        if flat:
            raise DegenerateFlat(f"dbeta vanishes along the whole matching line at main {lam_m:.6g} um")
        if ws is None:
            return None
        wi = wm + wa - ws
        return PhasematchPoint(
            omega_to_wavelength(ws), omega_to_wavelength(wi), float(lam_m), float(aux_wavelength),
            gvm_residual(channels, wm, ws, wi),
        )

    if main_wavelength is not None:
        pt = solve(main_wavelength)
        if pt is None:
            raise NoPhasematch(f"no sign change of dbeta on the matching line at main {main_wavelength} um")
        return pt
    lo, hi = main_window
    if not 0 < lo < hi:
        raise InvalidModel(f"bad main window {main_window}")
    pts = [solve(x) for x in np.linspace(lo, hi, n_candidates)]
    good = [p for p in pts if p is not None]
    if not good:
        raise NoPhasematch(f"dbeta has no sign change for any main wavelength in {main_window} um")
    for p, q in zip(good[:-1], good[1:]):
        if p.gvm_residual == 0:
            return p
        if np.sign(p.gvm_residual) != np.sign(q.gvm_residual):
            a, b, fa = p.main, q.main, p.gvm_residual
            best = p
            while b - a > 1e-9:
                m = 0.5 * (a + b)
                pm = solve(m)
                if pm is None:
                    break
                best = pm
                if np.sign(pm.gvm_residual) == np.sign(fa):
                    a, fa = m, pm.gvm_residual
                else:
                    b = m
            return best
    # no sign change: best available match
    return min(good, key=lambda p: abs(p.gvm_residual))


@dataclass(frozen=True)
class BandwidthOptimum:
    bandwidth: float  # rad/fs
    purity: float
    flat: bool = False


def optimize_pump_bandwidth(
    purity_of: Callable[[float], float],
    bracket: tuple[float, float],
    rtol: float = 1e-3,
    coarse: int = 9,
) -> BandwidthOptimum:
    """Maximize ``purity_of(bandwidth)`` by golden section over log-bandwidth.

    A coarse log scan locates the best interior sample first; an optimum on
    either bracket edge raises BoundaryMaximum. A flat objective returns the
    geometric midpoint with ``flat`` set.
    """
    lo, hi = bracket
    if not (0 < lo and hi >= 10 * lo):
        raise InvalidModel(f"bandwidth bracket {bracket} must be positive and span a factor of 10")
    x = np.linspace(math.log(lo), math.log(hi), coarse)
    p = np.array([purity_of(math.exp(t)) for t in x])
    if np.ptp(p) <= 1e-12 * max(abs(p.max()), 1.0):
        mid = math.sqrt(lo * hi)
        return BandwidthOptimum(mid, float(purity_of(mid)), flat=True)
    k = int(np.argmax(p))
    if k in (0, coarse - 1):
        raise BoundaryMaximum(
            f"purity is largest at the bracket edge {math.exp(x[k]):.6g} rad/fs; widen the bracket"
        )
    a, b = x[k - 1], x[k + 1]
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = purity_of(math.exp(c)), purity_of(math.exp(d))
    tol = math.log1p(rtol)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = purity_of(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = purity_of(math.exp(d))
    t = 0.5 * (a + b)
    return BandwidthOptimum(math.exp(t), float(purity_of(math.exp(t))))


def purity_objective(pump: PumpSpec, channels: ChannelSet, envelope: ModalEnvelope, grid: GridSpec,
                     method: str = "analytic") -> Callable[[float], float]:
    def purity_of(bandwidth):
        jsa = build_jsa(pump.with_bandwidth(bandwidth), channels, envelope, grid, method)
        return schmidt_decompose(jsa).purity

    return purity_of


def default_bandwidth_bracket(channels: ChannelSet, length: float, span=(0.6, 12.0)) -> tuple[float, float]:
    """Bracket in rad/fs where the pump width times the walk-off length ``L |b1_m - b1_s|`` spans ``span``."""
    a = abs(float(channels.main.beta1() - channels.signal.beta1()))
    if a == 0:
        raise InvalidModel("main and signal group velocities are equal; no natural bandwidth scale")
    return span[0] / (length * a), span[1] / (length * a)


# --- end-to-end recipe ---------------------------------------------------------


@dataclass(frozen=True)
class RecipeInputs:
    """Everything the recipe needs, already resolved to model objects."""

    channels: ChannelSet
    coupler: CouplerSpec  # wavelength = aux pump, gap = gap used for the width sweep
    width_range: tuple[float, float]
    sweep_steps: int
    target_Lc: float
    gap_bracket: tuple[float, float]
    n_guides: int
    excitation: tuple[complex, ...]
    guide: int
    pump: PumpSpec  # main_bandwidth used only if bandwidth is fixed
    main_window: tuple[float, float]
    grid: GridSpec = GridSpec()
    length: float | None = None  # None: first envelope zero after its peak
    bandwidth: float | None = None  # None: optimize on the apodized case
    bandwidth_bracket: tuple[float, float] | None = None
    method: str = "analytic"


@dataclass
class DesignReport:
    gvm_residual: float | None = None  # fs/um
    phasematch_point: tuple[float, float, float, float] | None = None  # (l_s, l_i, l_m, l_a) um
    aux_width: float | None = None  # um
    min_splitting: float | None = None  # rad/um
    gap: float | None = None  # um
    achieved_Lc: float | None = None  # um
    coupling: float | None = None  # rad/um
    device_length: float | None = None  # um
    optimal_bandwidth: float | None = None  # rad/fs
    baseline_purity: float | None = None
    apodized_purity: float | None = None
    baseline_sidelobe: float | None = None
    apodized_sidelobe: float | None = None
    errors: list[dict] = field(default_factory=list)

    STEPS = ("gvm", "phasematch", "anti_crossing", "gap_solve", "array", "bandwidth", "purity")

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["phasematch_point"] is not None:
            d["phasematch_point"] = list(d["phasematch_point"])
        return d


def run_recipe(inputs: RecipeInputs) -> DesignReport:
    """Run the design steps in order; the first failing step is recorded and stops the run."""
    rep = DesignReport()
    state = {}

    def gvm():
        rep.gvm_residual = gvm_residual(inputs.channels)

    def phasematch():
        pt = find_phasematch_point(
            inputs.channels, inputs.pump.aux_wavelength, inputs.main_window, inputs.pump.main_center_wavelength
        )
        rep.phasematch_point = pt.as_tuple()

    def anti_crossing():
        pts = anti_crossing_sweep(inputs.coupler, inputs.width_range, inputs.sweep_steps)
        best = refine_anti_crossing(inputs.coupler, pts)
        rep.aux_width, rep.min_splitting = best.width_aux, best.splitting

    def gap_solve():
        spec = replace(inputs.coupler, width_aux=rep.aux_width)
        sol = gap_for_coupling_length(spec, inputs.target_Lc, inputs.gap_bracket)
        rep.gap, rep.achieved_Lc, rep.coupling = sol.gap, sol.coupling_length, sol.coupling

    def array():
        c = math.pi / rep.achieved_Lc
        probe = 4 * rep.achieved_Lc if inputs.length is None else inputs.length
        spec = ArraySpec(inputs.n_guides, c, probe, inputs.excitation)
        if inputs.length is None:
            env = envelope_of_guide(propagate(spec), inputs.guide)
            length = first_zero_after_peak(env, probe)
            spec = ArraySpec(inputs.n_guides, c, length, inputs.excitation)
        rep.device_length = spec.length
        state["apodized"] = envelope_of_guide(propagate(spec), inputs.guide)
        state["constant"] = ModalEnvelope.constant(1.0, spec.length)

    def bandwidth():
        if inputs.bandwidth is not None:
            rep.optimal_bandwidth = inputs.bandwidth
            return
        bracket = inputs.bandwidth_bracket or default_bandwidth_bracket(inputs.channels, rep.device_length)
        obj = purity_objective(inputs.pump, inputs.channels, state["apodized"], inputs.grid, inputs.method)
        rep.optimal_bandwidth = optimize_pump_bandwidth(obj, bracket).bandwidth

    def purity():
        pump = inputs.pump.with_bandwidth(rep.optimal_bandwidth)
        for name in ("constant", "apodized"):
            jsa = build_jsa(pump, inputs.channels, state[name], inputs.grid, inputs.method)
            p = schmidt_decompose(jsa).purity
            s = jsi_sidelobe_ratio(jsa)
            if name == "constant":
                rep.baseline_purity, rep.baseline_sidelobe = p, s
            else:
                rep.apodized_purity, rep.apodized_sidelobe = p, s

    for k, (name, step) in enumerate(zip(DesignReport.STEPS, (gvm, phasematch, anti_crossing, gap_solve, array,
                                                             bandwidth, purity))):
        try:
            step()
        except SfwmError as exc:
            rep.errors.append({"step": k + 1, "name": name, "error": type(exc).__name__, "message": str(exc)})
            break
    return rep


def sweep_excitation(n_guides, coupling, guide, search_length, pump, channels, grid=GridSpec(),
                     bandwidths=None) -> list[dict]:
    """Purity of each single-guide excitation, with the device cut at the envelope's first zero.

    Used to choose which guide to excite when only the monitored guide is fixed.
    """
    rows = []
    for n0 in range(n_guides):
        spec = ArraySpec.single(n_guides, coupling, search_length, n0)
        env = envelope_of_guide(propagate(spec), guide)
        try:
            length = first_zero_after_peak(env, search_length)
        except SfwmError:
            continue
        env = envelope_of_guide(propagate(replace(spec, length=length)), guide)
        bws = bandwidths or [default_bandwidth_bracket(channels, length, (3.9, 39))[0]]
        scores = []
        for b in bws:
            try:
                scores.append((schmidt_decompose(build_jsa(pump.with_bandwidth(b), channels, env, grid)).purity, b))
            except OutOfWindow:
                # short devices widen the mismatch span past the dispersion window
                continue
        if not scores:
            continue
        best = max(scores)
        rows.append({"excitation": n0, "length": length, "purity": best[0], "bandwidth": best[1]})
    return rows
