"""Two-guide unit cell: supermodes, anti-crossing sweep, and gap design.

Both guides share the same vertical stack, so the effective-index method reduces
the cell to one horizontal five-layer slab (lateral | main | gap | aux | lateral).
Composite modes are matched to isolated-guide modes by rank, which stays valid
while the coupling is weak compared with the spacing of unrelated modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import AmbiguousSupermodes, BracketError, InvalidModel, ModeCutoff, SfwmError
from .materials import MaterialModel, refractive_index
from .slab import Layer, SlabStack, film_index, find_guided_modes


@dataclass(frozen=True)
class CouplerSpec:
    width_main: float
    width_aux: float
    gap: float
    height: float
    core: MaterialModel
    substrate: MaterialModel
    top: MaterialModel
    wavelength: float
    main_order: int = 0
    aux_order: int = 1
    vertical_order: int = 0
    polarization: str = "TE"
    lateral: MaterialModel | None = None

    def __post_init__(self):
        for name in ("width_main", "width_aux", "gap", "height", "wavelength"):
            if not getattr(self, name) > 0:
                raise InvalidModel(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class CouplerResult:
    beta_even: float  # rad/um
    beta_odd: float
    coupling_C: float  # (beta_even - beta_odd) / 2
    detuning: float  # beta of isolated main minus isolated aux target mode
    n_even: float
    n_odd: float


def _horizontal_stacks(spec: CouplerSpec):
    n_film = film_index(
        spec.height, spec.core, spec.substrate, spec.top, spec.wavelength, spec.vertical_order, spec.polarization
    )
    film = MaterialModel.constant(n_film, (1e-3, 1e3))
    lateral = spec.lateral or spec.substrate
    pol = "TM" if spec.polarization == "TE" else "TE"
    inf = math.inf

    def stack(*layers):
        return SlabStack(tuple(Layer(t, m) for t, m in layers), pol)

    main = stack((inf, lateral), (spec.width_main, film), (inf, lateral))
    aux = stack((inf, lateral), (spec.width_aux, film), (inf, lateral))
    composite = stack(
        (inf, lateral), (spec.width_main, film), (spec.gap, lateral), (spec.width_aux, film), (inf, lateral)
    )
    return main, aux, composite


def _pair_ranks(spec: CouplerSpec, main_modes, aux_modes):
    if spec.main_order >= len(main_modes):
        raise ModeCutoff(f"main guide lacks order {spec.main_order} at width {spec.width_main} um")
    if spec.aux_order >= len(aux_modes):
        raise ModeCutoff(f"aux guide lacks order {spec.aux_order} at width {spec.width_aux} um")
    isolated = [(m.effective_index, 0, k) for k, m in enumerate(main_modes)]
    isolated += [(m.effective_index, 1, k) for k, m in enumerate(aux_modes)]
    isolated.sort(key=lambda t: (-t[0], t[1], t[2]))
    i = isolated.index((main_modes[spec.main_order].effective_index, 0, spec.main_order))
    j = isolated.index((aux_modes[spec.aux_order].effective_index, 1, spec.aux_order))
    if abs(i - j) != 1:
        raise AmbiguousSupermodes(
            f"{abs(i - j) - 1} other isolated mode(s) lie between the target pair; "
            "more than two composite candidates in the bracket"
        )
    return min(i, j), max(i, j)


def _supermodes(spec: CouplerSpec):
    main, aux, composite = _horizontal_stacks(spec)
    lam = spec.wavelength
    main_modes = find_guided_modes(main, lam)
    aux_modes = find_guided_modes(aux, lam)
    hi, lo = _pair_ranks(spec, main_modes, aux_modes)
    comp = find_guided_modes(composite, lam)
    if len(comp) <= lo:
        raise AmbiguousSupermodes(
            f"composite stack has {len(comp)} modes, cannot match isolated rank {lo}"
        )
    k0 = 2 * math.pi / lam
    n_even, n_odd = comp[hi].effective_index, comp[lo].effective_index
    b_even, b_odd = k0 * n_even, k0 * n_odd
    detuning = main_modes[spec.main_order].beta - aux_modes[spec.aux_order].beta
    others = [m.effective_index for k, m in enumerate(comp) if k not in (hi, lo)]
    return CouplerResult(b_even, b_odd, 0.5 * (b_even - b_odd), detuning, n_even, n_odd), others


def supermodes(spec: CouplerSpec) -> CouplerResult:
    """Supermode pair of the unit cell and ``C = (beta_even - beta_odd) / 2``."""
    return _supermodes(spec)[0]


@dataclass(frozen=True)
class SweepPoint:
    width_aux: float
    n_even: float
    n_odd: float
    beta_even: float
    beta_odd: float
    splitting: float  # beta_even - beta_odd, rad/um
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _failed(width, message):
    nan = float("nan")
    return SweepPoint(width, nan, nan, nan, nan, nan, message)


def anti_crossing_sweep(spec: CouplerSpec, width_range: tuple[float, float], steps: int) -> list[SweepPoint]:
    """Supermodes across a sweep of the auxiliary width, ordered by width.

    Failed points are marked rather than aborting. Neighbouring points are also
    checked for continuity: the previous pair must stay nearer the new pair than
    any other composite mode; a jump is reported as a failed point.
    """
    if steps < 2:
        raise InvalidModel("a sweep needs at least 2 steps")
    widths = np.linspace(width_range[0], width_range[1], steps)
    points, others = [], []
    for w in widths:
        try:
            r, rest = _supermodes(replace(spec, width_aux=float(w)))
        except SfwmError as exc:
            points.append(_failed(float(w), f"{type(exc).__name__}: {exc}"))
            others.append(None)
            continue
        points.append(SweepPoint(float(w), r.n_even, r.n_odd, r.beta_even, r.beta_odd, 2 * r.coupling_C))
        others.append(rest)
    # compare against the raw neighbour so a single jump does not condemn the rest
    prev = None
    for k, p in enumerate(list(points)):
        if not p.ok:
            prev = None
            continue
        if prev is not None and others[k]:
            # each previous branch value must land nearest to one of the new pair,
            # not to an unrelated composite mode
            rest = np.asarray(others[k])
            for old in (prev.n_even, prev.n_odd):
                if np.min(np.abs(rest - old)) < min(abs(p.n_even - old), abs(p.n_odd - old)):
                    points[k] = _failed(p.width_aux, "supermode pair lost track of its branches")
                    break
        prev = p
    return points


def anti_crossing_width(points: list[SweepPoint]) -> SweepPoint:
    """Sweep point of minimum splitting."""
    good = [p for p in points if p.ok]
    if not good:
        raise AmbiguousSupermodes("no sweep point produced a supermode pair")
    return min(good, key=lambda p: p.splitting)


def refine_anti_crossing(spec: CouplerSpec, points: list[SweepPoint], tol: float = 1e-5) -> SweepPoint:
    """Golden-section refinement of the splitting minimum between the sweep neighbours."""
    best = anti_crossing_width(points)
    widths = [p.width_aux for p in points]
    k = widths.index(best.width_aux)
    a = widths[max(k - 1, 0)]
    b = widths[min(k + 1, len(widths) - 1)]

    def split(w):
        return 2 * supermodes(replace(spec, width_aux=w)).coupling_C

    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = split(c), split(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = split(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = split(d)
    w = 0.5 * (a + b)
    r = supermodes(replace(spec, width_aux=w))
    return SweepPoint(w, r.n_even, r.n_odd, r.beta_even, r.beta_odd, 2 * r.coupling_C)


@dataclass(frozen=True)
class GapSolution:
    gap: float  # um
    coupling: float  # rad/um
    coupling_length: float  # pi / C, um


def coupling_at_gap(spec: CouplerSpec, gap: float) -> float:
    return supermodes(replace(spec, gap=float(gap))).coupling_C


def gap_for_coupling_length(
    spec: CouplerSpec,
    target_Lc: float,
    gap_bracket: tuple[float, float] = (0.1, 1.5),
    tol: float = 1e-4,
) -> GapSolution:
    """Gap at which ``pi / C(gap)`` equals ``target_Lc``, by bisection."""
    if not target_Lc > 0:
        raise InvalidModel(f"target coupling length must be > 0, got {target_Lc}")
    lo, hi = gap_bracket
    if not 0 < lo < hi:
        raise InvalidModel(f"bad gap bracket {gap_bracket}")
    samples = np.linspace(lo, hi, 8)
    cs = np.array([coupling_at_gap(spec, g) for g in samples])
    if not np.all(np.diff(cs) < 0):
        raise BracketError("C(gap) is not monotone over the bracket")
    lc_lo, lc_hi = math.pi / cs[0], math.pi / cs[-1]
    if not lc_lo <= target_Lc <= lc_hi:
        # with residual detuning the half-splitting floors at |detuning| / 2
        floor = 0.5 * abs(supermodes(spec).detuning)
        raise BracketError(
            f"target L_c = {target_Lc} um outside [{lc_lo:.6g}, {lc_hi:.6g}] um reachable over gaps {gap_bracket}"
            + (f"; C cannot fall below |detuning|/2 = {floor:.3g} rad/um" if floor > 0 else "")
        )
    a, b = lo, hi
    while b - a > tol:
        m = 0.5 * (a + b)
        if math.pi / coupling_at_gap(spec, m) < target_Lc:
            a = m
        else:
            b = m
    gap = 0.5 * (a + b)
    c = coupling_at_gap(spec, gap)
    return GapSolution(gap, c, math.pi / c)


def phase_matched_width(spec: CouplerSpec, width_bracket: tuple[float, float]) -> float:
    """Aux width at which the isolated target modes are degenerate (zero detuning).

    The result does not depend on the gap, so coupling at this width decays to
    zero with separation instead of flooring at half the residual detuning.
    """

    def detuning(w):
        return supermodes(replace(spec, width_aux=w, gap=max(spec.gap, 1.0))).detuning

    a, b = width_bracket
    try:
        fa, fb = detuning(a), detuning(b)
    except SfwmError as exc:
        raise BracketError(f"width bracket {width_bracket} not usable: {exc}") from exc
    if fa * fb > 0:
        raise BracketError(f"detuning does not change sign over widths {width_bracket}")
    return float(brentq(detuning, a, b, xtol=1e-10))
