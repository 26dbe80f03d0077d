"""Guided modes of planar multilayer stacks, and the effective-index method.

The dispersion function is built by shooting the transverse field through the
stack with 2x2 transfer matrices. Starting from the solution that decays into
the first cladding, the field ``psi`` and the flux ``p psi'`` (``p = 1`` for TE,
``1/n**2`` for TM) are propagated layer by layer; a guided mode is a zero of

    F(n_eff) = p psi'(end) + p_R gamma_R psi(end),

i.e. the shot field also decays into the last cladding.

Roots are found by a sign-change scan of ``F`` followed by bisection. Because the
transverse problem is of Sturm-Liouville type, the number of field nodes of the
shot solution equals the number of guided modes above the trial index. That
count is used to confirm the scan, and to resolve nearly degenerate pairs (weakly
coupled supermodes) whose sign changes fall inside one scan cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidModel, ModeCutoff, NumericalFailure
from .materials import MaterialModel, refractive_index

DEFAULT_SCAN_POINTS = 2000
DEFAULT_TOL = 1e-10
MAX_BISECTION_ITER = 200


@dataclass(frozen=True)
class Layer:
    thickness: float  # um; math.inf for the outer claddings
    material: MaterialModel


@dataclass(frozen=True)
class SlabStack:
    layers: tuple[Layer, ...]
    polarization: str = "TE"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 3:
            raise InvalidModel("a slab stack needs at least 3 layers")
        if not (math.isinf(self.layers[0].thickness) and math.isinf(self.layers[-1].thickness)):
            raise InvalidModel("first and last layers must be semi-infinite claddings")
        for layer in self.layers[1:-1]:
            if not (layer.thickness > 0 and math.isfinite(layer.thickness)):
                raise InvalidModel(f"interior thickness must be finite and > 0, got {layer.thickness}")
        if self.polarization not in ("TE", "TM"):
            raise InvalidModel(f"polarization must be TE or TM, got {self.polarization!r}")

    @classmethod
    def from_indices(cls, indices: Sequence[float], thicknesses: Sequence[float], polarization: str = "TE"):
        """Stack of constant-index layers; ``thicknesses`` lists the interior layers only."""
        if len(thicknesses) != len(indices) - 2:
            raise InvalidModel("need len(indices) - 2 interior thicknesses")
        d = [math.inf, *thicknesses, math.inf]
        layers = [Layer(t, MaterialModel.constant(n, (1e-3, 1e3))) for t, n in zip(d, indices)]
        return cls(tuple(layers), polarization)

    def indices(self, wavelength: float) -> np.ndarray:
        return np.array([refractive_index(layer.material, wavelength) for layer in self.layers])

    def thicknesses(self) -> np.ndarray:
        return np.array([layer.thickness for layer in self.layers[1:-1]], dtype=float)


@dataclass(frozen=True)
class GuidedMode:
    effective_index: float
    beta: float  # rad/um
    order: int
    polarization: str
    wavelength: float


def _sinc(x):
    # sin(x)/x
    return np.sinc(x / np.pi)


def _sinhc(x):
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(xs) / xs)


def _shoot(n, d, k0, neff, polarization, count_nodes=False):
    """Shoot the decaying solution through the stack for an array of trial indices.

    Returns ``(F, nodes)``; ``nodes`` is None unless requested.
    """
    neff = np.asarray(neff, dtype=float)
    te = polarization == "TE"
    p = np.ones_like(n) if te else 1.0 / n**2
    gamma0 = k0 * np.sqrt(np.maximum(neff**2 - n[0] ** 2, 0.0))
    psi = np.ones_like(neff)
    flux = p[0] * gamma0
    nodes = np.zeros(neff.shape, dtype=np.int64) if count_nodes else None
    for j in range(1, len(n) - 1):
        k2 = k0**2 * (n[j] ** 2 - neff**2)
        q = np.sqrt(np.abs(k2))
        x = q * d[j - 1]
        dpsi = flux / p[j]
        osc = k2 > 0
        c = np.where(osc, np.cos(x), np.cosh(np.where(osc, 0.0, x)))
        s_over_q = d[j - 1] * np.where(osc, _sinc(x), _sinhc(np.where(osc, 0.0, x)))
        qs = np.where(osc, -q * np.sin(x), q * np.sinh(np.where(osc, 0.0, x)))
        psi_new = psi * c + dpsi * s_over_q
        dpsi_new = psi * qs + dpsi * c
        if count_nodes:
            theta0 = np.arctan2(psi, np.where(osc, dpsi / np.where(osc, q, 1.0), 1.0))
            n_osc = np.floor((theta0 + x) / np.pi) - np.floor(theta0 / np.pi)
            n_evan = ((psi * psi_new < 0) | ((psi_new == 0) & (psi != 0))).astype(np.int64)
            nodes += np.where(osc, n_osc.astype(np.int64), n_evan)
        flux_new = p[j] * dpsi_new
        scale = np.hypot(psi_new, flux_new / (k0 * p[j]))
        scale = np.where(scale > 0, scale, 1.0)
        psi, flux = psi_new / scale, flux_new / scale
    gamma_r = k0 * np.sqrt(np.maximum(neff**2 - n[-1] ** 2, 0.0))
    F = flux + p[-1] * gamma_r * psi
    if count_nodes:
        # One more node in the last cladding iff the growing part has the opposite sign.
        asym = psi + np.where(gamma_r > 0, (flux / p[-1]) / np.where(gamma_r > 0, gamma_r, 1.0), 0.0)
        nodes += (psi * asym < 0).astype(np.int64)
    return F, nodes


def dispersion_function(stack: SlabStack, wavelength: float, neff):
    """Transfer-matrix dispersion function; guided modes are its zeros."""
    k0 = 2 * np.pi / wavelength
    F, _ = _shoot(stack.indices(wavelength), stack.thicknesses(), k0, neff, stack.polarization)
    return F


def mode_count_above(stack: SlabStack, wavelength: float, neff):
    """Number of guided modes with effective index strictly above ``neff``."""
    k0 = 2 * np.pi / wavelength
    _, nodes = _shoot(stack.indices(wavelength), stack.thicknesses(), k0, neff, stack.polarization, True)
    return nodes


def _bisect(fun, a, b, tol):
    fa = fun(a)
    for _ in range(MAX_BISECTION_ITER):
        m = 0.5 * (a + b)
        if b - a <= tol:
            return m
        fm = fun(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    raise NumericalFailure(f"bisection did not converge in {MAX_BISECTION_ITER} iterations")


def _kth_by_count(count, k, lo, hi, tol):
    """Locate the (k+1)-th highest eigenvalue: count drops from > k to <= k there."""
    a, b = lo, hi
    for _ in range(MAX_BISECTION_ITER):
        if b - a <= tol:
            return 0.5 * (a + b)
        m = 0.5 * (a + b)
        if count(m) > k:
            a = m
        else:
            b = m
    raise NumericalFailure(f"count bisection did not converge in {MAX_BISECTION_ITER} iterations")


def _root_indices(n, d, k0, polarization, lo, hi, scan_points, tol):
    def F(x):
        return float(_shoot(n, d, k0, np.array([x]), polarization)[0][0])

    def count(x):
        return int(_shoot(n, d, k0, np.array([x]), polarization, True)[1][0])

    # the count just above cutoff includes modes closer to it than the first scan point
    floor = lo + 1e-12 * (hi - lo)
    total = count(floor)
    if total == 0:
        return []
    grid = np.concatenate([[floor], np.linspace(lo, hi, scan_points + 2)[1:-1]])
    vals, nodes = _shoot(n, d, k0, grid, polarization, True)
    roots = []
    sign = np.sign(vals)
    for i in np.nonzero(sign[:-1] * sign[1:] <= 0)[0]:
        if vals[i] == 0:
            roots.append(float(grid[i]))
        elif vals[i + 1] != 0:
            roots.append(_bisect(F, float(grid[i]), float(grid[i + 1]), tol))
    if len(roots) == total:
        return sorted(roots, reverse=True)
    # Sign changes missed (near-degenerate pairs): fall back on the node count,
    # which resolves each mode individually.
    upper = float(grid[-1]) if int(nodes[-1]) == 0 else hi
    return [_kth_by_count(count, k, floor, upper, tol) for k in range(total)]


def find_guided_modes(
    stack: SlabStack,
    wavelength: float,
    scan_points: int = DEFAULT_SCAN_POINTS,
    tol: float = DEFAULT_TOL,
) -> list[GuidedMode]:
    """All guided modes, sorted by descending effective index (order 0 first)."""
    n = stack.indices(wavelength)
    clad = max(n[0], n[-1])
    core = float(np.max(n[1:-1]))
    if core <= clad:
        return []
    k0 = 2 * np.pi / wavelength
    roots = _root_indices(n, stack.thicknesses(), k0, stack.polarization, clad, core, scan_points, tol)
    return [
        GuidedMode(float(r), float(k0 * r), order, stack.polarization, float(wavelength))
        for order, r in enumerate(roots)
    ]


def mode_profile(stack: SlabStack, mode: GuidedMode, x):
    """Transverse field of ``mode`` sampled at ``x`` (um, origin at the first interface).

    Unnormalized; sign fixed so that the field is positive in the first cladding.
    """
    n = stack.indices(mode.wavelength)
    d = stack.thicknesses()
    k0 = 2 * np.pi / mode.wavelength
    te = stack.polarization == "TE"
    p = np.ones_like(n) if te else 1.0 / n**2
    N = mode.effective_index
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    edges = np.concatenate([[0.0], np.cumsum(d)])

    def gam(j):
        return k0 * math.sqrt(max(N * N - n[j] ** 2, 0.0))

    left = x < 0
    out[left] = np.exp(gam(0) * x[left])
    psi, flux = 1.0, p[0] * gam(0)
    for j in range(1, len(n) - 1):
        k2 = k0**2 * (n[j] ** 2 - N * N)
        q = math.sqrt(abs(k2))
        sel = (x >= edges[j - 1]) & (x < edges[j])
        t = x[sel] - edges[j - 1]
        dpsi = flux / p[j]
        if k2 > 0:
            out[sel] = psi * np.cos(q * t) + dpsi * t * _sinc(q * t)
            psi_end = psi * math.cos(q * d[j - 1]) + dpsi * d[j - 1] * float(_sinc(q * d[j - 1]))
            dpsi_end = -psi * q * math.sin(q * d[j - 1]) + dpsi * math.cos(q * d[j - 1])
        else:
            out[sel] = psi * np.cosh(q * t) + dpsi * t * _sinhc(q * t)
            psi_end = psi * math.cosh(q * d[j - 1]) + dpsi * d[j - 1] * float(_sinhc(q * d[j - 1]))
            dpsi_end = psi * q * math.sinh(q * d[j - 1]) + dpsi * math.cosh(q * d[j - 1])
        psi, flux = psi_end, p[j] * dpsi_end
    right = x >= edges[-1]
    out[right] = psi * np.exp(-gam(len(n) - 1) * (x[right] - edges[-1]))
    return out


def effective_index_waveguide(
    height: float,
    width: float,
    core: MaterialModel,
    substrate: MaterialModel,
    top: MaterialModel,
    wavelength: float,
    vertical_order: int = 0,
    horizontal_order: int = 0,
    polarization: str = "TE",
    lateral: MaterialModel | None = None,
    scan_points: int = DEFAULT_SCAN_POINTS,
) -> GuidedMode:
    """Mode of a rectangular strip guide by the effective-index method.

    The vertical stack (substrate | core | top) is solved in the requested
    polarization; its effective index then forms the core of the horizontal stack
    (lateral | film | lateral), solved in the exchanged polarization. ``lateral``
    defaults to the substrate material.
    """
    n_film = film_index(height, core, substrate, top, wavelength, vertical_order, polarization, scan_points)
    lateral = lateral or substrate
    h_pol = "TM" if polarization == "TE" else "TE"
    stack = SlabStack(
        (
            Layer(math.inf, lateral),
            Layer(width, MaterialModel.constant(n_film, (1e-3, 1e3))),
            Layer(math.inf, lateral),
        ),
        h_pol,
    )
    modes = find_guided_modes(stack, wavelength, scan_points)
    if horizontal_order >= len(modes):
        raise ModeCutoff(
            f"horizontal order {horizontal_order} not guided at width {width} um "
            f"(only {len(modes)} modes)"
        )
    m = modes[horizontal_order]
    return GuidedMode(m.effective_index, m.beta, horizontal_order, polarization, float(wavelength))


def film_index(height, core, substrate, top, wavelength, vertical_order=0, polarization="TE",
               scan_points=DEFAULT_SCAN_POINTS) -> float:
    """Effective index of the vertical (substrate | core | top) slab."""
    stack = SlabStack(
        (Layer(math.inf, substrate), Layer(height, core), Layer(math.inf, top)), polarization
    )
    modes = find_guided_modes(stack, wavelength, scan_points)
    if vertical_order >= len(modes):
        raise ModeCutoff(f"vertical order {vertical_order} not guided at height {height} um")
    return modes[vertical_order].effective_index
