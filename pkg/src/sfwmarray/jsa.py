"""Joint spectral amplitude of dual-pump spontaneous four-wave mixing.

The main pump is pulsed and the auxiliary pump is cw, so energy conservation
fixes the main-pump frequency at every grid point, ``w_m = w_s + w_i - w_a``.
The amplitude is

    f(w_s, w_i) = alpha(w_s + w_i - w_a) * Phi(dbeta(w_s, w_i)),

with ``dbeta = beta_m + beta_a - beta_s - beta_i`` and ``Phi`` the Fourier
integral of the local nonlinearity, which follows the auxiliary-pump amplitude
in the chosen guide.

Phase convention: ``Phi(dbeta) = int_0^L A(z) exp(i dbeta z) dz``. For a constant
amplitude ``g0`` this is ``g0 L exp(i dbeta L / 2) sinc(dbeta L / 2)``; the extra
phase factor splits into a signal part times an idler part, so it leaves every
Schmidt quantity unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .array import ModalEnvelope
from .errors import DegenerateGrid, InvalidModel, OutOfWindow
from .materials import C_UM_PER_FS, omega_to_wavelength, wavelength_to_omega

ROLES = ("main", "aux", "signal", "idler")
PUMP_SHAPES = ("gaussian", "sech2")


@dataclass
class DispersionChannel:
    """Propagation constant ``beta(w)`` (rad/um) of one field over a frequency window.

    Either ``taylor`` coefficients ``(beta0, beta1, beta2, ...)`` about ``carrier``
    (units rad/um, fs/um, fs^2/um, ...) or a sample table is given.
    """

    role: str
    carrier: float  # rad/fs
    window: tuple[float, float]  # rad/fs
    taylor: tuple[float, ...] | None = None
    samples: tuple[np.ndarray, np.ndarray] | None = None
    _spline: CubicSpline | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidModel(f"unknown channel role {self.role!r}")
        lo, hi = self.window
        if not lo < self.carrier < hi:
            raise InvalidModel(f"{self.role}: carrier {self.carrier} outside window {self.window}")
        if (self.taylor is None) == (self.samples is None):
            raise InvalidModel(f"{self.role}: give exactly one of taylor or samples")
        if self.samples is not None:
            w, b = (np.asarray(a, dtype=float) for a in self.samples)
            if np.any(np.diff(w) <= 0):
                raise InvalidModel(f"{self.role}: sample frequencies must increase")
            if w[0] > lo or w[-1] < hi:
                raise InvalidModel(f"{self.role}: samples do not cover the window")
            self.samples = (w, b)
            self._spline = CubicSpline(w, b)
        else:
            self.taylor = tuple(float(t) for t in self.taylor)

    @classmethod
    def from_indices(cls, role, wavelength, n_eff, n_group, gvd=0.0, window_fraction=0.15):
        """Quadratic model from phase index, group index and GVD (fs^2/um) at ``wavelength``."""
        w0 = wavelength_to_omega(wavelength)
        taylor = (n_eff * w0 / C_UM_PER_FS, n_group / C_UM_PER_FS, gvd)
        return cls(role, w0, (w0 * (1 - window_fraction), w0 * (1 + window_fraction)), taylor=taylor)

    @classmethod
    def from_beta_function(cls, role, beta_of_wavelength, wavelength, window_fraction=0.1, n_samples=41):
        """Tabulate ``beta(lambda)`` (e.g. a mode solver) over the window and spline it."""
        w0 = wavelength_to_omega(wavelength)
        lo, hi = w0 * (1 - window_fraction), w0 * (1 + window_fraction)
        w = np.linspace(lo, hi, n_samples)
        b = np.array([beta_of_wavelength(omega_to_wavelength(x)) for x in w])
        return cls(role, w0, (lo, hi), samples=(w, b))

    def _check(self, omega):
        w = np.asarray(omega, dtype=float)
        lo, hi = self.window
        if np.any(w < lo) or np.any(w > hi):
            raise OutOfWindow(f"{self.role}: frequency outside window [{lo:.6g}, {hi:.6g}] rad/fs")
        return w

    def beta(self, omega):
        w = self._check(omega)
        if self._spline is not None:
            return self._spline(w)
        d = w - self.carrier
        out = np.zeros_like(d)
        for k, c in enumerate(self.taylor):
            out = out + c * d**k / math.factorial(k)
        return out

    def beta1(self, omega=None):
        """Inverse group velocity dbeta/dw in fs/um."""
        w = self._check(self.carrier if omega is None else omega)
        if self._spline is not None:
            return self._spline(w, 1)
        d = w - self.carrier
        out = np.zeros_like(d)
        for k, c in enumerate(self.taylor[1:], start=1):
            out = out + c * d ** (k - 1) / math.factorial(k - 1)
        return out

    def group_velocity(self, omega=None):
        return 1.0 / self.beta1(omega)


@dataclass
class ChannelSet:
    main: DispersionChannel
    aux: DispersionChannel
    signal: DispersionChannel
    idler: DispersionChannel

    def __iter__(self):
        return iter((self.main, self.aux, self.signal, self.idler))


@dataclass(frozen=True)
class PumpSpec:
    main_center_wavelength: float  # um
    main_bandwidth: float  # rad/fs, standard deviation of the Gaussian spectral amplitude
    aux_wavelength: float  # um
    shape: str = "gaussian"

    def __post_init__(self):
        if not (self.main_center_wavelength > 0 and self.main_bandwidth > 0 and self.aux_wavelength > 0):
            raise InvalidModel("pump wavelengths and bandwidth must be positive")
        if self.main_bandwidth / self.main_omega >= 0.2:
            raise InvalidModel("main pump bandwidth must be < 0.2 of its carrier frequency")
        if self.shape not in PUMP_SHAPES:
            raise InvalidModel(f"pump shape must be one of {PUMP_SHAPES}")

    @property
    def main_omega(self) -> float:
        return wavelength_to_omega(self.main_center_wavelength)

    @property
    def aux_omega(self) -> float:
        return wavelength_to_omega(self.aux_wavelength)

    def with_bandwidth(self, bandwidth: float) -> "PumpSpec":
        return PumpSpec(self.main_center_wavelength, bandwidth, self.aux_wavelength, self.shape)


def pump_amplitude(pump: PumpSpec, omega_m):
    """Main-pump spectral amplitude, peak 1.

    Both shapes share the same intensity RMS width ``sigma / sqrt(2)``.
    """
    d = np.asarray(omega_m, dtype=float) - pump.main_omega
    if pump.shape == "gaussian":
        return np.exp(-(d**2) / (2 * pump.main_bandwidth**2))
    width = math.sqrt(6) * pump.main_bandwidth / math.pi
    return 1.0 / np.cosh(d / width)


def phase_mismatch(channels: ChannelSet, omega_s, omega_i, aux_omega: float):
    """``beta_m(w_s + w_i - w_a) + beta_a(w_a) - beta_s(w_s) - beta_i(w_i)`` in rad/um."""
    omega_s = np.asarray(omega_s, dtype=float)
    omega_i = np.asarray(omega_i, dtype=float)
    omega_m = omega_s + omega_i - aux_omega
    return (
        channels.main.beta(omega_m)
        + channels.aux.beta(aux_omega)
        - channels.signal.beta(omega_s)
        - channels.idler.beta(omega_i)
    )


def phasematching_amplitude(envelope: ModalEnvelope, dbeta, method: str = "analytic", chunk: int = 4096):
    """``int_0^L A(z) exp(i dbeta z) dz`` for scalar or array ``dbeta``.

    ``analytic`` sums the closed-form integral of each eigen-component;
    ``quadrature`` applies the composite trapezoid rule to the sampled envelope.
    """
    db = np.asarray(dbeta, dtype=float)
    flat = db.ravel()
    out = np.empty(flat.shape, dtype=complex)
    L = envelope.length
    if method == "analytic":
        for s in range(0, flat.size, chunk):
            x = envelope.rates[:, None] + flat[None, s : s + chunk]
            # (exp(i x L) - 1) / (i x) written without the removable singularity at x = 0
            terms = L * np.exp(0.5j * x * L) * np.sinc(x * L / (2 * np.pi))
            out[s : s + chunk] = envelope.weights @ terms
    elif method == "quadrature":
        z = envelope.z
        w = np.empty_like(z)
        dz = np.diff(z)
        w[0], w[-1] = dz[0] / 2, dz[-1] / 2
        w[1:-1] = (dz[:-1] + dz[1:]) / 2
        fz = envelope.samples * w
        for s in range(0, flat.size, chunk):
            out[s : s + chunk] = np.exp(1j * np.outer(flat[s : s + chunk], z)) @ fz
    else:
        raise InvalidModel(f"method must be 'analytic' or 'quadrature', got {method!r}")
    return out.reshape(db.shape) if db.ndim else complex(out[0])


@dataclass(frozen=True)
class GridSpec:
    """JSA sampling: points per axis and the window half-widths.

    ``pump_span`` is in units of the pump bandwidth along ``w_s + w_i``;
    ``mismatch_span`` is in units of ``pi / L`` of phase mismatch.
    """

    n_signal: int = 256
    n_idler: int = 256
    pump_span: float = 4.0
    mismatch_span: float = 4.0

    def __post_init__(self):
        if self.n_signal < 2 or self.n_idler < 2:
            raise InvalidModel("grid needs at least 2 points per axis")
        if not (self.pump_span > 0 and self.mismatch_span > 0):
            raise InvalidModel("grid spans must be positive")


@dataclass
class JsaGrid:
    signal_axis: np.ndarray  # rad/fs
    idler_axis: np.ndarray  # rad/fs
    amplitude: np.ndarray  # complex [n_signal, n_idler]
    normalized: bool = False

    def __post_init__(self):
        self.signal_axis = np.asarray(self.signal_axis, dtype=float)
        self.idler_axis = np.asarray(self.idler_axis, dtype=float)
        self.amplitude = np.asarray(self.amplitude, dtype=complex)
        if self.amplitude.shape != (self.signal_axis.size, self.idler_axis.size):
            raise InvalidModel("amplitude shape does not match the axes")
        for name, ax in (("signal", self.signal_axis), ("idler", self.idler_axis)):
            if ax.size > 1 and np.any(np.diff(ax) <= 0):
                raise InvalidModel(f"{name} axis must be strictly increasing")

    @property
    def steps(self) -> tuple[float, float]:
        ds = float(np.mean(np.diff(self.signal_axis))) if self.signal_axis.size > 1 else 0.0
        di = float(np.mean(np.diff(self.idler_axis))) if self.idler_axis.size > 1 else 0.0
        if ds <= 0 or di <= 0:
            raise DegenerateGrid("axis step is zero")
        return ds, di

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        ds, di = self.steps
        return float(np.sqrt(np.sum(self.intensity) * ds * di))

    def normalize(self) -> "JsaGrid":
        """Scale so that ``sum |f|^2 dws dwi = 1`` (Riemann sum on the grid)."""
        n = self.norm()
        if n == 0:
            raise InvalidModel("cannot normalize an all-zero JSA")
        return JsaGrid(self.signal_axis, self.idler_axis, self.amplitude / n, True)


def _grid_center(pump: PumpSpec, channels: ChannelSet):
    """Linearized phasematch point on the pump's frequency-matching line."""
    ws0, wi0 = channels.signal.carrier, channels.idler.carrier
    wa = pump.aux_omega
    b1m = float(channels.main.beta1(ws0 + wi0 - wa))
    a_s = b1m - float(channels.signal.beta1())
    a_i = b1m - float(channels.idler.beta1())
    det = a_i - a_s
    if abs(det) < 1e-300:
        raise DegenerateGrid("phasematching ridge is parallel to the frequency-matching line")
    total = pump.main_omega + wa - ws0 - wi0
    db0 = float(phase_mismatch(channels, ws0, wi0, wa))
    ds = (a_i * total + db0) / det
    return ws0 + ds, wi0 + total - ds, a_s, a_i


def jsa_axes(pump: PumpSpec, channels: ChannelSet, length: float, grid: GridSpec = GridSpec()):
    """Signal and idler axes covering the requested pump and mismatch windows."""
    ws_c, wi_c, a_s, a_i = _grid_center(pump, channels)
    U = grid.pump_span * pump.main_bandwidth
    V = grid.mismatch_span * math.pi / length
    det = a_i - a_s
    corners = [(u, v) for u in (-U, U) for v in (-V, V)]
    half_s = max(abs((a_i * u - v) / det) for u, v in corners)
    half_i = max(abs((v - a_s * u) / det) for u, v in corners)
    return (
        np.linspace(ws_c - half_s, ws_c + half_s, grid.n_signal),
        np.linspace(wi_c - half_i, wi_c + half_i, grid.n_idler),
    )


def build_jsa(
    pump: PumpSpec,
    channels: ChannelSet,
    envelope: ModalEnvelope,
    grid: GridSpec = GridSpec(),
    method: str = "analytic",
    axes=None,
) -> JsaGrid:
    """Normalized JSA on a grid centred on the phasematch point.

    ``axes`` overrides the automatic ``(signal_axis, idler_axis)`` choice.
    """
    ws, wi = jsa_axes(pump, channels, envelope.length, grid) if axes is None else axes
    WS, WI = np.meshgrid(ws, wi, indexing="ij")
    wa = pump.aux_omega
    lo, hi = channels.main.window
    wm = WS + WI - wa
    if np.any(wm < lo) or np.any(wm > hi):
        raise OutOfWindow("grid maps main-pump frequencies outside the main channel window")
    dbeta = phase_mismatch(channels, WS, WI, wa)
    f = pump_amplitude(pump, wm) * phasematching_amplitude(envelope, dbeta, method)
    return JsaGrid(ws, wi, f).normalize()


def jsi_sidelobe_ratio(jsa: JsaGrid, n_samples: int = 4001) -> float:
    """Peak sidelobe / main-lobe peak of the JSI along the phasematching direction.

    The cut runs along the frequency-matching line ``w_s + w_i = const`` through
    the JSI maximum, where only the phase mismatch varies. The main lobe ends at
    the first deep local minimum on each side.
    """
    inten = jsa.intensity
    i, j = np.unravel_index(np.argmax(inten), inten.shape)
    ws0, wi0 = jsa.signal_axis[i], jsa.idler_axis[j]
    interp = RegularGridInterpolator((jsa.signal_axis, jsa.idler_axis), inten, bounds_error=False, fill_value=None)
    t_hi = min(jsa.signal_axis[-1] - ws0, wi0 - jsa.idler_axis[0])
    t_lo = max(jsa.signal_axis[0] - ws0, wi0 - jsa.idler_axis[-1])
    t = np.linspace(t_lo, t_hi, n_samples)
    cut = interp(np.column_stack([ws0 + t, wi0 - t]))
    k = int(np.argmax(cut))
    peak = cut[k]
    # Interpolation ripple can create shallow minima on the lobe itself; only a
    # minimum below a quarter of the peak ends the main lobe.
    floor = 0.25 * peak
    r = k
    while r + 1 < cut.size and not (cut[r + 1] > cut[r] and cut[r] < floor):
        r += 1
    left = k
    while left - 1 >= 0 and not (cut[left - 1] > cut[left] and cut[left] < floor):
        left -= 1
    outside = np.concatenate([cut[:left], cut[r + 1 :]])
    return float(outside.max() / peak) if outside.size else 0.0
