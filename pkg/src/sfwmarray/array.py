"""Discrete diffraction in a nearest-neighbour coupled waveguide array.

The amplitudes obey ``-i dA/dz = M A`` with ``M`` real symmetric tridiagonal
(zero diagonal, bond couplings off the diagonal), so ``A(z) = exp(+i M z) A(0)``.
The spectral solver diagonalizes ``M`` once; the RK4 integrator is kept as an
independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import minimize_scalar

from .errors import IndexOutOfRange, InvalidModel, NumericalFailure, StepTooLarge

DEFAULT_Z_SAMPLES = 2048


@dataclass(frozen=True)
class ArraySpec:
    n_guides: int
    coupling: float | tuple[float, ...]  # rad/um, uniform or one per bond
    length: float  # um
    excitation: tuple[complex, ...]

    def __post_init__(self):
        if int(self.n_guides) != self.n_guides or self.n_guides < 1:
            raise InvalidModel(f"n_guides must be a positive integer, got {self.n_guides}")
        if not self.length > 0:
            raise InvalidModel(f"length must be > 0, got {self.length}")
        exc = tuple(complex(a) for a in np.ravel(self.excitation))
        if len(exc) != self.n_guides:
            raise InvalidModel(f"excitation has {len(exc)} entries for {self.n_guides} guides")
        if not any(a != 0 for a in exc):
            raise InvalidModel("excitation is identically zero")
        object.__setattr__(self, "excitation", exc)
        if np.ndim(self.coupling) == 0:
            couplings = (float(self.coupling),)
        else:
            couplings = tuple(float(c) for c in self.coupling)
            if len(couplings) != self.n_guides - 1:
                raise InvalidModel(f"need {self.n_guides - 1} bond couplings, got {len(couplings)}")
            object.__setattr__(self, "coupling", couplings)
        if any(c < 0 for c in couplings):
            raise InvalidModel("couplings must be >= 0")

    @classmethod
    def single(cls, n_guides: int, coupling, length: float, guide: int) -> "ArraySpec":
        """Unit excitation of one guide."""
        if not 0 <= guide < n_guides:
            raise IndexOutOfRange(f"guide {guide} outside 0..{n_guides - 1}")
        exc = np.zeros(n_guides, dtype=complex)
        exc[guide] = 1.0
        return cls(n_guides, coupling, length, tuple(exc))

    @property
    def uniform(self) -> bool:
        return np.ndim(self.coupling) == 0

    def bonds(self) -> np.ndarray:
        if self.uniform:
            return np.full(self.n_guides - 1, float(self.coupling))
        return np.asarray(self.coupling, dtype=float)

    def max_coupling(self) -> float:
        b = self.bonds()
        return float(b.max()) if b.size else 0.0


def uniform_eigenpairs(n_guides: int, coupling: float):
    """Closed-form spectrum of the uniform chain, eigenvalues in descending order.

    ``lambda_k = 2 C cos(k pi / (N+1))`` and ``v_k[n] = sqrt(2/(N+1)) sin((n+1) k pi / (N+1))``
    for ``k = 1..N`` and guide index ``n = 0..N-1``.
    """
    k = np.arange(1, n_guides + 1)
    n = np.arange(n_guides)
    lam = 2 * coupling * np.cos(k * np.pi / (n_guides + 1))
    vecs = math.sqrt(2 / (n_guides + 1)) * np.sin(np.outer(n + 1, k) * np.pi / (n_guides + 1))
    return lam, vecs


def eigenpairs(spec: ArraySpec):
    """Numeric eigenpairs of the coupling matrix, eigenvalues descending.

    For uniform coupling the result is checked against the closed form.
    """
    if spec.n_guides == 1:
        return np.zeros(1), np.ones((1, 1))
    lam, vecs = eigh_tridiagonal(np.zeros(spec.n_guides), spec.bonds())
    lam, vecs = lam[::-1], vecs[:, ::-1]
    if spec.uniform:
        c = float(spec.coupling)
        lam_cf, vecs_cf = uniform_eigenpairs(spec.n_guides, c)
        if np.max(np.abs(lam - lam_cf)) > 1e-10 * max(c, 1e-300):
            raise NumericalFailure("numeric eigenvalues disagree with the closed form")
        overlap = np.abs(np.sum(vecs * vecs_cf, axis=0))
        if np.max(np.abs(overlap - 1)) > 1e-10:
            raise NumericalFailure("numeric eigenvectors disagree with the closed form")
    return lam, vecs


@dataclass
class ModalEnvelope:
    """Single-guide amplitude ``A(z) = sum_k w_k exp(i lambda_k z)`` on ``[0, length]``.

    ``z`` and ``samples`` hold the sampled profile used by quadrature; the modal
    form is used by the closed-form phasematching integral.
    """

    rates: np.ndarray  # lambda_k, rad/um
    weights: np.ndarray  # complex w_k
    length: float
    z: np.ndarray = field(default=None)
    samples: np.ndarray = field(default=None)

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        self.weights = np.asarray(self.weights, dtype=complex)
        if self.z is None:
            self.z = np.linspace(0.0, self.length, DEFAULT_Z_SAMPLES)
        self.z = np.asarray(self.z, dtype=float)
        if self.samples is None:
            self.samples = self(self.z)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(1j * np.multiply.outer(z, self.rates)) @ self.weights

    @classmethod
    def constant(cls, amplitude: complex, length: float, n_z: int = DEFAULT_Z_SAMPLES) -> "ModalEnvelope":
        """Step-like nonlinearity: ``A(z) = amplitude`` over the whole length."""
        return cls(np.zeros(1), np.array([amplitude]), length, np.linspace(0.0, length, n_z))


@dataclass
class AmplitudeEnvelope:
    z: np.ndarray
    amplitudes: np.ndarray  # [n_guides, n_z]
    total_power: np.ndarray
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None
    coefficients: np.ndarray | None = None  # excitation in the eigenbasis

    @property
    def n_guides(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def length(self) -> float:
        return float(self.z[-1])


def default_z_grid(length: float, n: int = DEFAULT_Z_SAMPLES) -> np.ndarray:
    return np.linspace(0.0, length, n)


def _check_grid(spec: ArraySpec, z_grid) -> np.ndarray:
    z = default_z_grid(spec.length) if z_grid is None else np.asarray(z_grid, dtype=float)
    if z.ndim != 1 or z.size < 1 or z[0] != 0 or np.any(np.diff(z) < 0):
        raise InvalidModel("z_grid must be sorted and start at 0")
    if not math.isclose(z[-1], spec.length, rel_tol=1e-12, abs_tol=0.0):
        raise InvalidModel(f"z_grid must end at length {spec.length}, ends at {z[-1]}")
    return z


def propagate(spec: ArraySpec, z_grid=None) -> AmplitudeEnvelope:
    """Spectral solution of the array: expand, evolve phases, resum."""
    z = _check_grid(spec, z_grid)
    lam, vecs = eigenpairs(spec)
    a0 = np.asarray(spec.excitation, dtype=complex)
    coef = vecs.T @ a0
    phases = np.exp(1j * np.outer(lam, z))
    amps = vecs @ (coef[:, None] * phases)
    amps[:, z == 0] = a0[:, None]
    power = np.sum(np.abs(amps) ** 2, axis=0)
    return AmplitudeEnvelope(z, amps, power, lam, vecs, coef)


def envelope_of_guide(envelope: AmplitudeEnvelope, guide_index: int) -> ModalEnvelope:
    """Complex amplitude of one guide, as a modal expansion plus its samples."""
    if not 0 <= guide_index < envelope.n_guides:
        raise IndexOutOfRange(f"guide {guide_index} outside 0..{envelope.n_guides - 1}")
    samples = envelope.amplitudes[guide_index].copy()
    if envelope.eigenvalues is None:
        raise InvalidModel("envelope carries no eigen-expansion (use the spectral solver)")
    weights = envelope.eigenvectors[guide_index] * envelope.coefficients
    return ModalEnvelope(envelope.eigenvalues, weights, envelope.length, envelope.z.copy(), samples)


def _apply_m(bonds: np.ndarray, a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[:-1] += bonds * a[1:]
    out[1:] += bonds * a[:-1]
    return out


def propagate_rk4_oracle(spec: ArraySpec, z_grid=None, step: float | None = None) -> AmplitudeEnvelope:
    """Classical fourth-order Runge-Kutta integration of ``dA/dz = i M A``.

    ``step`` defaults to ``0.002 / max coupling``; it must not exceed
    ``0.01 / max coupling``.
    """
    z = _check_grid(spec, z_grid)
    cmax = spec.max_coupling()
    limit = 0.01 / cmax if cmax > 0 else math.inf
    if step is None:
        step = 0.002 / cmax if cmax > 0 else spec.length
    if step > limit:
        raise StepTooLarge(f"step {step} um exceeds 0.01 / max coupling = {limit} um")
    bonds = spec.bonds()

    def rhs(a):
        return 1j * _apply_m(bonds, a)

    a = np.asarray(spec.excitation, dtype=complex).copy()
    amps = np.empty((spec.n_guides, z.size), dtype=complex)
    amps[:, 0] = a
    for j in range(1, z.size):
        dz = z[j] - z[j - 1]
        n_sub = max(1, math.ceil(dz / step - 1e-12))
        h = dz / n_sub
        for _ in range(n_sub):
            k1 = rhs(a)
            k2 = rhs(a + 0.5 * h * k1)
            k3 = rhs(a + 0.5 * h * k2)
            k4 = rhs(a + h * k3)
            a = a + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        amps[:, j] = a
    power = np.sum(np.abs(amps) ** 2, axis=0)
    return AmplitudeEnvelope(z, amps, power)


def first_zero_after_peak(envelope: ModalEnvelope, search_length: float, n: int = 20001) -> float:
    """Distance at which ``|A(z)|`` first returns to a minimum after its first maximum.

    Used to size a device so one guide's envelope forms a single smooth lobe.
    """
    z = np.linspace(0.0, search_length, n)
    mag = np.abs(envelope(z))
    peak = None
    for j in range(1, n - 1):
        if peak is None and mag[j] >= mag[j - 1] and mag[j] > mag[j + 1]:
            peak = j
        elif peak is not None and mag[j] <= mag[j - 1] and mag[j] < mag[j + 1]:
            res = minimize_scalar(
                lambda t: float(np.abs(envelope(t)) ** 2),
                bounds=(z[j - 1], z[j + 1]),
                method="bounded",
                options={"xatol": 1e-9},
            )
            return float(res.x)
    raise NumericalFailure(f"envelope has no lobe inside {search_length} um")
