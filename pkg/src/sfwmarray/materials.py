"""Wavelength-dependent refractive index models.

All wavelengths are vacuum wavelengths in micrometres. Angular frequencies
elsewhere in the package are in rad/fs; the helpers at the bottom convert.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidModel, OutOfRange

C_UM_PER_FS = 0.299792458

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class MaterialModel:
    """A constant or Sellmeier refractive index with a validity window.

    ``sellmeier_terms`` holds ``(B_j, lambda_j**2)`` pairs, lambda_j in um.
    """

    kind: str
    valid_range: tuple[float, float]
    constant_index: float | None = None
    sellmeier_terms: tuple[tuple[float, float], ...] = field(default_factory=tuple)
    name: str = ""

    def __post_init__(self):
        lo, hi = self.valid_range
        if not (0 < lo < hi):
            raise InvalidModel(f"{self.name or 'material'}: bad valid_range {self.valid_range}")
        if self.kind == "constant":
            if self.constant_index is None or not self.constant_index > 0:
                raise InvalidModel(f"{self.name or 'material'}: constant_index must be > 0")
        elif self.kind == "sellmeier":
            if not self.sellmeier_terms:
                raise InvalidModel(f"{self.name or 'material'}: sellmeier model needs terms")
            object.__setattr__(
                self, "sellmeier_terms", tuple((float(b), float(l2)) for b, l2 in self.sellmeier_terms)
            )
        else:
            raise InvalidModel(f"unknown material kind {self.kind!r}")

    @classmethod
    def constant(cls, index: float, valid_range=(0.1, 100.0), name: str = "") -> "MaterialModel":
        return cls("constant", tuple(valid_range), constant_index=float(index), name=name)

    @classmethod
    def sellmeier(cls, terms: Sequence[Sequence[float]], valid_range, name: str = "") -> "MaterialModel":
        return cls("sellmeier", tuple(valid_range), sellmeier_terms=tuple(tuple(t) for t in terms), name=name)


def _check_range(material: MaterialModel, wavelength, margin: float = 0.0) -> np.ndarray:
    lam = np.asarray(wavelength, dtype=float)
    lo, hi = material.valid_range
    if np.any(lam <= 0) or np.any(lam - margin < lo) or np.any(lam + margin > hi):
        raise OutOfRange(
            f"{material.name or 'material'}: wavelength {wavelength} um outside "
            f"[{lo}, {hi}] (stencil margin {margin})"
        )
    return lam


def _n_squared(material: MaterialModel, lam: np.ndarray) -> np.ndarray:
    lam2 = lam * lam
    n2 = np.ones_like(lam2)
    for b, l2 in material.sellmeier_terms:
        denom = lam2 - l2
        if np.any(np.abs(denom) <= 1e-12 * max(l2, 1.0)):
            raise InvalidModel(f"{material.name or 'material'}: Sellmeier pole at lambda^2 = {l2}")
        n2 = n2 + b * lam2 / denom
    return n2


def refractive_index(material: MaterialModel, wavelength):
    """Phase index n(lambda). Accepts scalars or arrays."""
    lam = _check_range(material, wavelength)
    if material.kind == "constant":
        out = np.full_like(lam, material.constant_index)
    else:
        n2 = _n_squared(material, lam)
        if np.any(n2 <= 0):
            raise InvalidModel(f"{material.name or 'material'}: n^2 <= 0 at {wavelength} um")
        out = np.sqrt(n2)
    return float(out) if out.ndim == 0 else out


def dn_dlambda(material: MaterialModel, wavelength):
    """Analytic dn/dlambda in 1/um."""
    lam = _check_range(material, wavelength)
    if material.kind == "constant":
        out = np.zeros_like(lam)
    else:
        dn2 = np.zeros_like(lam)
        for b, l2 in material.sellmeier_terms:
            dn2 = dn2 - 2.0 * b * lam * l2 / (lam * lam - l2) ** 2
        out = dn2 / (2.0 * np.sqrt(_n_squared(material, lam)))
    return float(out) if out.ndim == 0 else out


def group_index(material: MaterialModel, wavelength, step: float = DEFAULT_FD_STEP):
    """n_g = n - lambda dn/dlambda using a central difference of width ``2*step``."""
    lam = _check_range(material, wavelength, margin=step)
    if material.kind == "constant":
        out = np.full_like(lam, material.constant_index)
        return float(out) if out.ndim == 0 else out
    n = refractive_index(material, lam)
    dn = (refractive_index(material, lam + step) - refractive_index(material, lam - step)) / (2 * step)
    return n - lam * dn


def material_from_mapping(name: str, spec: Mapping) -> MaterialModel:
    kind = spec.get("kind")
    valid_range = tuple(spec.get("valid_range", ()))
    if len(valid_range) != 2:
        raise InvalidModel(f"{name}: valid_range must be [min, max]")
    if kind == "constant":
        return MaterialModel.constant(spec.get("index", 0.0), valid_range, name=name)
    if kind == "sellmeier":
        return MaterialModel.sellmeier(spec.get("terms", ()), valid_range, name=name)
    raise InvalidModel(f"{name}: unknown kind {kind!r}")


def wavelength_to_omega(wavelength):
    """Vacuum wavelength (um) to angular frequency (rad/fs)."""
    out = 2 * np.pi * C_UM_PER_FS / np.asarray(wavelength, dtype=float)
    return float(out) if out.ndim == 0 else out


def omega_to_wavelength(omega):
    out = 2 * np.pi * C_UM_PER_FS / np.asarray(omega, dtype=float)
    return float(out) if out.ndim == 0 else out
