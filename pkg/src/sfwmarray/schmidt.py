"""Schmidt decomposition of a sampled joint spectral amplitude."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGrid, InvalidModel
from .jsa import JsaGrid

TRUNCATION = 1e-12
MIN_GRID = 16


@dataclass(frozen=True)
class SchmidtResult:
    coefficients: np.ndarray  # q_k, descending, sum q_k^2 = 1
    purity: float
    schmidt_number: float
    signal_modes: np.ndarray  # [K, n_signal], orthonormal under sum |u|^2 dws
    idler_modes: np.ndarray  # [K, n_idler]


def schmidt_decompose(jsa: JsaGrid, n_modes: int = 8, truncation: float = TRUNCATION) -> SchmidtResult:
    """SVD of the grid amplitude weighted by the square root of the cell area.

    Coefficients below ``truncation`` times the leading one are dropped before the
    purity sum ``P = sum q_k^4``.
    """
    ns, ni = jsa.amplitude.shape
    if ns < MIN_GRID or ni < MIN_GRID:
        raise InvalidModel(f"grid must be at least {MIN_GRID}x{MIN_GRID}, got {ns}x{ni}")
    ds = np.diff(jsa.signal_axis)
    di = np.diff(jsa.idler_axis)
    if np.any(ds == 0) or np.any(di == 0):
        raise DegenerateGrid("axis step is zero")
    step_s, step_i = jsa.steps
    u, s, vh = np.linalg.svd(jsa.amplitude * np.sqrt(step_s * step_i), full_matrices=False)
    s = s[s > truncation * s[0]] if s[0] > 0 else s[:1]
    q = s / np.sqrt(np.sum(s**2))
    purity = float(np.sum(q**4))
    k = min(n_modes, q.size)
    return SchmidtResult(
        coefficients=q,
        purity=purity,
        schmidt_number=1.0 / purity,
        signal_modes=u[:, :k].T / np.sqrt(step_s),
        idler_modes=vh[:k, :] / np.sqrt(step_i),
    )


def heralded_marginals(jsa: JsaGrid):
    """Signal and idler spectra ``int |f|^2`` over the partner frequency.

    Each integrates to 1 on its own axis for a normalized JSA.
    """
    step_s, step_i = jsa.steps
    inten = jsa.intensity
    return inten.sum(axis=1) * step_i, inten.sum(axis=0) * step_s
