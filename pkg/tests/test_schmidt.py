import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfwmarray.array import ModalEnvelope
from sfwmarray.errors import DegenerateGrid, InvalidModel
from sfwmarray.jsa import GridSpec, JsaGrid, PumpSpec, build_jsa
from sfwmarray.schmidt import heralded_marginals, schmidt_decompose

WS = np.linspace(-5, 5, 128)
WI = np.linspace(-4, 6, 96)


def gauss(x, x0, s):
    return np.exp(-((x - x0) ** 2) / (2 * s**2))


def hermite1(x, x0, s):
    return (x - x0) / s * gauss(x, x0, s)


def normalized(f):
    return JsaGrid(WS, WI, f).normalize()


def test_separable_is_pure():
    res = schmidt_decompose(normalized(np.outer(gauss(WS, 0.3, 0.8), gauss(WI, 1.0, 1.1))))
    assert res.purity >= 1 - 1e-10
    assert res.coefficients.size == 1


def test_two_equal_modes():
    g1, g2 = gauss(WS, 0, 0.7), hermite1(WS, 0, 0.7)
    h1, h2 = gauss(WI, 1, 0.9), hermite1(WI, 1, 0.9)
    # each factor normalized on its grid so the two terms carry equal weight
    g1, g2 = g1 / np.linalg.norm(g1), g2 / np.linalg.norm(g2)
    h1, h2 = h1 / np.linalg.norm(h1), h2 / np.linalg.norm(h2)
    res = schmidt_decompose(normalized((np.outer(g1, h1) + np.outer(g2, h2)) / math.sqrt(2)))
    assert res.purity == pytest.approx(0.5, abs=1e-10)
    assert res.coefficients[:2] == pytest.approx([1 / math.sqrt(2)] * 2, abs=1e-10)


def correlated(rho):
    X, Y = np.meshgrid(WS, WI - 1, indexing="ij")
    return np.exp(-(X**2 + Y**2 - 2 * rho * X * Y) / (2 * (1 - rho**2)))


@settings(max_examples=25, deadline=None)
@given(rho=st.floats(-0.9, 0.9), phase=st.floats(0, 2 * math.pi), scale=st.floats(0.1, 10))
def test_schmidt_invariants(rho, phase, scale):
    f = correlated(rho)
    a = schmidt_decompose(normalized(f))
    assert np.sum(a.coefficients**2) == pytest.approx(1.0, abs=1e-12)
    assert a.purity == float(np.sum(a.coefficients**4))
    assert a.schmidt_number * a.purity == pytest.approx(1.0, rel=1e-15)
    assert 0 < a.purity <= 1 + 1e-12
    assert np.all(np.diff(a.coefficients) <= 0)
    b = schmidt_decompose(normalized(f * scale * np.exp(1j * phase)))
    assert b.purity == pytest.approx(a.purity, abs=1e-12)
    t = schmidt_decompose(JsaGrid(WI, WS, f.T).normalize())
    assert t.purity == pytest.approx(a.purity, abs=1e-12)


def test_gaussian_purity_closed_form():
    # amplitude exp(-(x^2 + y^2 - 2 c x y)/2) (Mehler kernel): Schmidt weights
    # q_k^2 are geometric with ratio t, so P = (1 - t) / (1 + t)
    X, Y = np.meshgrid(np.linspace(-12, 12, 400), np.linspace(-12, 12, 400), indexing="ij")
    c = 0.6
    f = np.exp(-(X**2 + Y**2 - 2 * c * X * Y) / 2)
    res = schmidt_decompose(JsaGrid(X[:, 0], Y[0], f).normalize())
    t = (c / (1 + math.sqrt(1 - c * c))) ** 2
    assert res.purity == pytest.approx((1 - t) / (1 + t), abs=1e-9)


def test_modes_orthonormal():
    res = schmidt_decompose(normalized(correlated(0.7)), n_modes=5)
    ds, di = WS[1] - WS[0], WI[1] - WI[0]
    np.testing.assert_allclose(res.signal_modes.conj() @ res.signal_modes.T * ds, np.eye(5), atol=1e-10)
    np.testing.assert_allclose(res.idler_modes.conj() @ res.idler_modes.T * di, np.eye(5), atol=1e-10)


def test_grid_checks():
    with pytest.raises(InvalidModel):
        schmidt_decompose(JsaGrid(WS[:8], WI[:8], np.ones((8, 8))))
    bad = JsaGrid(np.linspace(0, 1, 20), np.linspace(0, 1, 20), np.ones((20, 20)))
    bad.signal_axis = np.concatenate([[0.0, 0.0], bad.signal_axis[2:]])
    with pytest.raises(DegenerateGrid):
        schmidt_decompose(bad)


def test_marginals():
    g, h = gauss(WS, 0.3, 0.8), gauss(WI, 1.0, 1.1)
    jsa = normalized(np.outer(g, h))
    ms, mi = heralded_marginals(jsa)
    ds, di = jsa.steps
    assert np.sum(ms) * ds == pytest.approx(1.0, abs=1e-12)
    assert np.sum(mi) * di == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(ms, g**2 / (np.sum(g**2) * ds), atol=1e-12)
    np.testing.assert_allclose(mi, h**2 / (np.sum(h**2) * di), atol=1e-12)


def test_anticorrelated_marginals_broader_than_conditional():
    jsa = normalized(correlated(-0.9))
    ms, _ = heralded_marginals(jsa)
    ds = jsa.steps[0]

    def width(p):
        p = p / np.sum(p)
        m = np.sum(p * WS)
        return math.sqrt(np.sum(p * (WS - m) ** 2))

    j = int(np.argmax(jsa.intensity.sum(axis=0)))
    conditional = jsa.intensity[:, j]
    assert width(ms * ds) > 2 * width(conditional)


def test_refinement_is_cauchy(channels):
    # sinc baseline at a fixed bandwidth: purity settles as the grid doubles
    pump = PumpSpec(1.17, 0.0133, 1.37)
    env = ModalEnvelope.constant(1.0, 305.0)
    p = [schmidt_decompose(build_jsa(pump, channels, env, GridSpec(n, n))).purity for n in (64, 128, 256, 512)]
    d = np.abs(np.diff(p))
    assert d[1] < d[0] and d[2] < d[1]
    assert d[2] < 1e-3
