from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.signal import freqz

from conftest import random_stable
from lpfilter.grid import band_edges_from_f, build_grid, build_lowpass_desired
from lpfilter.iir_l2 import (
    IirFilter,
    enforce_stability,
    equation_error_design,
    full_circle_grid,
    iir_freq_response,
    jackson_design,
    limit_pole_radius,
    prony_freq_design,
    quasilinearize,
    soewito_mode1,
    soewito_mode2,
    solution_error,
    solution_error_gradient,
    stabilize,
    to_full_circle,
)


def test_filter_normalizes_leading_coefficient():
    f = IirFilter([2.0, 4.0], [2.0, 1.0])
    assert_allclose(f.b, [1.0, 2.0])
    assert_allclose(f.a, [1.0, 0.5])
    assert (f.N, f.M) == (1, 1)
    with pytest.raises(ValueError):
        IirFilter([1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        IirFilter([np.inf], [1.0])


def test_stacked_roundtrip():
    f = IirFilter([1.0, 2.0, 3.0], [1.0, -0.5])
    assert_allclose(f.stacked(), [1, 2, 3, -0.5])
    g = IirFilter.from_stacked(f.stacked(), 1, 2)
    assert_allclose(g.b, f.b) and assert_allclose(g.a, f.a)
    with pytest.raises(ValueError):
        IirFilter.from_stacked([1.0, 2.0], 1, 2)


def test_response_matches_scipy(rng):
    b, a = random_stable(rng, 4, 3)
    w = np.linspace(0, np.pi, 77)
    _, ref = freqz(b, a, worN=w)
    assert_allclose(iir_freq_response(IirFilter(b, a), w), ref, rtol=1e-12, atol=1e-12)


def test_response_rejects_vanishing_denominator():
    with pytest.raises(ValueError):
        iir_freq_response(IirFilter([1.0], [1.0, 1.0]), [0.0, np.pi])


def test_to_full_circle_is_conjugate_symmetric(rng):
    b, a = random_stable(rng, 2, 2)
    w = np.linspace(0, np.pi, 9)
    full = to_full_circle(w, iir_freq_response(IirFilter(b, a), w))
    assert full.size == 16
    _, ref = freqz(b, a, worN=full_circle_grid(16), whole=True)
    assert_allclose(full, ref, atol=1e-12)
    assert np.abs(np.fft.ifft(full).imag).max() < 1e-12


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 4), st.integers(0, 4))
def test_prony_interpolates_exact_rational_data(seed, N, M):
    rng = np.random.default_rng(seed)
    b, a = random_stable(rng, N, M, radius=0.8)
    L = 4 * (N + M + 1)
    _, D = freqz(b, a, worN=full_circle_grid(L), whole=True)
    f = prony_freq_design(D, N, M)
    scale = np.abs(D).max()
    assert_allclose(iir_freq_response(f, full_circle_grid(L)), D, atol=1e-7 * scale)


def test_prony_validation():
    with pytest.raises(ValueError):
        prony_freq_design(np.ones(3), 2, 1)
    with pytest.raises(ValueError):
        prony_freq_design(np.exp(1j * np.arange(8)), 1, 1)


def test_equation_error_recovers_exact_data(rng):
    b, a = random_stable(rng, 3, 3)
    w = np.linspace(0, np.pi, 64)
    D = iir_freq_response(IirFilter(b, a), w)
    f = equation_error_design(D, w, 3, 3)
    assert_allclose(f.b, b, atol=1e-9)
    assert_allclose(f.a, a, atol=1e-9)


def test_gradient_matches_finite_differences(rng):
    b, a = random_stable(rng, 3, 2)
    w = np.linspace(0, np.pi, 50)
    D = np.exp(-1j * 2 * w) * (w < 1.2)
    W = rng.uniform(0.5, 2.0, w.size)
    f = IirFilter(b, a)
    g = solution_error_gradient(D, w, f, W)
    h0, eps = f.stacked(), 1e-6
    fd = np.empty_like(h0)
    for k in range(h0.size):
        e = np.zeros_like(h0)
        e[k] = eps
        fd[k] = (solution_error(D, w, IirFilter.from_stacked(h0 + e, 3, 2), W)
                 - solution_error(D, w, IirFilter.from_stacked(h0 - e, 3, 2), W)) / (2 * eps)
    assert_allclose(g, fd, rtol=1e-5, atol=1e-7 * np.abs(fd).max())


@pytest.mark.parametrize("solver", [soewito_mode1, soewito_mode2])
def test_soewito_recovers_exact_data(solver, rng):
    b, a = random_stable(rng, 2, 2, radius=0.7)
    w = np.linspace(0, np.pi, 64)
    D = iir_freq_response(IirFilter(b, a), w)
    f = solver(D, w, 2, 2, iters=20)
    assert_allclose(f.a, a, atol=1e-8)
    assert_allclose(f.b, b, atol=1e-8)


def test_jackson_reaches_exact_data(rng):
    b, a = random_stable(rng, 2, 2, radius=0.6)
    w = np.linspace(0, np.pi, 64)
    D = iir_freq_response(IirFilter(b, a), w)
    f = jackson_design(D, w, 2, 2, iters=400)
    assert solution_error(D, w, f) < 1e-12
    assert jackson_design(D, w, 2, 2, iters=0).a.size == 3


def _lowpass(L=128):
    wp, ws = band_edges_from_f(0.2, 0.25)
    d = build_lowpass_desired(build_grid(L), wp, ws, delay=3.0)
    c = d.care
    return d.samples[c], d.omegas[c]


def test_quasilinearize_descends_to_a_stationary_point():
    D, w = _lowpass()
    f, trace = quasilinearize(D, w, 4, 4, iters=100)
    errs = np.array(trace.errors)
    assert np.all(np.diff(errs) <= 1e-12 * errs[:-1])
    assert errs[-1] < errs[0]
    assert np.all(np.abs(f.poles) < 1)
    g = solution_error_gradient(D, w, f)
    assert np.linalg.norm(g) < 1e-5 * max(errs[-1], 1.0)


def test_mode2_fixed_point_has_small_gradient():
    D, w = _lowpass()
    f0, _ = quasilinearize(D, w, 4, 4, iters=100)
    f = soewito_mode2(D, w, 4, 4, iters=5, h_init=f0)
    assert solution_error(D, w, f) <= solution_error(D, w, f0) * (1 + 1e-6)


def test_enforce_stability_example():
    f = enforce_stability(IirFilter([1.0], [1.0, -2.0]))
    assert_allclose(f.a, [1.0, -0.5])
    assert_allclose(f.b, [0.5])


@given(st.integers(0, 2 ** 32 - 1))
def test_enforce_stability_preserves_magnitude(seed):
    rng = np.random.default_rng(seed)
    poles = rng.uniform(0.2, 3.0, 4) * np.exp(1j * rng.uniform(0.1, 3.0, 4))
    poles = poles[np.abs(np.abs(poles) - 1) > 0.05]
    a = np.real(np.poly(np.concatenate([poles, poles.conj()])))
    f = IirFilter(rng.standard_normal(3), a)
    g = enforce_stability(f)
    w = np.linspace(0, np.pi, 200)
    assert np.all(np.abs(g.poles) < 1)
    assert_allclose(np.abs(g.response(w)), np.abs(f.response(w)), rtol=1e-8)


def test_limit_pole_radius():
    f = limit_pole_radius(IirFilter([1.0], [1.0, -0.99999]), 0.9999)
    assert_allclose(np.abs(f.poles), [0.9999])
    with pytest.raises(ValueError):
        limit_pole_radius(f, 1.5)
    g = stabilize(IirFilter([1.0], [1.0, -2.0]), 0.4)
    assert_allclose(np.abs(g.poles), [0.4])
