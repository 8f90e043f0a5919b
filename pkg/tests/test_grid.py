from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from lpfilter.grid import (
    PASS,
    STOP,
    TRANSITION,
    DesiredResponse,
    FrequencyGrid,
    band_edges_from_f,
    build_grid,
    build_lowpass_desired,
    default_grid_size,
)


def test_small_grids():
    assert_allclose(build_grid(3).omegas, [0.0, np.pi / 2, np.pi])
    assert_allclose(build_grid(2).omegas, [0.0, np.pi])
    assert_allclose(build_grid(2, include_endpoints=False).omegas, [np.pi / 4, 3 * np.pi / 4])


def test_uniform_spacing():
    d = np.diff(build_grid(512).omegas)
    assert np.ptp(d) < 1e-14


def test_normalized_frequency():
    g = build_grid(5)
    assert_allclose(g.f, [0, 0.125, 0.25, 0.375, 0.5])


@pytest.mark.parametrize("bad", [[0.0], [0.0, 0.0], [0.0, 4.0], [1.0, 0.5], [0.0, np.nan]])
def test_grid_validation(bad):
    with pytest.raises(ValueError):
        FrequencyGrid(np.array(bad))


def test_grid_is_read_only():
    g = build_grid(4)
    with pytest.raises(ValueError):
        g.omegas[0] = 1.0


def test_default_grid_size():
    assert default_grid_size(4) == 256
    assert default_grid_size(21) == 336


def test_standard_band_edges():
    wp, ws = band_edges_from_f(0.2, 0.24)
    assert_allclose([wp, ws], [0.4 * np.pi, 0.48 * np.pi])


def test_lowpass_labels_and_values():
    wp, ws = band_edges_from_f(0.2, 0.24)
    d = build_lowpass_desired(build_grid(101), wp, ws, transition="linear-interp")
    w = d.omegas
    assert set(d.labels) == {PASS, STOP, TRANSITION}
    assert np.all(d.samples[w < wp].real == 1.0)
    assert np.all(d.samples[w > ws] == 0.0)
    assert d.care.all()
    mid = (wp + ws) / 2
    g = FrequencyGrid(np.array([0.0, wp, mid, ws, np.pi]))
    dm = build_lowpass_desired(g, wp, ws, transition="linear-interp")
    assert dm.samples[2].real == pytest.approx(0.5)


def test_dont_care_mask():
    wp, ws = band_edges_from_f(0.2, 0.24)
    d = build_lowpass_desired(build_grid(256), wp, ws)
    assert np.array_equal(d.care, d.labels != TRANSITION)
    assert d.magnitude_only


def test_delay_and_amplitude():
    wp, ws = band_edges_from_f(0.2, 0.24)
    d = build_lowpass_desired(build_grid(64), wp, ws, delay=3.0)
    assert_allclose(np.abs(d.samples[d.labels == PASS]), 1.0)
    assert_allclose(d.amplitude(), np.abs(d.samples), atol=1e-15)
    assert not d.magnitude_only


def test_band_weights():
    wp, ws = band_edges_from_f(0.2, 0.24)
    d = build_lowpass_desired(build_grid(64), wp, ws, pass_weight=2.0, stop_weight=5.0)
    assert np.all(d.weights[d.labels == PASS] == 2.0)
    assert np.all(d.weights[d.labels == STOP] == 5.0)


@pytest.mark.parametrize("edges", [(0.5, 0.4), (0.0, 1.0), (1.0, 4.0)])
def test_lowpass_rejects_bad_edges(edges):
    with pytest.raises(ValueError):
        build_lowpass_desired(build_grid(64), *edges)


def test_desired_validation():
    g = build_grid(3)
    with pytest.raises(ValueError, match="align"):
        DesiredResponse(g, np.ones(2), np.array([PASS] * 3))
    with pytest.raises(ValueError, match="labels"):
        DesiredResponse(g, np.ones(3), np.array(["pass", "x", "stop"]))
    with pytest.raises(ValueError, match="magnitude"):
        DesiredResponse(g, -np.ones(3), np.array([PASS] * 3), magnitude_only=True)


@given(L=st.integers(2, 2000))
def test_grid_properties(L):
    w = build_grid(L).omegas
    assert w.size == L and w[0] == 0.0 and w[-1] == pytest.approx(np.pi)
    assert np.all(np.diff(w) > 0)


@given(fp=st.floats(0.01, 0.4), width=st.floats(0.01, 0.09))
def test_every_sample_has_one_label(fp, width):
    wp, ws = band_edges_from_f(fp, fp + width)
    d = build_lowpass_desired(build_grid(128), wp, ws)
    w = d.omegas
    assert np.all((d.labels == PASS) == (w <= wp))
    assert np.all((d.labels == STOP) == (w >= ws))
