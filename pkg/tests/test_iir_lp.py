from __future__ import annotations

import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_stable
from lpfilter.grid import (
    PASS,
    STOP,
    DesiredResponse,
    band_edges_from_f,
    build_grid,
    build_lowpass_desired,
)
from lpfilter.iir_l2 import IirFilter
from lpfilter.iir_lp import (
    MAX_POLE_RADIUS,
    STAGES,
    StageWarning,
    design_iir_complex_lp,
    design_iir_freq_varying,
    design_iir_magnitude_lp,
    fill_transition,
    l2_iir_design,
    phase_update,
)
from lpfilter.irls import BBS, IrlsConfig


@pytest.fixture
def complex_lowpass():
    wp, ws = band_edges_from_f(0.2, 0.25)
    return build_lowpass_desired(build_grid(128), wp, ws, delay=1.375)


def stop_max(filt, d):
    return np.abs(filt.response(d.omegas) - d.samples)[d.labels == STOP].max()


def test_phase_update():
    assert_allclose(phase_update([1.0], [1j]), [1j])
    assert_allclose(phase_update([2.0, 3.0], [-4.0, 0.0]), [-2.0, 3.0])
    with pytest.raises(ValueError):
        phase_update([1.0, 2.0], [1.0])


def test_fill_transition_interpolates_magnitude():
    g = build_grid(64)
    wp, ws = band_edges_from_f(0.2, 0.3)
    d = build_lowpass_desired(g, wp, ws)
    s = fill_transition(d)
    t = ~d.care
    assert_allclose(s[d.care], d.samples[d.care])
    assert np.all((s[t].real > 0) & (s[t].real < 1)) and np.all(np.diff(s[t].real) < 0)


def test_order_validation(complex_lowpass):
    with pytest.raises(ValueError):
        design_iir_complex_lp(complex_lowpass, 0, 0)
    with pytest.raises(ValueError):
        l2_iir_design(complex_lowpass, -1, 2)


def test_p2_is_the_l2_design(complex_lowpass):
    ref, _ = l2_iir_design(complex_lowpass, 4, 4)
    f, trace = design_iir_complex_lp(complex_lowpass, 4, 4, config=IrlsConfig(p_des=2))
    assert trace.status == "converged" and trace.iterations == 0
    assert_allclose(f.stacked(), ref.stacked())


def test_complex_lp_trades_stopband_peak(complex_lowpass):
    d = complex_lowpass
    l2, _ = design_iir_complex_lp(d, 4, 4, config=IrlsConfig(p_des=2))
    lp, _ = design_iir_complex_lp(d, 4, 4, config=IrlsConfig(p_des=20, max_outer_iters=60))
    assert stop_max(lp, d) < stop_max(l2, d)
    assert np.abs(lp.poles).max() <= MAX_POLE_RADIUS + 1e-12


def test_constant_p_freq_varying_equals_uniform(complex_lowpass):
    d = complex_lowpass
    cfg = IrlsConfig(p_des=6, max_outer_iters=40)
    uni, _ = design_iir_complex_lp(d, 3, 3, BBS(1.5), cfg)
    fv, _ = design_iir_freq_varying(d, 3, 3, 6.0, sigma0=1.5,
                                    config=IrlsConfig(max_outer_iters=40))
    H = d.omegas
    assert_allclose(fv.response(H), uni.response(H), atol=1e-6)


def test_band_norm_freq_varying_lowers_stopband_peak(complex_lowpass):
    d = complex_lowpass
    p = np.where(d.labels == STOP, 20.0, 2.0)
    mixed, _ = design_iir_freq_varying(d, 4, 4, p, objective="band-norm",
                                       config=IrlsConfig(max_outer_iters=60))
    l2, _ = design_iir_complex_lp(d, 4, 4, config=IrlsConfig(p_des=2))
    assert stop_max(mixed, d) < stop_max(l2, d)


def test_freq_varying_validation(complex_lowpass):
    with pytest.raises(ValueError):
        design_iir_freq_varying(complex_lowpass, 2, 2, 1.0)
    with pytest.raises(ValueError):
        design_iir_freq_varying(complex_lowpass, 2, 2, np.inf)


def test_magnitude_p2_stage_three_continues_l2():
    wp, ws = band_edges_from_f(0.2, 0.25)
    d = build_lowpass_desired(build_grid(128), wp, ws)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StageWarning)
        f, reports, trace = design_iir_magnitude_lp(d, 4, 4, p_des=2,
                                                    config=IrlsConfig(p_des=2, max_outer_iters=20))
    assert [r.stage for r in reports] == list(STAGES)
    assert all(np.all(r.p == 2.0) for r in trace.records)
    errs = np.array([r.l2_error for r in trace.records])
    assert np.all(np.diff(errs) <= 1e-12 * errs[:-1])
    assert reports[2].l2_error <= reports[1].l2_error
    assert reports[1].l2_error < reports[0].l2_error


def test_stalled_stage_warns():
    wp, ws = band_edges_from_f(0.2, 0.25)
    d = build_lowpass_desired(build_grid(128), wp, ws)
    with pytest.warns(StageWarning, match=STAGES[0]):
        design_iir_magnitude_lp(d, 4, 4, p_des=2)


@pytest.mark.parametrize("case", [0, 1, 4])
def test_magnitude_recovers_synthetic_system(case):
    rng = np.random.default_rng(3)
    for _ in range(case + 1):
        b, a = random_stable(rng, 2, 2, radius=0.8)
    g = build_grid(128)
    mag = np.abs(IirFilter(b, a).response(g))
    d = DesiredResponse(grid=g, samples=mag + 0j, labels=np.full(128, PASS, dtype=object),
                        magnitude_only=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        f, reports, _ = design_iir_magnitude_lp(d, 2, 2, p_des=4)
    assert reports[-1].max_error < 1e-9
    assert_allclose(np.abs(f.response(g)), mag, atol=1e-9)


def test_magnitude_lp_lowers_stopband_peak():
    wp, ws = band_edges_from_f(0.2, 0.25)
    d = build_lowpass_desired(build_grid(128), wp, ws, transition="linear-interp")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StageWarning)
        f, reports, _ = design_iir_magnitude_lp(d, 4, 4, p_des=30)
    assert reports[2].max_error < reports[1].max_error
    assert np.abs(f.poles).max() <= MAX_POLE_RADIUS + 1e-12
