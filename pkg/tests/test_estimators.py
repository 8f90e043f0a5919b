from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lpfilter import LpFirRegressor, LpIirRegressor
from lpfilter.fir import design_linear_phase_lp
from lpfilter.grid import band_edges_from_f, build_grid, build_lowpass_desired
from lpfilter.iir_lp import StageWarning
from lpfilter.irls import IrlsConfig
from lpfilter.validation import (
    check_exponent,
    check_frequencies,
    check_normalized_edges,
    check_order,
    check_response,
    check_sample_weight,
)


@pytest.fixture
def lowpass_samples():
    d = build_lowpass_desired(build_grid(256), *band_edges_from_f(0.2, 0.24))
    return d, d.omegas, d.amplitude(), d.care.astype(float)


def test_params_roundtrip():
    est = LpFirRegressor(n_taps=11, p=8)
    assert est.get_params()["n_taps"] == 11
    est.set_params(p=10, kind="II")
    assert (est.p, est.kind) == (10, "II")
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert "max_pole_radius" in LpIirRegressor().get_params()


def test_fir_estimator_matches_functional_design(lowpass_samples):
    d, w, amp, sw = lowpass_samples
    est = LpFirRegressor(n_taps=21, p=10).fit(w, amp, sample_weight=sw)
    ref, _ = design_linear_phase_lp(d, 21, "I", config=IrlsConfig(p_des=10))
    assert_allclose(est.coef_, ref.h, atol=1e-12)
    assert est.status_ == "converged" and est.n_iter_ == est.trace_.iterations
    pred = est.predict(w)
    assert pred.shape == w.shape and not np.iscomplexobj(pred)
    assert est.score(w, amp, sw) < 0
    assert est.score(w, amp, sw) == pytest.approx(-est.trace_.records[-1].lp_error, rel=1e-6)


def test_fir_estimator_complex_and_magnitude(lowpass_samples):
    _, w, amp, sw = lowpass_samples
    D = amp * np.exp(-1j * w * 10)
    lin = LpFirRegressor(n_taps=21, p=4).fit(w, D, sw)
    cpx = LpFirRegressor(n_taps=21, kind="complex", p=4).fit(w, D, sw)
    assert np.iscomplexobj(lin.predict(w))
    assert_allclose(cpx.coef_, lin.coef_, atol=1e-7)
    mag = LpFirRegressor(n_taps=11, kind="magnitude", p=4).fit(w, amp, sw)
    assert np.all(mag.predict(w) >= 0)


@pytest.mark.filterwarnings("ignore", category=StageWarning)
def test_iir_estimator(lowpass_samples):
    _, w, amp, sw = lowpass_samples
    est = LpIirRegressor(n_poles=3, n_zeros=3, p=4, max_iter=30).fit(w, amp * np.exp(-2j * w), sw)
    assert est.a_[0] == 1.0 and np.abs(np.roots(est.a_)).max() < 1
    assert est.predict(w).shape == w.shape
    mag = LpIirRegressor(n_poles=2, n_zeros=2, magnitude_only=True).fit(w, amp, sw)
    assert len(mag.stage_reports_) == 3
    assert np.all(mag.predict(w) >= 0)


def test_estimator_input_validation(lowpass_samples):
    _, w, amp, _ = lowpass_samples
    with pytest.raises(NotFittedError):
        LpFirRegressor().predict(w)
    for est, args in (
        (LpFirRegressor(kind="V"), (w, amp)),
        (LpFirRegressor(n_taps=0), (w, amp)),
        (LpFirRegressor(p=1.5), (w, amp)),
        (LpFirRegressor(), (w[::-1], amp)),
        (LpFirRegressor(), (w, amp[:-1])),
        (LpFirRegressor(), (w, amp, -np.ones(w.size))),
        (LpIirRegressor(n_poles=0, n_zeros=0), (w, amp)),
    ):
        with pytest.raises(ValueError):
            est.fit(*args)


def test_check_frequencies():
    assert_allclose(check_frequencies([[0.0], [1.0]]), [0.0, 1.0])
    for bad in ([0.0], [0.0, 4.0], [1.0, 0.5], [0.0, np.nan], np.zeros((2, 2))):
        with pytest.raises(ValueError):
            check_frequencies(bad)


def test_check_response_and_weights():
    assert check_response([1, 2], 2).dtype == float
    assert np.iscomplexobj(check_response([1j, 2], 2))
    with pytest.raises(ValueError):
        check_response([1j, 2], 2, real=True)
    with pytest.raises(ValueError):
        check_response([1.0], 2)
    assert_allclose(check_sample_weight(None, 3), np.ones(3))
    with pytest.raises(ValueError):
        check_sample_weight([1.0, np.inf], 2)


def test_check_scalars():
    assert check_order(3, "n") == 3
    for bad in (True, 2.5, -1):
        with pytest.raises(ValueError):
            check_order(bad, "n")
    assert check_exponent("inf") == math.inf and check_exponent(2) == 2.0
    for bad in ("big", 1.9, float("nan")):
        with pytest.raises(ValueError):
            check_exponent(bad)
    assert check_normalized_edges(0.1, 0.2) == (0.1, 0.2)
    for bad in ((0.2, 0.1), (0.0, 0.2), (0.1, 0.5)):
        with pytest.raises(ValueError):
            check_normalized_edges(*bad)
