"""scikit-learn style front ends for the l_p designs.

The estimators treat filter design as a regression from frequency to
response: ``fit(omega, D)`` designs a filter against the samples ``D`` at
radian frequencies ``omega`` and ``predict(omega)`` evaluates it.
Zero ``sample_weight`` entries act as dont-care rows.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .fir import design_complex_lp, design_linear_phase_lp, design_magnitude_fir
from .grid import PASS, DesiredResponse, FrequencyGrid
from .iir_l2 import iir_freq_response
from .iir_lp import MAX_POLE_RADIUS, design_iir_complex_lp, design_iir_magnitude_lp
from .irls import IrlsConfig, lp_error, make_strategy
from .kernels import impulse_to_amplitude, linear_phase_kernel
from .validation import (
    check_exponent,
    check_frequencies,
    check_order,
    check_response,
    check_sample_weight,
)

__all__ = ["LpFirRegressor", "LpIirRegressor"]

_FIR_KINDS = ("I", "II", "III", "IV", "complex", "magnitude")


def _desired(omega, D, sample_weight, *, magnitude_only=False, delay=None) -> DesiredResponse:
    grid = FrequencyGrid(omega)
    care = sample_weight > 0
    if np.count_nonzero(care) < 2:
        raise ValueError("at least two samples need a positive weight")
    return DesiredResponse(
        grid=grid,
        samples=np.asarray(D, dtype=complex),
        labels=np.full(omega.size, PASS, dtype=object),
        magnitude_only=magnitude_only,
        care=care,
        delay=delay,
        weights=np.where(care, sample_weight, 1.0),
    )


class _LpMixin:
    """Shared parameter handling."""

    def _config(self) -> IrlsConfig:
        p = check_exponent(self.p)
        return IrlsConfig(p_des="inf" if math.isinf(p) else p,
                          max_outer_iters=check_order(self.max_iter, "max_iter", 1),
                          coeff_tol=self.coeff_tol, error_tol=self.error_tol)

    def _strategy(self):
        return make_strategy(self.strategy, sigma=self.sigma, delta=self.delta,
                             gamma=self.gamma, lam=self.lam)

    def _set_trace(self, trace):
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.status_ = trace.status

    def score(self, omega, D, sample_weight=None):
        """Negative l_p error of :meth:`predict` against ``D``.

        Higher is better, as scikit-learn expects.
        """
        pred = self.predict(omega)
        D = check_response(D, pred.size)
        w = check_sample_weight(sample_weight, pred.size)
        p = min(check_exponent(self.p), self._config().inf_proxy)
        return -lp_error(pred - D, p, w)


class LpFirRegressor(_LpMixin, RegressorMixin, BaseEstimator):
    """l_p optimal FIR filter fitted to frequency samples.

    Parameters
    ----------
    n_taps : int
        Filter length ``N``.
    kind : {"I", "II", "III", "IV", "complex", "magnitude"}
        Linear-phase type, arbitrary complex response, or magnitude only.
    p : float or "inf"
        Target exponent, at least 2.
    strategy : str
        One of ``basic``, ``rul``, ``karlovitz``, ``kahng``, ``bbs``,
        ``adaptive-bbs``.
    sigma, delta, gamma, lam : float, optional
        Strategy parameters; ``None`` keeps the strategy default.
    max_iter : int
    coeff_tol, error_tol : float
        Stopping tolerances of the IRLS loop.

    Attributes
    ----------
    coef_ : ndarray
        Impulse response.
    filter_ : FirFilter
    trace_ : ConvergenceTrace
    n_iter_ : int
    status_ : str

    Notes
    -----
    For the linear-phase kinds a real ``D`` is the amplitude ``A(w)`` and
    ``predict`` returns the fitted amplitude; a complex ``D`` is a full
    response with delay ``(N - 1) / 2`` and ``predict`` returns ``H(w)``.
    For ``complex`` ``predict`` returns ``H(w)``, for ``magnitude`` it
    returns ``|H(w)|``.

    Examples
    --------
    >>> import numpy as np
    >>> w = np.linspace(0, np.pi, 64)
    >>> est = LpFirRegressor(n_taps=7, p=2).fit(w, (w < 1.0).astype(float))
    >>> est.coef_.shape
    (7,)
    """

    def __init__(self, n_taps=21, kind="I", p=2.0, strategy="adaptive-bbs", sigma=None,
                 delta=None, gamma=None, lam=None, max_iter=200, coeff_tol=1e-8,
                 error_tol=1e-10):
        self.n_taps = n_taps
        self.kind = kind
        self.p = p
        self.strategy = strategy
        self.sigma = sigma
        self.delta = delta
        self.gamma = gamma
        self.lam = lam
        self.max_iter = max_iter
        self.coeff_tol = coeff_tol
        self.error_tol = error_tol

    def fit(self, omega, D, sample_weight=None):
        if self.kind not in _FIR_KINDS:
            raise ValueError(f"kind must be one of {_FIR_KINDS}, got {self.kind!r}")
        N = check_order(self.n_taps, "n_taps", 1)
        w = check_frequencies(omega)
        D = check_response(D, w.size)
        sw = check_sample_weight(sample_weight, w.size)
        strategy, config = self._strategy(), self._config()
        self.complex_target_ = bool(np.iscomplexobj(D))
        if self.kind == "complex":
            filt, trace = design_complex_lp(_desired(w, D, sw), N, strategy, config)
        elif self.kind == "magnitude":
            des = _desired(w, np.abs(D), sw, magnitude_only=True)
            filt, trace = design_magnitude_fir(des, N, strategy, config)
        else:
            delay = (N - 1) / 2 if self.complex_target_ else None
            des = _desired(w, D, sw, magnitude_only=not self.complex_target_, delay=delay)
            filt, trace = design_linear_phase_lp(des, N, self.kind, strategy, config)
        self.filter_ = filt
        self.coef_ = filt.h.copy()
        self._set_trace(trace)
        return self

    def response(self, omega) -> np.ndarray:
        """Complex frequency response ``H(w)``."""
        check_is_fitted(self, "coef_")
        return self.filter_.response(np.asarray(omega, dtype=float))

    def predict(self, omega):
        check_is_fitted(self, "coef_")
        w = check_frequencies(omega)
        if self.kind == "magnitude":
            return np.abs(self.response(w))
        if self.kind == "complex" or self.complex_target_:
            return self.response(w)
        K = linear_phase_kernel(w, self.coef_.size, self.kind)
        return K.matrix @ impulse_to_amplitude(self.coef_, self.kind)


class LpIirRegressor(_LpMixin, RegressorMixin, BaseEstimator):
    """l_p optimal rational filter ``B / A`` fitted to frequency samples.

    Parameters
    ----------
    n_poles, n_zeros : int
        Denominator order ``N`` and numerator order ``M``.
    magnitude_only : bool
        Fit ``|D|`` and let the design choose the phase.
    p : float or "inf"
    strategy, sigma, delta, gamma, lam, max_iter, coeff_tol, error_tol
        As for :class:`LpFirRegressor`.
    max_pole_radius : float
        Bound on the pole radius of every iterate.

    Attributes
    ----------
    b_, a_ : ndarray
        Numerator and denominator (``a_[0] == 1``).
    filter_ : IirFilter
    stage_reports_ : list of MagnitudeStageReport
        Only for magnitude fits.
    trace_, n_iter_, status_
    """

    def __init__(self, n_poles=4, n_zeros=4, magnitude_only=False, p=2.0,
                 strategy="adaptive-bbs", sigma=None, delta=None, gamma=None, lam=None,
                 max_iter=200, coeff_tol=1e-8, error_tol=1e-10,
                 max_pole_radius=MAX_POLE_RADIUS):
        self.n_poles = n_poles
        self.n_zeros = n_zeros
        self.magnitude_only = magnitude_only
        self.p = p
        self.strategy = strategy
        self.sigma = sigma
        self.delta = delta
        self.gamma = gamma
        self.lam = lam
        self.max_iter = max_iter
        self.coeff_tol = coeff_tol
        self.error_tol = error_tol
        self.max_pole_radius = max_pole_radius

    def fit(self, omega, D, sample_weight=None):
        N = check_order(self.n_poles, "n_poles")
        M = check_order(self.n_zeros, "n_zeros")
        if N == 0 and M == 0:
            raise ValueError("n_poles and n_zeros cannot both be zero")
        w = check_frequencies(omega)
        D = check_response(D, w.size)
        sw = check_sample_weight(sample_weight, w.size)
        strategy, config = self._strategy(), self._config()
        if self.magnitude_only:
            des = _desired(w, np.abs(D), sw, magnitude_only=True)
            filt, reports, trace = design_iir_magnitude_lp(
                des, N, M, strategy=strategy, config=config, max_radius=self.max_pole_radius)
            self.stage_reports_ = reports
        else:
            filt, trace = design_iir_complex_lp(_desired(w, D, sw), N, M, strategy, config,
                                                max_radius=self.max_pole_radius)
        self.filter_ = filt
        self.b_ = filt.b.copy()
        self.a_ = filt.a.copy()
        self._set_trace(trace)
        return self

    def response(self, omega) -> np.ndarray:
        """Complex frequency response ``B(w) / A(w)``."""
        check_is_fitted(self, "b_")
        return iir_freq_response(self.filter_, np.asarray(omega, dtype=float))

    def predict(self, omega):
        check_is_fitted(self, "b_")
        H = self.response(check_frequencies(omega))
        return np.abs(H) if self.magnitude_only else H
