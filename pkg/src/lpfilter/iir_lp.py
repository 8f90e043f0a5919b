"""l_p rational (IIR) design by nesting quasilinearization inside IRLS.

The outer loop is the same reweighting engine used for FIR problems, with
the weighted linear solve replaced by a few warm-started weighted
quasilinearization steps on ``[b; a_1..a_N]``. The magnitude design adds
phase updating: the desired phase is replaced by the phase of the current
response, so only ``|D|`` is approximated.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import DesiredResponse
from .iir_l2 import (
    IirFilter,
    iir_freq_response,
    prony_freq_design,
    quasilinearize,
    stabilize,
    to_full_circle,
)
from .irls import AdaptiveBBS, FreqVarying, IrlsConfig, IrlsProblem, run_irls

__all__ = [
    "STAGES",
    "MagnitudeStageReport",
    "StageWarning",
    "RationalProblem",
    "MagnitudeProblem",
    "phase_update",
    "fill_transition",
    "l2_iir_design",
    "design_iir_complex_lp",
    "design_iir_freq_varying",
    "design_iir_magnitude_lp",
]

STAGES = ("eq-error-l2-mag", "sol-error-l2-mag", "sol-error-lp-mag")
FIRST_INNER_ITERS = 50
INNER_ITERS = 5
STAGE_MAX_ITERS = 50
STAGE_REL_TOL = 1e-6
STAGE_PATIENCE = 10
MAX_POLE_RADIUS = 0.9999
INNER_TOL = 1e-8
INNER_ERROR_TOL = 1e-9


class StageWarning(RuntimeWarning):
    """A magnitude design stage stopped improving before converging."""


def phase_update(D0_magnitude, H_current) -> np.ndarray:
    """``|D0| H / |H|``, with zero phase where ``|H| < 1e-14``.

    Examples
    --------
    >>> phase_update([1.0], [1j])
    array([0.+1.j])
    """
    D0 = np.asarray(D0_magnitude, dtype=float)
    H = np.asarray(H_current, dtype=complex)
    if D0.shape != H.shape:
        raise ValueError("magnitude and response must have the same length")
    mag = np.abs(H)
    unit = np.ones_like(H)
    ok = mag >= 1e-14
    unit[ok] = H[ok] / mag[ok]
    return D0 * unit


def fill_transition(desired: DesiredResponse) -> np.ndarray:
    """Desired samples with dont-care rows filled by linear interpolation.

    Magnitudes are interpolated across each gap; the phase follows the
    desired delay when there is one and is zero otherwise.
    """
    s = np.array(desired.samples)
    care = desired.care
    if np.all(care):
        return s
    w = desired.omegas
    mag = np.interp(w, w[care], np.abs(s[care]))
    phase = np.exp(-1j * w * desired.delay) if desired.delay is not None else 1.0
    s[~care] = (mag * phase)[~care]
    return s


def _check_orders(N: int, M: int) -> None:
    if N < 0 or M < 0:
        raise ValueError("orders must be nonnegative")
    if N == 0 and M == 0:
        raise ValueError("N and M cannot both be zero")


def _prony_seed(desired: DesiredResponse, N: int, M: int, samples=None,
                max_radius: float = MAX_POLE_RADIUS) -> IirFilter:
    s = fill_transition(desired) if samples is None else samples
    full = to_full_circle(desired.omegas, s)
    return stabilize(prony_freq_design(full, N, M), max_radius)


def l2_iir_design(desired: DesiredResponse, N: int, M: int, iters: int = FIRST_INNER_ITERS,
                  max_radius: float = MAX_POLE_RADIUS):
    """Solution-error l_2 design: Prony seed refined by quasilinearization.

    Returns
    -------
    IirFilter, QuasiTrace
    """
    _check_orders(N, M)
    seed = _prony_seed(desired, N, M, max_radius=max_radius)
    c = desired.care
    return quasilinearize(desired.samples[c], desired.omegas[c], N, M,
                          desired.weights[c], h_init=seed, iters=iters,
                          max_radius=max_radius)


class RationalProblem(IrlsProblem):
    """Complex rational approximation on the care rows of a desired response.

    ``solve`` runs weighted quasilinearization warm-started at the current
    iterate, with a larger budget on the first call.
    """

    iterative_solve = True

    def __init__(self, D, omegas, N: int, M: int, base_weights, x0,
                 inner_iters: int = INNER_ITERS, first_inner_iters: int = FIRST_INNER_ITERS,
                 max_radius: float = MAX_POLE_RADIUS, inner_tol: float = INNER_TOL):
        self.D = np.asarray(D, dtype=complex)
        self.omegas = np.asarray(omegas, dtype=float)
        self.N, self.M = int(N), int(M)
        self.base_weights = np.asarray(base_weights, dtype=float)
        self.x0 = np.asarray(x0, dtype=float)
        self.inner_iters = int(inner_iters)
        self.first_inner_iters = int(first_inner_iters)
        self.max_radius = float(max_radius)
        self.inner_tol = float(inner_tol)
        self._calls = 0
        self._inner = 0

    def filter(self, x) -> IirFilter:
        return IirFilter.from_stacked(x, self.N, self.M)

    def initial(self):
        return self.x0.copy()

    def response(self, x) -> np.ndarray:
        return iir_freq_response(self.filter(x), self.omegas)

    def target(self, x) -> np.ndarray:
        """Complex desired samples used by the inner solve at ``x``."""
        return self.D

    def residual(self, x):
        return self.response(x) - self.D

    def solve(self, weights, x):
        iters = self.first_inner_iters if self._calls == 0 else self.inner_iters
        self._calls += 1
        filt, qt = quasilinearize(self.target(x), self.omegas, self.N, self.M,
                                  self.base_weights * weights, h_init=self.filter(x),
                                  iters=iters, tol=self.inner_tol,
                                  error_tol=INNER_ERROR_TOL,
                                  max_radius=self.max_radius)
        self._inner = qt.iterations
        return filt.stacked()

    def project(self, x):
        return stabilize(self.filter(x), self.max_radius).stacked()

    def diagnostics(self):
        return {"inner_iterations": self._inner}


class MagnitudeProblem(RationalProblem):
    """Magnitude-only rational approximation with phase updating.

    The residual is ``|H| - |D0|``; each inner solve targets
    ``|D0| exp(j angle H)`` at the current iterate.
    """

    def residual(self, x):
        return np.abs(self.response(x)) - np.abs(self.D)

    def target(self, x):
        return phase_update(np.abs(self.D), self.response(x))


def _config(config, p_des):
    if config is None:
        return IrlsConfig(p_des=p_des if p_des is not None else 2.0)
    return config


def design_iir_complex_lp(desired: DesiredResponse, N: int, M: int, strategy=None,
                          config: IrlsConfig | None = None,
                          max_radius: float = MAX_POLE_RADIUS):
    """Complex l_p rational design.

    Parameters
    ----------
    desired : DesiredResponse
        Complex target; dont-care rows are left out.
    N, M : int
        Denominator and numerator orders.
    strategy : optional
        Outer reweighting strategy, default ``AdaptiveBBS()``.
    config : IrlsConfig, optional
    max_radius : float
        Bound on the pole radius kept by every iterate.

    Returns
    -------
    IirFilter, ConvergenceTrace
        Record 0 of the trace is the l_2 (solution-error) design.
    """
    _check_orders(N, M)
    x0, _ = l2_iir_design(desired, N, M, max_radius=max_radius)
    c = desired.care
    problem = RationalProblem(desired.samples[c], desired.omegas[c], N, M,
                              desired.weights[c], x0.stacked(),
                              first_inner_iters=INNER_ITERS, max_radius=max_radius)
    x, trace = run_irls(problem, strategy or AdaptiveBBS(), _config(config, None))
    return problem.filter(x), trace


def design_iir_freq_varying(desired: DesiredResponse, N: int, M: int, p_per_sample,
                            sigma0: float = 1.5, delta: float = 0.1,
                            config: IrlsConfig | None = None,
                            max_radius: float = MAX_POLE_RADIUS, objective: str = "metric"):
    """Rational design with a per-sample exponent ``p(omega_k) >= 2``.

    ``p_per_sample`` is aligned with the full grid; dont-care rows are
    dropped together with the desired samples. ``objective`` is passed to
    :class:`~lpfilter.irls.FreqVarying`.
    """
    p = np.broadcast_to(np.asarray(p_per_sample, dtype=float), (len(desired.grid),))
    if np.any(p < 2) or not np.all(np.isfinite(p)):
        raise ValueError("per-sample exponents must be finite and at least 2")
    strategy = FreqVarying(p=p[desired.care], sigma0=sigma0, delta=delta, objective=objective)
    return design_iir_complex_lp(desired, N, M, strategy, config, max_radius)


@dataclass(frozen=True)
class MagnitudeStageReport:
    """Outcome of one stage of the magnitude design.

    ``max_error`` and ``l2_error`` are computed from magnitudes only over
    the care rows.
    """

    stage: str
    iterations: int
    max_error: float
    l2_error: float
    flags: str = ""


def _mag_errors(filt: IirFilter, mag, omegas):
    e = np.abs(np.abs(iir_freq_response(filt, omegas)) - mag)
    return float(e.max()), float(np.sqrt(np.sum(e * e)))


class _StageLoop:
    """Stopping logic shared by the first two stages."""

    def __init__(self, filt, err):
        self.best, self.best_err = filt, err
        self.prev = err
        self.stall = 0
        self.flags = []

    def step(self, filt, err) -> bool:
        """Record an iterate; return True when the stage should stop."""
        if err < self.best_err * (1 - 1e-12):
            self.best, self.best_err = filt, err
            self.stall = 0
        else:
            self.stall += 1
        done = abs(self.prev - err) <= STAGE_REL_TOL * max(self.prev, 1e-300)
        self.prev = err
        if not done and self.stall >= STAGE_PATIENCE:
            self.flags.append("no-improvement")
            return True
        return done


def design_iir_magnitude_lp(desired: DesiredResponse, N: int, M: int, p_des=2.0,
                            strategy=None, config: IrlsConfig | None = None,
                            max_radius: float = MAX_POLE_RADIUS):
    """Three-stage magnitude l_p rational design.

    1. Prony fits with phase updating on the full circle (equation error).
    2. Quasilinearization with phase updating (solution error, l_2).
    3. IRLS over weighted quasilinearization with phase updating (l_p).

    Each stage stops when the relative change of its magnitude error drops
    below ``1e-6`` or after 50 iterations; a stage that fails to improve for
    10 iterations hands its best iterate on with a warning.

    Parameters
    ----------
    desired : DesiredResponse
        Only ``|samples|`` is used. Dont-care rows are filled by linear
        interpolation for stage 1 and ignored afterwards.
    N, M : int
    p_des : float or "inf"
        Used when ``config`` is not given.
    strategy : optional
        Stage-3 strategy, default ``AdaptiveBBS()``.
    config : IrlsConfig, optional
    max_radius : float
        Bound on the pole radius kept by every iterate.

    Returns
    -------
    IirFilter, list of MagnitudeStageReport, ConvergenceTrace
    """
    _check_orders(N, M)
    config = _config(config, p_des)
    c = desired.care
    mag_full = np.abs(fill_transition(desired))
    w_c, mag_c, base_c = desired.omegas[c], mag_full[c], desired.weights[c]
    reports = []

    # stage 1
    D = mag_full.astype(complex)
    filt = _prony_seed(desired, N, M, samples=D, max_radius=max_radius)
    loop = _StageLoop(filt, _mag_errors(filt, mag_c, w_c)[1])
    it = 0
    for it in range(1, STAGE_MAX_ITERS + 1):
        D = phase_update(mag_full, iir_freq_response(filt, desired.omegas))
        filt = _prony_seed(desired, N, M, samples=D, max_radius=max_radius)
        if loop.step(filt, _mag_errors(filt, mag_c, w_c)[1]):
            break
    filt = loop.best
    reports.append(_report(STAGES[0], it, filt, mag_c, w_c, loop.flags))

    # stage 2
    loop = _StageLoop(filt, _mag_errors(filt, mag_c, w_c)[1])
    for it in range(1, STAGE_MAX_ITERS + 1):
        D = phase_update(mag_c, iir_freq_response(filt, w_c))
        filt, _ = quasilinearize(D, w_c, N, M, base_c, h_init=filt,
                                 iters=FIRST_INNER_ITERS, max_radius=max_radius)
        if loop.step(filt, _mag_errors(filt, mag_c, w_c)[1]):
            break
    filt = loop.best
    reports.append(_report(STAGES[1], it, filt, mag_c, w_c, loop.flags))

    # stage 3
    problem = MagnitudeProblem(mag_c.astype(complex), w_c, N, M, base_c, filt.stacked(),
                               first_inner_iters=INNER_ITERS, max_radius=max_radius)
    x, trace = run_irls(problem, strategy or AdaptiveBBS(), config)
    final = problem.filter(x)
    flags = [] if trace.status == "converged" else [trace.status]
    reports.append(_report(STAGES[2], trace.iterations, final, mag_c, w_c, flags, warn=False))
    return final, reports, trace


def _report(stage, iterations, filt, mag, omegas, flags, warn=True) -> MagnitudeStageReport:
    mx, l2 = _mag_errors(filt, mag, omegas)
    if flags and warn:
        warnings.warn(f"stage {stage}: {';'.join(flags)}", StageWarning, stacklevel=3)
    if not (math.isfinite(mx) and math.isfinite(l2)):
        raise ValueError(f"stage {stage} produced a non-finite error")
    return MagnitudeStageReport(stage, int(iterations), mx, l2, ";".join(flags))
