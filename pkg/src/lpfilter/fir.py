"""FIR l_p designs built on the IRLS engine.

* :func:`design_linear_phase_lp` - real amplitude fit with a Type I-IV kernel.
* :func:`design_complex_lp` - arbitrary complex response, real coefficients.
* :func:`design_freq_varying` - exponent ``p(w)`` chosen per frequency.
* :func:`design_cls` - constrained least squares (error bounded by ``tau``).
* :func:`design_magnitude_fir` - magnitude-only fit through the
  autocorrelation and spectral factorization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import PASS, STOP, DesiredResponse
from .irls import (
    AdaptiveBBS,
    ConvergenceTrace,
    DesignMatrixProblem,
    FreqVarying,
    IrlsConfig,
    _make_record,
    MAX_SIGMA_RETRIES,
    kahng_lambda,
    objective_error,
    partial_update,
    run_irls,
)
from .kernels import (
    amplitude_to_impulse,
    autocorrelation,
    complex_kernel,
    fir_response,
    linear_phase_kernel,
    psd_kernel,
)
from .linalg import real_part_projection, solve_wls

__all__ = [
    "FirFilter",
    "ClsSpec",
    "ConstraintReport",
    "FactorizationError",
    "design_linear_phase_lp",
    "design_complex_lp",
    "design_freq_varying",
    "cls_poly_weights",
    "cls_envelope_weights",
    "detect_induced_band",
    "design_cls",
    "design_magnitude_fir",
    "spectral_factorize",
    "build_step_desired",
]


@dataclass(frozen=True)
class FirFilter:
    """Real FIR coefficients with a short design record.

    Attributes
    ----------
    h : ndarray
        Impulse response, length ``N``.
    kind : str
        ``"I"`` to ``"IV"`` for linear-phase designs, ``"general"`` or
        ``"minimum-phase"`` otherwise.
    record : dict
    """

    h: np.ndarray
    kind: str = "general"
    record: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 1 or h.size < 1 or not np.all(np.isfinite(h)):
            raise ValueError("FIR coefficients must be a finite nonempty vector")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def N(self) -> int:
        return self.h.size

    def response(self, grid) -> np.ndarray:
        return fir_response(self.h, grid)


def _strategy_record(strategy, config: IrlsConfig) -> dict:
    return {"strategy": getattr(strategy, "name", type(strategy).__name__),
            "p_des": config.p_des}


def design_linear_phase_lp(desired: DesiredResponse, N: int, kind: str = "I",
                           strategy=None, config: IrlsConfig | None = None):
    """l_p design of a linear-phase FIR filter.

    The amplitude of ``desired`` (its samples with the linear phase of the
    chosen type removed) is approximated on the non-dont-care rows.

    Parameters
    ----------
    desired : DesiredResponse
    N : int
        Filter length.
    kind : {"I", "II", "III", "IV"}
    strategy : IRLS strategy, optional
        Defaults to ``AdaptiveBBS()``.
    config : IrlsConfig, optional

    Returns
    -------
    FirFilter, ConvergenceTrace
    """
    strategy = strategy or AdaptiveBBS()
    config = config or IrlsConfig()
    K = linear_phase_kernel(desired.grid, N, kind)
    rows = desired.care
    target = desired.amplitude(K.phase_offset)
    problem = DesignMatrixProblem(K.matrix[rows], target[rows], desired.weights[rows])
    a, trace = run_irls(problem, strategy, config)
    h = amplitude_to_impulse(a, kind, N)
    return FirFilter(h, kind, _strategy_record(strategy, config)), trace


def design_complex_lp(desired: DesiredResponse, N: int, strategy=None,
                      config: IrlsConfig | None = None):
    """l_p design of a real FIR filter against a complex desired response.

    Real coefficients are enforced by solving on the real and imaginary
    parts jointly, which equals solving on the conjugate-symmetric extension
    of the grid.
    """
    strategy = strategy or AdaptiveBBS()
    config = config or IrlsConfig()
    rows = desired.care
    C = complex_kernel(desired.grid, N)[rows]
    problem = DesignMatrixProblem(C, desired.samples[rows], desired.weights[rows],
                                  real_coefficients=True)
    h, trace = run_irls(problem, strategy, config)
    proj = real_part_projection(h)
    record = _strategy_record(strategy, config)
    record["max_imag_discarded"] = proj.max_imag
    return FirFilter(proj.values, "general", record), trace


def design_freq_varying(desired: DesiredResponse, N: int, p_per_sample, kind: str | None = "I",
                        sigma0: float = 1.5, delta: float = 0.1,
                        config: IrlsConfig | None = None, objective: str = "metric"):
    """l_p design with a frequency-dependent exponent.

    Parameters
    ----------
    desired : DesiredResponse
    N : int
    p_per_sample : array_like
        Exponent for every grid sample (dont-care rows are ignored).
    kind : str or None
        Linear-phase type, or ``None`` for a complex-kernel design.
    sigma0, delta : float
        Homotopy ratio and its adaptation factor.
    objective : {"metric", "band-norm"}
        ``"metric"`` minimizes ``sum_k |e_k|^p_k``. At large exponents this
        sum barely sees errors below 1, so the high-exponent bands are
        sacrificed. ``"band-norm"`` minimizes the sum of one l_p norm per
        group of samples sharing an exponent.
    """
    config = config or IrlsConfig()
    p = np.broadcast_to(np.asarray(p_per_sample, dtype=float), (len(desired.grid),))
    strategy = FreqVarying(p[desired.care], sigma0=sigma0, delta=delta, objective=objective)
    if kind is None:
        f, trace = design_complex_lp(desired, N, strategy, config)
    else:
        f, trace = design_linear_phase_lp(desired, N, kind, strategy, config)
    record = {"strategy": strategy.name, "p_des": "per-sample", "objective": objective}
    return FirFilter(f.h, f.kind, record), trace


# ---------------------------------------------------------------------------
# constrained least squares


@dataclass(frozen=True)
class ClsSpec:
    """Constrained least-squares specification.

    Parameters
    ----------
    tau : float
        Bound on ``|D - H|`` in linear magnitude units.
    mode : {"fixed-band", "induced-band"}
        Fixed bands constrain every pass/stop sample. Induced bands take a
        step desired response (no transition rows) and constrain only the
        samples outside the ripple next to the transition frequency.
    weighting : {"polynomial", "envelope"} or None
        ``None`` picks envelope for induced bands or ``p > 100`` and
        polynomial otherwise.
    p : float
        Exponent inside the constraint weights (reached by homotopy).
    sigma : float
        Homotopy ratio.
    feasibility_slack : float
        Absolute slack when testing ``|e| <= tau``.
    """

    tau: float
    mode: str = "fixed-band"
    weighting: str | None = None
    p: float = 50.0
    sigma: float = 1.5
    feasibility_slack: float = 1e-4

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.mode not in ("fixed-band", "induced-band"):
            raise ValueError(f"unknown CLS mode {self.mode!r}")
        if self.weighting not in (None, "polynomial", "envelope"):
            raise ValueError(f"unknown CLS weighting {self.weighting!r}")
        if not self.p > 2:
            raise ValueError(f"p must exceed 2, got {self.p}")
        if not 1 < self.sigma <= 2:
            raise ValueError(f"sigma must lie in (1, 2], got {self.sigma}")
        if not self.feasibility_slack >= 0:
            raise ValueError("feasibility_slack must be nonnegative")

    @property
    def resolved_weighting(self) -> str:
        if self.weighting is not None:
            return self.weighting
        if self.mode == "induced-band" or self.p > 100:
            return "envelope"
        return "polynomial"


@dataclass(frozen=True)
class ConstraintReport:
    """Outcome of a constrained design.

    Attributes
    ----------
    status : str
        ``constraints-met`` or ``constraint-infeasible``.
    tau : float
    max_error : dict
        Largest constrained error per band label.
    met : dict
        Whether each band satisfies ``|e| <= tau + slack``.
    induced_edges : tuple of float or None
        Realized (pass edge, stop edge) in radians for induced-band designs.
    """

    status: str
    tau: float
    max_error: dict
    met: dict
    induced_edges: tuple | None = None

    @property
    def achieved_max_error(self) -> float:
        return max(self.max_error.values()) if self.max_error else 0.0


def cls_poly_weights(residual, tau: float, p: float) -> np.ndarray:
    """Threshold-like weights ``1 + |e / tau|^((p - 2) / 2)``.

    These are amplitude weights (they scale ``e`` inside the squared norm);
    the least-squares weight is their square.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not p > 2:
        raise ValueError("p must exceed 2")
    a = np.abs(np.asarray(residual)) / tau
    with np.errstate(over="ignore"):
        return 1.0 + a ** ((p - 2) / 2)


def _segments(mask: np.ndarray):
    """Yield (start, stop) index pairs of the True runs in ``mask``."""
    m = np.concatenate([[False], np.asarray(mask, bool), [False]])
    d = np.diff(m.astype(np.int8))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _lobe_breaks(residual: np.ndarray) -> np.ndarray:
    """Boolean array: True at index k when a lobe boundary lies before k.

    Real residuals break at sign changes; complex ones at local minima of
    the magnitude.
    """
    r = np.asarray(residual)
    n = r.size
    brk = np.zeros(n, dtype=bool)
    if n < 2:
        return brk
    if not np.iscomplexobj(r) or np.all(r.imag == 0):
        s = np.sign(np.real(r))
        brk[1:] = (s[1:] * s[:-1]) <= 0
    else:
        a = np.abs(r)
        inner = np.flatnonzero((a[1:-1] <= a[:-2]) & (a[1:-1] <= a[2:])) + 1
        brk[inner] = True
    return brk


def cls_envelope_weights(residual, labels, tau: float, p: float, mask=None) -> np.ndarray:
    """Flat weights over constraint-violating lobes.

    Every sample with ``|e| > tau`` (restricted to ``mask``) marks its lobe,
    the stretch between the surrounding zero crossings of the error or band
    edges. A lobe gets the amplitude weight ``|e_peak / tau|^((p - 2) / 2)``,
    ``e_peak`` being the largest error inside it; all other samples get 1.
    """
    r = np.asarray(residual)
    a = np.abs(r)
    labels = np.asarray(labels, dtype=object)
    mask = np.ones(a.size, bool) if mask is None else np.asarray(mask, bool)
    w = np.ones(a.size)
    violating = (a > tau) & mask
    if not np.any(violating):
        return w
    brk = _lobe_breaks(r)
    brk[1:] |= labels[1:] != labels[:-1]
    lobe_id = np.cumsum(brk)
    for lid in np.unique(lobe_id[violating]):
        lobe = (lobe_id == lid) & mask
        peak = a[lobe].max()
        w[lobe] = (peak / tau) ** ((p - 2) / 2)
    return w


def _band_runs(labels) -> list:
    labels = np.asarray(labels, dtype=object)
    out = []
    for lab in (PASS, STOP):
        for s, e in _segments(labels == lab):
            out.append((lab, s, e))
    return out


def detect_induced_band(residual, labels, tau: float | None = None):
    """Samples that carry constraints in an induced-band design.

    For each band, the ripple adjacent to the transition (from the band edge
    to the first interior zero crossing of the error) is excluded, and among
    the remaining samples only those not exceeding the largest remaining
    ripple peak are kept. ``tau`` is accepted for interface symmetry; the
    mask does not depend on it.

    Returns
    -------
    mask : ndarray of bool
    edges : dict
        Index of the first eligible sample on each side of the transition,
        keyed by band label (``None`` when a band is fully excluded).
    """
    r = np.asarray(residual)
    a = np.abs(r)
    labels = np.asarray(labels, dtype=object)
    mask = np.zeros(a.size, dtype=bool)
    edges: dict = {}
    if not np.any(a > 0):
        return mask, edges
    pass_idx = np.flatnonzero(labels == PASS)
    stop_idx = np.flatnonzero(labels == STOP)
    for lab, s, e in _band_runs(labels):
        seg = np.arange(s, e)
        # transition side: the end of the band facing the other band
        other = stop_idx if lab == PASS else pass_idx
        if other.size and other.min() >= e:
            toward_edge = seg[::-1]
        elif other.size and other.max() < s:
            toward_edge = seg
        else:
            toward_edge = seg[::-1]
        rr = r[toward_edge]
        if np.iscomplexobj(rr) and np.any(rr.imag != 0):
            aa = np.abs(rr)
            mins = np.flatnonzero((aa[1:-1] <= aa[:-2]) & (aa[1:-1] <= aa[2:])) + 1
            first = mins[0] if mins.size else rr.size
        else:
            sg = np.sign(np.real(rr))
            ch = np.flatnonzero(sg[1:] * sg[:-1] <= 0) + 1
            first = ch[0] if ch.size else rr.size
        rest = toward_edge[first:]
        if rest.size == 0:
            edges[lab] = None
            continue
        ar = a[rest]
        ordered = a[np.sort(rest)]
        inner = np.flatnonzero((ordered[1:-1] >= ordered[:-2]) & (ordered[1:-1] >= ordered[2:])) + 1
        peaks = list(ordered[inner])
        # band ends away from the transition count as ripple peaks too
        if ordered.size >= 2:
            if ordered[0] >= ordered[1]:
                peaks.append(ordered[0])
            if ordered[-1] >= ordered[-2]:
                peaks.append(ordered[-1])
        if peaks:
            keep = rest[ar <= max(peaks)]
        else:
            keep = rest
        mask[keep] = True
        edges[lab] = int(rest[0])
    return mask, edges


def build_step_desired(grid, omega_t: float, delay: float | None = None) -> DesiredResponse:
    """Ideal lowpass step at ``omega_t`` with no transition rows.

    Used for induced-band constrained designs.
    """
    w = grid.omegas
    if not 0 < omega_t < np.pi:
        raise ValueError("transition frequency must lie in (0, pi)")
    labels = np.where(w < omega_t, PASS, STOP).astype(object)
    samples = (labels == PASS).astype(complex)
    if delay is not None:
        samples = samples * np.exp(-1j * w * delay)
    return DesiredResponse(grid=grid, samples=samples, labels=labels,
                           magnitude_only=delay is None, delay=delay)


def design_cls(desired: DesiredResponse, N: int, kind: str = "I", spec: ClsSpec | None = None,
               config: IrlsConfig | None = None):
    """Constrained least-squares linear-phase design.

    Minimizes the l_2 error subject to ``|e(w)| <= tau`` on the constrained
    samples. Starting from the least-squares solution, violations are
    penalized by polynomial or envelope weights whose exponent follows the
    homotopy ``p_i = min(p, sigma p_{i-1})``; each weighted solve is blended
    in with ``lam = 1 / (p_i - 1)``. Iteration stops when the constraints
    hold within ``feasibility_slack``, or when the iterate stops moving or
    the iteration cap is hit (``constraint-infeasible``).

    Returns
    -------
    FirFilter, ConvergenceTrace, ConstraintReport
    """
    if spec is None:
        raise ValueError("a ClsSpec is required")
    config = config or IrlsConfig()
    K = linear_phase_kernel(desired.grid, N, kind)
    rows = desired.care
    C = K.matrix[rows]
    target = desired.amplitude(K.phase_offset)[rows]
    labels = desired.labels[rows]
    base = desired.weights[rows]
    omegas = desired.omegas[rows]
    weighting = spec.resolved_weighting
    fixed = spec.mode == "fixed-band"
    band_mask = (labels == PASS) | (labels == STOP)

    def constrained(r):
        if fixed:
            return band_mask, {}
        return detect_induced_band(r, labels, spec.tau)

    sol = solve_wls(C, target, base)
    x = sol.coefficients
    r = C @ x - target
    trace = ConvergenceTrace()
    trace.records.append(_make_record(0, 2.0, spec.sigma, 1.0, r, objective_error(r, 2.0),
                                      condition=sol.condition_estimate))
    p_i = 2.0
    w = np.ones(r.size)
    status = "constraint-infeasible"
    tol = spec.tau + spec.feasibility_slack
    for it in range(1, int(config.max_outer_iters) + 1):
        mask, _ = constrained(r)
        if not np.any(np.abs(r[mask]) > tol):
            status = "constraints-met"
            break
        p_i = min(spec.p, spec.sigma * p_i)
        if weighting == "polynomial":
            amp = np.where(mask, cls_poly_weights(r, spec.tau, p_i), 1.0)
        else:
            amp = cls_envelope_weights(r, labels, spec.tau, p_i, mask)
        with np.errstate(over="ignore"):
            logw = 2 * np.log(amp)
        w = np.maximum(np.exp(logw - logw.max()), config.weight_floor)
        sol = solve_wls(C, target, base * w)
        lam = kahng_lambda(p_i)
        change = np.linalg.norm(sol.coefficients - x) / max(np.linalg.norm(x), 1e-300)
        merit = np.abs(r[mask]).max()
        damped = 0
        while True:
            x_new = partial_update(sol.coefficients, x, lam)
            r_new = C @ x_new - target
            mask_new, _ = constrained(r_new)
            if not np.any(mask_new) or np.abs(r_new[mask_new]).max() <= merit * (1 + 1e-12):
                break
            damped += 1
            if damped > MAX_SIGMA_RETRIES:
                break
            lam *= 0.5
        if damped > MAX_SIGMA_RETRIES:
            # no step along the weighted solution lowers the worst error
            break
        x, r = x_new, r_new
        trace.records.append(_make_record(it, p_i, spec.sigma, lam, r, objective_error(r, 2.0),
                                          condition=sol.condition_estimate,
                                          retries=damped, flags="damped" if damped else ""))
        if p_i >= spec.p and change < config.coeff_tol:
            mask, _ = constrained(r)
            if not np.any(np.abs(r[mask]) > tol):
                status = "constraints-met"
            break
    else:
        mask, _ = constrained(r)
        if not np.any(np.abs(r[mask]) > tol):
            status = "constraints-met"
    trace.status = status
    trace.final_weights = w
    trace.final_p = p_i

    mask, edge_idx = constrained(r)
    max_err, met = {}, {}
    for lab in (PASS, STOP):
        sel = mask & (labels == lab)
        if np.any(sel):
            m = float(np.abs(r[sel]).max())
            max_err[lab] = m
            met[lab] = m <= tol
    induced = None
    if not fixed:
        pe = edge_idx.get(PASS)
        se = edge_idx.get(STOP)
        induced = (float(omegas[pe]) if pe is not None else math.nan,
                   float(omegas[se]) if se is not None else math.nan)
    report = ConstraintReport(status=status, tau=spec.tau, max_error=max_err, met=met,
                              induced_edges=induced)
    h = amplitude_to_impulse(x, kind, N)
    record = {"strategy": f"cls-{weighting}", "p_des": spec.p, "tau": spec.tau, "mode": spec.mode}
    return FirFilter(h, kind, record), trace, report


# ---------------------------------------------------------------------------
# magnitude design and spectral factorization


class FactorizationError(ValueError):
    """Spectral factorization failed; ``roots`` holds the offending roots."""

    def __init__(self, message: str, roots=None):
        super().__init__(message)
        self.roots = np.asarray([] if roots is None else roots)


CIRCLE_TOL = 1e-7
PSD_TOL = 1e-8


def _psd_min(r, n_check: int = 4096) -> float:
    w = np.linspace(0, np.pi, n_check)
    return float(np.min(psd_kernel(w, len(r)) @ r))


def spectral_factorize(r, n_check: int = 4096) -> np.ndarray:
    """Minimum-phase ``h`` with autocorrelation ``r``.

    Roots of the Laurent polynomial ``sum_k r_|k| z^k`` come in pairs
    ``(z, 1/conj(z))``; the ones inside the unit circle are kept. Roots
    within ``1e-7`` of the circle are double and are split evenly by pairing
    neighbours in angle. The result is scaled so that ``sum h^2 = r(0)``.

    Raises
    ------
    ValueError
        If ``R(w)`` is negative beyond ``-1e-8 r(0)`` (lift it first).
    FactorizationError
        If the roots cannot be paired.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise ValueError("autocorrelation must be a nonempty 1-D vector")
    if not r[0] > 0:
        raise ValueError("r(0) must be positive")
    if _psd_min(r, n_check) < -PSD_TOL * r[0]:
        raise ValueError("R(w) is negative somewhere; lift r(0) before factorizing")
    nz = np.flatnonzero(np.abs(r) > 1e-14 * r[0])
    n_eff = int(nz[-1]) + 1
    h = np.zeros(r.size)
    if n_eff == 1:
        h[0] = math.sqrt(r[0])
        return h
    re = r[:n_eff]
    coeffs = np.concatenate([re[:0:-1], re])
    roots = np.roots(coeffs)
    mod = np.abs(roots)
    inside = roots[mod < 1 - CIRCLE_TOL]
    circle = roots[np.abs(mod - 1) <= CIRCLE_TOL]
    if circle.size % 2:
        raise FactorizationError("odd number of roots on the unit circle", circle)
    if circle.size:
        circle = circle[np.argsort(np.angle(circle))]
        a, b = circle[0::2], circle[1::2]
        if np.any(np.abs(a - b) > 1e-3):
            raise FactorizationError("unit-circle roots do not pair up", circle)
        half = (a + b) / 2
        half = half / np.abs(half)
        inside = np.concatenate([inside, half])
    if inside.size != n_eff - 1:
        raise FactorizationError(
            f"expected {n_eff - 1} roots inside the unit circle, found {inside.size}", roots
        )
    g = np.real(np.poly(inside))
    g *= math.sqrt(r[0] / np.sum(g * g))
    h[:n_eff] = _refine_factor(g, re)
    return h


def _refine_factor(g: np.ndarray, r: np.ndarray, iters: int = 8) -> np.ndarray:
    """Newton steps on ``autocorrelation(g) = r``, kept only while they help.

    Root finding loses accuracy when many roots crowd the unit circle; the
    Jacobian ``J[n, k] = g[k + n] + g[k - n]`` is nonsingular at a strictly
    minimum-phase factor, so a few steps restore full precision.
    """
    n = g.size
    idx = np.arange(n)
    best, best_res = g, np.linalg.norm(autocorrelation(g) - r)
    for _ in range(iters):
        if best_res == 0:
            break
        plus = idx[None, :] + idx[:, None]
        minus = idx[None, :] - idx[:, None]
        J = (np.where(plus < n, best[np.minimum(plus, n - 1)], 0.0)
             + np.where(minus >= 0, best[np.maximum(minus, 0)], 0.0))
        step = np.linalg.lstsq(J, autocorrelation(best) - r, rcond=None)[0]
        trial = best - step
        res = np.linalg.norm(autocorrelation(trial) - r)
        if not res < best_res:
            break
        best, best_res = trial, res
    return best


def design_magnitude_fir(desired: DesiredResponse, N: int, strategy=None,
                         config: IrlsConfig | None = None, lift_eps: float = 1e-8):
    """Minimum-phase FIR whose magnitude approximates ``|D|``.

    The power response ``R(w) = |H(w)|^2`` is linear in the autocorrelation
    ``r``, so ``R`` is fitted to ``|D|^2`` with the IRLS engine. ``r(0)`` is
    then raised by ``max(0, -min R) + lift_eps r(0)`` to make ``R``
    nonnegative and ``h`` is obtained by spectral factorization.
    """
    strategy = strategy or AdaptiveBBS()
    config = config or IrlsConfig()
    rows = desired.care
    C = psd_kernel(desired.grid, N)[rows]
    target = np.abs(desired.samples[rows]) ** 2
    problem = DesignMatrixProblem(C, target, desired.weights[rows])
    r, trace = run_irls(problem, strategy, config)
    r = np.array(r, dtype=float)
    lift = max(0.0, -_psd_min(r)) + lift_eps * abs(r[0])
    r[0] += lift
    h = spectral_factorize(r)
    record = _strategy_record(strategy, config)
    record["lift"] = lift
    return FirFilter(h, "minimum-phase", record), trace
