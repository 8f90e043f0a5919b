"""Iteratively reweighted least squares for l_p approximation.

The engine minimizes ``sum_k v_k |r_k(x)|^p`` (``v`` are fixed base weights)
by a sequence of weighted l_2 solves. Strategies differ in how the weights
are formed, whether ``p`` is ramped up from 2 (homotopy), and how much of
each candidate solution is accepted (partial updating).

Weights are always in the convention of :func:`lpfilter.linalg.solve_wls`:
they multiply squared residuals, so the basic l_p weight is
``|r|^(p - 2)``.

Problems plug into :func:`run_irls` through :class:`IrlsProblem`; the linear
FIR case is :class:`DesignMatrixProblem`, and the IIR designs supply a
rational problem whose weighted solve is a quasilinearization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import logsumexp

from .linalg import solve_wls

__all__ = [
    "INFINITY_PROXY",
    "MAX_SIGMA_RETRIES",
    "Basic",
    "RUL",
    "Karlovitz",
    "Kahng",
    "BBS",
    "AdaptiveBBS",
    "FreqVarying",
    "FREQ_OBJECTIVES",
    "exponent_groups",
    "band_norm_error",
    "weight_update_band_norm",
    "ClsPoly",
    "ClsEnvelope",
    "STRATEGY_NAMES",
    "make_strategy",
    "IrlsConfig",
    "IterationRecord",
    "ConvergenceTrace",
    "IrlsProblem",
    "DesignMatrixProblem",
    "IrlsError",
    "p_schedule_next",
    "kahng_lambda",
    "partial_update",
    "weight_update_basic",
    "weight_update_rul",
    "sigma_candidates",
    "adaptive_sigma_step",
    "lp_error",
    "metric_error",
    "objective_error",
    "run_irls",
    "fixed_point_gap",
]

INFINITY_PROXY = 128.0
STALL_COEFF_FACTOR = 10.0
MAX_SIGMA_RETRIES = 32
SIGMA_MAX = 2.0
SIGMA_MIN = 1.0 + 1e-6
ERROR_SLACK = 1e-12


# ---------------------------------------------------------------------------
# strategies


def _check_sigma(sigma: float, name: str = "sigma") -> None:
    if not 1.0 < sigma <= SIGMA_MAX:
        raise ValueError(f"{name} must lie in (1, 2], got {sigma}")


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


@dataclass(frozen=True)
class Basic:
    """Plain reweighting ``w = |r|^(p-2)`` with full updates.

    Frequently fails to converge for ``p`` much above 3; kept for comparison.
    """

    name = "basic"


@dataclass(frozen=True)
class RUL:
    """Multiplicative weight update with exponent ``gamma``.

    ``u_i = u_{i-1}^alpha |r|^(alpha / (2 gamma))`` with
    ``alpha = gamma (p - 2) / (gamma (p - 2) + 1)``; ``u`` is an amplitude
    weight, so the least-squares weight is ``u**2``.
    """

    gamma: float = 1.0
    name = "rul"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class Karlovitz:
    """Basic weights with a constant partial step ``lam``."""

    lam: float = 0.5
    name = "karlovitz"

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")


@dataclass(frozen=True)
class Kahng:
    """Basic weights with the Newton step ``lam = 1 / (p - 1)``."""

    name = "kahng"


@dataclass(frozen=True)
class BBS:
    """Kahng's update with the homotopy ``p_i = min(p_des, sigma p_{i-1})``."""

    sigma: float = 1.5
    name = "bbs"

    def __post_init__(self):
        _check_sigma(self.sigma)


@dataclass(frozen=True)
class AdaptiveBBS:
    """Homotopy whose ratio ``sigma`` is adjusted after an error increase.

    A candidate that raises the l_p error is discarded; ``sigma (1 - delta)``
    and ``sigma (1 + delta)`` are tried and the one with the smaller error
    becomes the new ratio.
    """

    sigma0: float = 1.5
    delta: float = 0.1
    name = "adaptive-bbs"

    def __post_init__(self):
        _check_sigma(self.sigma0, "sigma0")
        _check_delta(self.delta)


FREQ_OBJECTIVES = ("metric", "band-norm")


@dataclass(frozen=True)
class FreqVarying:
    """Per-sample exponents ``p(w)``; homotopy applied sample by sample.

    With ``adaptive`` set, the ratio is controlled as in :class:`AdaptiveBBS`.

    ``objective="metric"`` minimizes ``sum_k |r_k|^p_k`` with weights
    ``|r_k|^(p_k - 2)``. Since ``|r|^p`` vanishes quickly for ``|r| < 1``,
    large exponents then carry almost no weight. ``objective="band-norm"``
    minimizes ``sum_g ||r_g||_{p_g}`` instead, where ``g`` runs over the
    groups of samples sharing a target exponent and each norm is a mean over
    its group, ``(sum_k v_k |r_k|^p / sum_k v_k)^(1/p)``, so that bands of
    different sizes compare on the same footing.
    """

    p: Any
    sigma0: float = 1.5
    delta: float = 0.1
    adaptive: bool = True
    objective: str = "metric"
    name = "freq-varying"

    def __post_init__(self):
        p = np.array(self.p, dtype=float).ravel()
        p = np.where(np.isinf(p), INFINITY_PROXY, p)
        if p.size == 0 or np.any(p < 2) or np.any(np.isnan(p)):
            raise ValueError("per-sample exponents must all be >= 2")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        _check_sigma(self.sigma0, "sigma0")
        _check_delta(self.delta)
        if self.objective not in FREQ_OBJECTIVES:
            raise ValueError(f"objective must be one of {FREQ_OBJECTIVES}, got {self.objective!r}")


@dataclass(frozen=True)
class ClsPoly:
    """Constrained least squares with weights ``1 + |e / tau|^((p-2)/2)``."""

    tau: float
    p: float = 50.0
    sigma: float = 1.5
    name = "cls-poly"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.p > 2:
            raise ValueError(f"p must exceed 2, got {self.p}")
        _check_sigma(self.sigma)


@dataclass(frozen=True)
class ClsEnvelope:
    """Constrained least squares with flat weights over violating intervals."""

    tau: float
    p: float = 50.0
    sigma: float = 1.5
    name = "cls-envelope"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.p > 2:
            raise ValueError(f"p must exceed 2, got {self.p}")
        _check_sigma(self.sigma)


_HOMOTOPY = (BBS, AdaptiveBBS, FreqVarying)

STRATEGY_NAMES = ("basic", "rul", "karlovitz", "kahng", "bbs", "adaptive-bbs")


def make_strategy(name: str, *, sigma: float | None = None, delta: float | None = None,
                  gamma: float | None = None, lam: float | None = None):
    """Build an unconstrained strategy from its name and optional parameters.

    Parameters that do not apply to the named strategy are ignored; missing
    ones take the strategy defaults. ``sigma`` is ``sigma0`` for the adaptive
    strategy.

    Examples
    --------
    >>> make_strategy("bbs", sigma=1.7)
    BBS(sigma=1.7)
    """
    kw = {}
    if name == "basic":
        return Basic()
    if name == "kahng":
        return Kahng()
    if name == "rul":
        if gamma is not None:
            kw["gamma"] = gamma
        return RUL(**kw)
    if name == "karlovitz":
        if lam is not None:
            kw["lam"] = lam
        return Karlovitz(**kw)
    if name == "bbs":
        if sigma is not None:
            kw["sigma"] = sigma
        return BBS(**kw)
    if name == "adaptive-bbs":
        if sigma is not None:
            kw["sigma0"] = sigma
        if delta is not None:
            kw["delta"] = delta
        return AdaptiveBBS(**kw)
    raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")


@dataclass(frozen=True)
class IrlsConfig:
    """Target exponent and stopping rules.

    Parameters
    ----------
    p_des : float or "inf"
        Target exponent, ``>= 2``. Infinity maps to ``inf_proxy``.
    max_outer_iters : int
    coeff_tol : float
        Relative distance between the current coefficients and the weighted
        solve they induce; combined with ``p == p_des`` to declare convergence.
    error_tol : float
        Relative change of the l_p error at ``p_des``.
    weight_floor : float
        Smallest weight relative to the largest.
    normalize_weights : bool
        Scale weights so the largest is 1 before each solve.
    inf_proxy : float
    """

    p_des: float | str = 2.0
    max_outer_iters: int = 200
    coeff_tol: float = 1e-8
    error_tol: float = 1e-10
    weight_floor: float = 1e-14
    normalize_weights: bool = True
    inf_proxy: float = INFINITY_PROXY

    def __post_init__(self):
        p = self.p_des
        if isinstance(p, str):
            if p.strip().lower() not in ("inf", "infinity"):
                raise ValueError(f"p_des must be a number or 'inf', got {p!r}")
            p = math.inf
        p = float(p)
        if math.isinf(p):
            p = float(self.inf_proxy)
        if math.isnan(p) or p < 2:
            raise ValueError(f"p_des must be >= 2, got {self.p_des}")
        object.__setattr__(self, "p_des", p)
        if int(self.max_outer_iters) < 1:
            raise ValueError("max_outer_iters must be at least 1")
        for name in ("coeff_tol", "error_tol", "weight_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# building blocks


def p_schedule_next(p_prev, p_des, sigma: float):
    """Next homotopy exponent ``min(p_des, sigma * p_prev)`` (elementwise)."""
    if np.ndim(p_prev) or np.ndim(p_des):
        return np.minimum(p_des, sigma * np.asarray(p_prev, dtype=float))
    return min(float(p_des), sigma * float(p_prev))


def kahng_lambda(p: float) -> float:
    """Newton partial step ``1 / (p - 1)``."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return 1.0 / (p - 1.0)


def partial_update(h_hat, h_prev, lam: float) -> np.ndarray:
    """Convex blend ``lam * h_hat + (1 - lam) * h_prev``."""
    h_hat = np.asarray(h_hat)
    h_prev = np.asarray(h_prev)
    if h_hat.shape != h_prev.shape:
        raise ValueError(f"shape mismatch {h_hat.shape} vs {h_prev.shape}")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    if lam == 1.0:
        return h_hat.copy()
    return lam * h_hat + (1.0 - lam) * h_prev


def _finish_weights(logw: np.ndarray, weight_floor: float, normalize: bool) -> np.ndarray:
    top = np.max(logw)
    if not np.isfinite(top):
        return np.ones_like(logw)
    if normalize:
        logw = logw - top
    w = np.exp(logw)
    if not normalize and np.all(w <= weight_floor):
        return np.ones_like(w)
    return np.maximum(w, weight_floor)


def _log_abs(residual) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(np.asarray(residual)))


def weight_update_basic(residual, p, weight_floor: float = 1e-14, normalize: bool = True):
    """Least-squares weights ``|r|^(p - 2)`` for an l_p objective.

    Computed in the log domain and scaled so the largest weight is 1, then
    clamped from below by ``weight_floor``. ``p`` may be a per-sample array.
    When every residual is zero the weights are flat.

    Examples
    --------
    >>> weight_update_basic([1.0, 2.0], 4.0)
    array([0.25, 1.  ])
    """
    lr = _log_abs(residual)
    e = np.broadcast_to(np.asarray(p, dtype=float) - 2.0, lr.shape)
    if np.any(e < 0):
        raise ValueError("exponents must be >= 2")
    with np.errstate(invalid="ignore"):
        logw = np.where(e == 0, 0.0, e * lr)
    return _finish_weights(logw, weight_floor, normalize)


def rul_alpha(p: float, gamma: float) -> float:
    """``gamma (p - 2) / (gamma (p - 2) + 1)``."""
    g = gamma * (p - 2.0)
    return g / (g + 1.0)


def weight_update_rul(w_prev, residual, p: float, gamma: float,
                      weight_floor: float = 1e-14, normalize: bool = True):
    """Multiplicative amplitude-weight update.

    Returns ``u = w_prev^alpha |r|^(alpha / (2 gamma))``; square it to get
    least-squares weights.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not p > 2:
        raise ValueError("p must exceed 2")
    w_prev = np.asarray(w_prev, dtype=float)
    if np.any(w_prev <= 0):
        raise ValueError("previous weights must be positive")
    alpha = rul_alpha(p, gamma)
    logw = alpha * np.log(w_prev) + (alpha / (2 * gamma)) * _log_abs(residual)
    return _finish_weights(logw, weight_floor, normalize)


def sigma_candidates(sigma: float, delta: float) -> tuple[float, float]:
    """Lower and upper trial ratios ``sigma (1 -+ delta)``.

    A trial that would leave ``[SIGMA_MIN, SIGMA_MAX]`` is replaced by
    ``sigma`` itself, so every ratio a run visits keeps the form
    ``sigma0 (1 - delta)^m (1 + delta)^k``.

    Examples
    --------
    >>> sigma_candidates(1.9, 0.1)
    (1.71, 1.9)
    """
    _check_delta(delta)
    low, high = sigma * (1 - delta), sigma * (1 + delta)
    return (low if low >= SIGMA_MIN else sigma), (high if high <= SIGMA_MAX else sigma)


def adaptive_sigma_step(sigma: float, delta: float, try_error_low: float,
                        try_error_high: float) -> float:
    """Pick the trial ratio with the smaller error; ties go to the lower one.

    Examples
    --------
    >>> adaptive_sigma_step(1.75, 0.1, 1.0, 2.0)
    1.575
    """
    low, high = sigma_candidates(sigma, delta)
    return low if try_error_low <= try_error_high else high


def lp_error(residual, p, weights=None) -> float:
    """``(sum_k v_k |r_k|^p)^(1/p)`` with the largest residual factored out.

    ``p = inf`` gives ``max |r|`` over positively weighted samples.
    """
    a = np.abs(np.asarray(residual))
    if weights is not None:
        v = np.asarray(weights, dtype=float)
        a = a[v > 0]
        v = v[v > 0]
    else:
        v = np.ones_like(a)
    if a.size == 0:
        return 0.0
    m = a.max()
    if m == 0:
        return 0.0
    p = float(p)
    if math.isinf(p):
        return float(m)
    return float(m * np.sum(v * (a / m) ** p) ** (1.0 / p))


def metric_error(residual, p) -> float:
    """Rootless sum ``sum_k |r_k|^p_k`` for per-sample exponents."""
    a = np.abs(np.asarray(residual))
    p = np.broadcast_to(np.asarray(p, dtype=float), a.shape)
    return float(np.sum(a ** p))


def objective_error(residual, p, weights=None) -> float:
    """Scalar used for error comparisons.

    Equals :func:`lp_error` for a uniform exponent; for per-sample exponents
    it is ``metric_error ** (1 / max p)``, a monotone transform of the metric.
    Computed in the log domain to survive large exponents.
    """
    lr = _log_abs(residual)
    p = np.broadcast_to(np.asarray(p, dtype=float), lr.shape)
    v = np.ones_like(lr) if weights is None else np.asarray(weights, dtype=float)
    keep = (v > 0) & np.isfinite(lr)
    if not np.any(keep):
        return 0.0
    s = logsumexp(p[keep] * lr[keep] + np.log(v[keep]))
    return float(np.exp(s / p.max()))


def exponent_groups(p) -> np.ndarray:
    """Group index per sample; samples sharing an exponent share a group."""
    return np.unique(np.asarray(p, dtype=float), return_inverse=True)[1].ravel()


def band_norm_error(residual, p, groups, weights=None) -> float:
    """``sum_g ||r_g||_{p_g}`` over exponent groups.

    Each group norm is weighted-mean normalized,
    ``(sum_k v_k |r_k|^p / sum_k v_k)^(1/p)``.

    Examples
    --------
    >>> band_norm_error([1.0, 7.0, 2.0], [2.0, 2.0, 4.0], [0, 0, 1])
    7.0
    """
    r = np.asarray(residual)
    p = np.broadcast_to(np.asarray(p, dtype=float), r.shape)
    groups = np.asarray(groups)
    v = np.ones(r.shape) if weights is None else np.asarray(weights, dtype=float)
    total = 0.0
    for g in np.unique(groups):
        m = groups == g
        total += lp_error(r[m], float(p[m].max()), v[m] / v[m].sum())
    return float(total)


def weight_update_band_norm(residual, p, groups, weights=None, weight_floor: float = 1e-14,
                            normalize: bool = True) -> np.ndarray:
    """IRLS weights for :func:`band_norm_error`.

    ``|r_k|^(p_g - 2) / (V_g ||r_g||_{p_g}^(p_g - 1))`` with ``V_g`` the total
    base weight of the group, computed in the log domain and finished like
    :func:`weight_update_basic`. ``weights`` are the base weights inside the
    group norms.
    """
    r = np.asarray(residual)
    lr = _log_abs(r)
    p = np.broadcast_to(np.asarray(p, dtype=float), lr.shape)
    if np.any(p < 2):
        raise ValueError("exponents must be >= 2")
    groups = np.asarray(groups)
    v = np.ones(r.shape) if weights is None else np.asarray(weights, dtype=float)
    with np.errstate(invalid="ignore"):
        logw = np.where(p == 2, 0.0, (p - 2) * lr)
    for g in np.unique(groups):
        m = groups == g
        pg = float(p[m].max())
        norm = lp_error(r[m], pg, v[m] / v[m].sum())
        if norm > 0:
            logw[m] -= (pg - 1) * math.log(norm) + math.log(v[m].sum())
    return _finish_weights(logw, weight_floor, normalize)


# ---------------------------------------------------------------------------
# problems


class IrlsProblem:
    """Interface between the IRLS engine and a specific approximation problem.

    Subclasses provide ``base_weights`` and the methods below. Coefficients
    are real or complex vectors; residuals are per design row.
    """

    base_weights: np.ndarray
    # True when ``solve`` depends on the current iterate (nonlinear problems)
    iterative_solve: bool = False

    def initial(self) -> np.ndarray:
        """Unweighted (base-weighted) least-squares starting point."""
        raise NotImplementedError

    def residual(self, x) -> np.ndarray:
        raise NotImplementedError

    def solve(self, weights, x) -> np.ndarray:
        """Candidate minimizing ``sum base * weights * |r|^2``, given ``x``."""
        raise NotImplementedError

    def project(self, x) -> np.ndarray:
        """Map coefficients onto the admissible set (identity by default)."""
        return x

    def diagnostics(self) -> dict:
        """Extra per-solve quantities recorded in the trace."""
        return {}


class DesignMatrixProblem(IrlsProblem):
    """Linear problem ``C x ~ D`` with base weights ``w``.

    Parameters
    ----------
    C : array_like, shape (L, n)
    D : array_like, shape (L,)
    w : array_like, shape (L,), optional
    real_coefficients : bool
        Keep ``x`` real even when ``C`` or ``D`` is complex.
    """

    def __init__(self, C, D, w=None, real_coefficients: bool = False):
        self.C = np.asarray(C)
        self.D = np.asarray(D)
        L = self.C.shape[0]
        self.base_weights = np.ones(L) if w is None else np.asarray(w, dtype=float)
        self.real_coefficients = bool(real_coefficients)
        self._last_condition = math.nan
        if self.D.shape != (L,) or self.base_weights.shape != (L,):
            raise ValueError("C, D and w must have matching row counts")

    def _solve(self, w):
        sol = solve_wls(self.C, self.D, w, real_coefficients=self.real_coefficients)
        self._last_condition = sol.condition_estimate
        return sol.coefficients

    def initial(self):
        return self._solve(self.base_weights)

    def residual(self, x):
        return self.C @ x - self.D

    def solve(self, weights, x):
        return self._solve(self.base_weights * weights)

    def diagnostics(self):
        return {"condition": self._last_condition}


# ---------------------------------------------------------------------------
# trace


@dataclass(frozen=True)
class IterationRecord:
    """One accepted iteration.

    ``p`` is the largest exponent in use; ``lp_error`` is measured at that
    exponent (per sample for frequency-varying designs).
    """

    iteration: int
    p: float
    sigma: float
    lam: float
    lp_error: float
    l2_error: float
    max_error: float
    adapted: bool = False
    retries: int = 0
    condition: float = math.nan
    inner_iterations: int = 0
    flags: str = ""


@dataclass
class ConvergenceTrace:
    """Per-iteration records plus the terminal status.

    ``status`` is one of ``converged``, ``max-iters``,
    ``error-increase-unrecoverable`` (engine) or, for constrained designs,
    ``constraints-met`` and ``constraint-infeasible``.
    """

    records: list = field(default_factory=list)
    status: str = "running"
    final_weights: np.ndarray | None = None
    final_p: Any = None

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def iterations(self) -> int:
        return len(self.records) - 1 if self.records else 0


class IrlsError(RuntimeError):
    """Failure inside the engine; carries the partial trace."""

    def __init__(self, message: str, trace: ConvergenceTrace):
        super().__init__(message)
        self.trace = trace


def _make_record(iteration, p, sigma, lam, r, err, **kw) -> IterationRecord:
    a = np.abs(r)
    return IterationRecord(
        iteration=iteration,
        p=float(np.max(p)),
        sigma=float(sigma),
        lam=float(lam),
        lp_error=float(err),
        l2_error=float(np.sqrt(np.sum(a * a))),
        max_error=float(a.max()) if a.size else 0.0,
        **kw,
    )


def _rel_change(new, old) -> float:
    scale = np.linalg.norm(old)
    diff = np.linalg.norm(np.asarray(new) - np.asarray(old))
    if scale == 0:
        return 0.0 if diff == 0 else math.inf
    return float(diff / scale)


# ---------------------------------------------------------------------------
# engine


@dataclass
class _Candidate:
    x: np.ndarray
    x_hat: np.ndarray
    residual: np.ndarray
    error: float
    weights: np.ndarray
    lam: float
    p: Any
    amp: np.ndarray | None
    diag: dict


def _strategy_lambda(strategy, p) -> float:
    pmax = float(np.max(p))
    if isinstance(strategy, (Basic, RUL)):
        return 1.0
    if isinstance(strategy, Karlovitz):
        return strategy.lam
    return kahng_lambda(pmax) if pmax > 2 else 1.0


def _sigma0(strategy) -> float:
    if isinstance(strategy, BBS):
        return strategy.sigma
    if isinstance(strategy, (AdaptiveBBS, FreqVarying)):
        return strategy.sigma0
    return math.nan


def _is_adaptive(strategy) -> bool:
    return isinstance(strategy, AdaptiveBBS) or (
        isinstance(strategy, FreqVarying) and strategy.adaptive
    )


def resolve_p(strategy, config: IrlsConfig, n_rows: int) -> np.ndarray:
    """Target exponent per design row."""
    if isinstance(strategy, FreqVarying):
        p = np.asarray(strategy.p, dtype=float)
        if p.size == 1:
            p = np.full(n_rows, float(p[0]))
        if p.shape != (n_rows,):
            raise ValueError(
                f"per-sample exponents have length {p.size}, expected {n_rows}"
            )
        return p
    return np.full(n_rows, float(config.p_des))


def run_irls(problem: IrlsProblem, strategy=None, config: IrlsConfig | None = None):
    """Minimize an l_p objective by iteratively reweighted least squares.

    Parameters
    ----------
    problem : IrlsProblem
    strategy : strategy instance, optional
        Defaults to ``AdaptiveBBS()``.
    config : IrlsConfig, optional
        Defaults to ``IrlsConfig()``, i.e. ``p_des = 2``.

    Returns
    -------
    coefficients : ndarray
    trace : ConvergenceTrace

    Notes
    -----
    Iteration 0 is the base-weighted least-squares solve. With ``p_des = 2``
    that solve is the answer, except for problems whose ``solve`` depends on
    the iterate (``iterative_solve``): these repeat the base-weighted solve
    until it stops moving the coefficients. Homotopy strategies
    start at ``p = min(p_des, 2 sigma)``. The error recorded for an
    iteration, and used by the adaptive strategies to accept or reject a
    candidate, is the l_p error at the exponent used in that iteration; a
    candidate is rejected when it is worse than the current iterate at that
    same exponent. Since l_p norms do not increase with ``p``, the recorded
    errors of an adaptive run never increase. Convergence requires every sample
    to have reached its target exponent and either the coefficients to be a
    fixed point of the weighted solve within ``coeff_tol``, or the l_p error
    to stall within ``error_tol`` while the weighted solve moves the
    coefficients by at most ``STALL_COEFF_FACTOR * coeff_tol``. Small partial
    steps barely change the error even far from the optimum, so a stalled
    error alone does not count as convergence.

    When an adaptive run sees its error increase after ``p`` has already
    reached the target, or once ``sigma`` cannot shrink any further, the
    partial step is halved instead (up to ``MAX_SIGMA_RETRIES`` times). If no
    halving decreases the error at the target the current point is optimal
    to working precision and the run is declared converged; below the target
    the run stops as ``error-increase-unrecoverable``. After a clean step
    below the target with ``sigma < 1 + delta`` the ratio is multiplied by
    ``1 + delta`` again, so every ratio stays of the form
    ``sigma0 (1 - delta)^m (1 + delta)^k``.
    """
    if strategy is None:
        strategy = AdaptiveBBS()
    if config is None:
        config = IrlsConfig()
    if isinstance(strategy, (ClsPoly, ClsEnvelope)):
        raise ValueError("constrained strategies are run by lpfilter.fir.design_cls")

    trace = ConvergenceTrace()
    try:
        x = problem.initial()
    except Exception as exc:  # attach the (empty) trace for callers
        exc.trace = trace
        raise
    r = problem.residual(x)
    base = problem.base_weights
    p_des = resolve_p(strategy, config, r.size)
    band_norm = isinstance(strategy, FreqVarying) and strategy.objective == "band-norm"
    groups = exponent_groups(p_des)

    def objective(res, p):
        if band_norm:
            return band_norm_error(res, p, groups, base)
        return objective_error(res, p, base)

    err = objective(r, 2.0)
    sigma = _sigma0(strategy)
    trace.records.append(
        _make_record(0, np.full(r.size, 2.0), sigma, 1.0, r, err, **problem.diagnostics())
    )
    ones = np.ones(r.size)
    if np.all(p_des == 2.0):
        trace.status = "converged"
        if problem.iterative_solve:
            # the base-weighted map itself must reach its fixed point
            trace.status = "max-iters"
            for it in range(1, int(config.max_outer_iters) + 1):
                x_hat = problem.solve(ones, x)
                if _rel_change(x_hat, x) < config.coeff_tol:
                    trace.status = "converged"
                    break
                x = problem.project(x_hat)
                r = problem.residual(x)
                err = objective(r, 2.0)
                trace.records.append(_make_record(it, np.full(r.size, 2.0), sigma, 1.0, r, err,
                                                  **problem.diagnostics()))
        trace.final_weights = ones
        trace.final_p = 2.0
        return x, trace

    homotopy = isinstance(strategy, _HOMOTOPY)
    adaptive = _is_adaptive(strategy)
    delta = getattr(strategy, "delta", None)
    floor = config.weight_floor
    norm = config.normalize_weights
    p_prev = np.full(r.size, 2.0)
    amp_prev = ones

    def candidate(p_cur, lam=None) -> _Candidate:
        amp = None
        if isinstance(strategy, RUL):
            amp = weight_update_rul(amp_prev, r, float(np.max(p_cur)), strategy.gamma, floor, norm)
            w = amp * amp
            if not norm:
                w = np.maximum(w, floor)
        elif band_norm:
            w = weight_update_band_norm(r, p_cur, groups, base, floor, norm)
        else:
            w = weight_update_basic(r, p_cur, floor, norm)
        x_hat = problem.solve(w, x)
        diag = problem.diagnostics()
        if lam is None:
            lam = _strategy_lambda(strategy, p_cur)
        x_new = problem.project(partial_update(x_hat, x, lam))
        r_new = problem.residual(x_new)
        return _Candidate(x_new, x_hat, r_new, objective(r_new, p_cur),
                          w, lam, p_cur, amp, diag)

    def increased(c: _Candidate) -> bool:
        return c.error > objective(r, c.p) * (1 + ERROR_SLACK)

    status = "max-iters"
    try:
        for it in range(1, int(config.max_outer_iters) + 1):
            p_cur = np.minimum(p_des, sigma * p_prev) if homotopy else p_des
            cand = candidate(p_cur)
            adapted = False
            retries = 0
            flags = []
            if adaptive and increased(cand):
                accepted = False
                if not np.all(p_prev >= p_des):
                    for retries in range(1, MAX_SIGMA_RETRIES + 1):
                        sigma_before = sigma
                        lo, hi = sigma_candidates(sigma, delta)
                        c_lo = candidate(np.minimum(p_des, lo * p_prev))
                        c_hi = candidate(np.minimum(p_des, hi * p_prev))
                        sigma = adaptive_sigma_step(sigma, delta, c_lo.error, c_hi.error)
                        cand = c_lo if sigma == lo else c_hi
                        if not increased(cand):
                            accepted = True
                            break
                        if lo == sigma_before:
                            break
                if not accepted:
                    # sigma cannot shrink any further: damp the step instead
                    p_cur = cand.p
                    lam = cand.lam
                    for k in range(1, MAX_SIGMA_RETRIES + 1):
                        lam *= 0.5
                        cand = candidate(p_cur, lam)
                        retries += 1
                        if not increased(cand):
                            accepted = True
                            flags.append("damped")
                            break
                if not accepted:
                    status = ("converged" if np.all(p_prev >= p_des)
                              else "error-increase-unrecoverable")
                    break
                adapted = True
            change = _rel_change(cand.x_hat, x)
            prev_err = err
            prev_at_target = bool(np.all(p_prev >= p_des))
            x, r, err = cand.x, cand.residual, cand.error
            if cand.amp is not None:
                amp_prev = cand.amp
            if isinstance(strategy, RUL) and np.any(cand.weights <= floor * (1 + 1e-12)):
                flags.append("floor")
            trace.final_weights = cand.weights
            at_target = bool(np.all(cand.p >= p_des))
            p_prev = np.asarray(cand.p, dtype=float)
            trace.records.append(
                _make_record(it, cand.p, sigma, cand.lam, r, err, adapted=adapted,
                             retries=retries, flags=";".join(flags), **cand.diag)
            )
            if adaptive and not adapted and not at_target and sigma < 1 + delta:
                # a ratio this close to 1 stalls the homotopy; regrow it
                sigma = sigma_candidates(sigma, delta)[1]
            if at_target and change < config.coeff_tol:
                status = "converged"
                break
            if (at_target and prev_at_target
                    and abs(prev_err - err) <= config.error_tol * prev_err
                    and change <= STALL_COEFF_FACTOR * config.coeff_tol):
                status = "converged"
                break
    except Exception as exc:
        trace.status = "failed"
        exc.trace = trace
        raise
    trace.status = status
    trace.final_p = float(np.max(p_prev)) if np.ptp(p_prev) == 0 else p_prev
    if trace.final_weights is None:
        trace.final_weights = ones
    return x, trace


def fixed_point_gap(problem: IrlsProblem, x, p=None, config: IrlsConfig | None = None,
                    weights=None) -> float:
    """Relative coefficient change produced by one more weighted solve.

    The weights are ``weights`` when given (for instance a trace's frozen
    ``final_weights``), else the l_p weights of the residual at ``x``; a true
    l_p optimum is a fixed point of this map.
    """
    config = config or IrlsConfig()
    if weights is not None:
        w = np.asarray(weights, dtype=float)
    else:
        if p is None:
            raise ValueError("give either an exponent or frozen weights")
        r = problem.residual(x)
        w = weight_update_basic(r, p, config.weight_floor, config.normalize_weights)
    x_hat = problem.solve(w, x)
    return _rel_change(x_hat, x)
