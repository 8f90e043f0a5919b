"""Weighted least-squares rational (IIR) approximation in frequency.

A filter is ``H = B / A`` with ``B(w) = sum_{n=0}^{M} b_n e^{-jwn}`` and
``A(w) = 1 + sum_{n=1}^{N} a_n e^{-jwn}``. The stacked unknown is
``h = [b_0..b_M, a_1..a_N]``, and two matrices drive every solver:

* ``F = [E_b, -D E_a]`` gives the equation error ``F h - D = B - D A``;
* ``G = [E_b, -H E_a]`` (``H`` the current response) is the Jacobian of
  ``A (H - D)``, so ``J = G / A`` is the Jacobian of the solution error
  ``s = H - D = (F h - D) / A``.

Real coefficients are enforced by solving on real and imaginary parts
together (equivalent to the conjugate-symmetric extension of the grid).
Pole reflection keeps every iterate stable without changing ``|H|``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import FrequencyGrid
from .linalg import solve_wls

__all__ = [
    "IirFilter",
    "QuasiTrace",
    "DivergenceWarning",
    "iir_freq_response",
    "full_circle_grid",
    "to_full_circle",
    "prony_freq_design",
    "equation_error_design",
    "rational_matrices",
    "solution_error",
    "solution_error_gradient",
    "jacobian",
    "jackson_design",
    "soewito_mode1",
    "soewito_mode2",
    "quasilinearize",
    "enforce_stability",
    "limit_pole_radius",
    "stabilize",
]

A_MIN = 1e-12
DIVERGENCE_RUN = 3


class DivergenceWarning(RuntimeWarning):
    """An iterative IIR solver stopped on repeated error growth."""


@dataclass(frozen=True)
class IirFilter:
    """Rational filter ``B(z) / A(z)`` with ``a[0] == 1``.

    A leading denominator coefficient other than 1 is divided out of both
    polynomials.
    """

    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.array(self.b, dtype=float))
        a = np.atleast_1d(np.array(self.a, dtype=float))
        if b.ndim != 1 or a.ndim != 1 or b.size < 1 or a.size < 1:
            raise ValueError("b and a must be nonempty 1-D vectors")
        if a[0] == 0:
            raise ValueError("a[0] must be nonzero")
        if a[0] != 1.0:
            b, a = b / a[0], a / a[0]
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("filter coefficients must be finite")
        a[0] = 1.0
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)

    @property
    def N(self) -> int:
        """Denominator order."""
        return self.a.size - 1

    @property
    def M(self) -> int:
        """Numerator order."""
        return self.b.size - 1

    @property
    def poles(self) -> np.ndarray:
        return np.roots(self.a) if self.N else np.zeros(0, complex)

    def stacked(self) -> np.ndarray:
        """``[b_0..b_M, a_1..a_N]``."""
        return np.concatenate([self.b, self.a[1:]])

    @classmethod
    def from_stacked(cls, h, N: int, M: int) -> "IirFilter":
        h = np.asarray(h, dtype=float)
        if h.size != N + M + 1:
            raise ValueError(f"stacked vector needs {N + M + 1} entries, got {h.size}")
        return cls(h[: M + 1], np.concatenate([[1.0], h[M + 1:]]))

    def response(self, grid) -> np.ndarray:
        return iir_freq_response(self, grid)


def _omegas(grid) -> np.ndarray:
    if isinstance(grid, FrequencyGrid):
        return grid.omegas
    return np.atleast_1d(np.asarray(grid, dtype=float))


def _expo(w: np.ndarray, start: int, stop: int) -> np.ndarray:
    return np.exp(-1j * np.outer(w, np.arange(start, stop)))


def _polyval(c: np.ndarray, w: np.ndarray) -> np.ndarray:
    return _expo(w, 0, c.size) @ c


def iir_freq_response(filt: IirFilter, grid) -> np.ndarray:
    """``B(w) / A(w)`` on the grid.

    Raises
    ------
    ValueError
        If ``|A(w_k)| < 1e-12`` at some sample.
    """
    w = _omegas(grid)
    A = _polyval(filt.a, w)
    small = np.abs(A) < A_MIN
    if np.any(small):
        raise ValueError(f"denominator vanishes at omega = {w[np.argmax(small)]:.17g}")
    return _polyval(filt.b, w) / A


def full_circle_grid(L: int) -> np.ndarray:
    """``L`` equally spaced frequencies ``2 pi k / L`` on ``[0, 2 pi)``."""
    return 2 * np.pi * np.arange(int(L)) / int(L)


def to_full_circle(omegas, D) -> np.ndarray:
    """Conjugate-symmetric full-circle samples from a half-circle response.

    ``omegas`` must be uniform on ``[0, pi]`` with both endpoints; the result
    has ``2 (L - 1)`` samples at ``2 pi k / (2 (L - 1))``. Non-uniform input
    is linearly interpolated onto such a grid first.
    """
    w = np.asarray(omegas, dtype=float)
    D = np.asarray(D, dtype=complex)
    L = w.size
    uniform = np.linspace(0, np.pi, L)
    if not np.allclose(w, uniform, rtol=0, atol=1e-12):
        D = np.interp(uniform, w, D.real) + 1j * np.interp(uniform, w, D.imag)
    half = D.copy()
    half[0] = half[0].real
    half[-1] = half[-1].real
    return np.concatenate([half, np.conj(half[-2:0:-1])])


def prony_freq_design(D, N: int, M: int) -> IirFilter:
    """Equation-error rational fit from full-circle DFT samples.

    ``h = IDFT(D)`` is arranged in the circulant matrix ``H``; the rows
    ``M+1 .. L-1`` (``H2``) must annihilate ``[1; a]``, which is solved in
    the least-squares sense, and ``b = H1 [1; a]`` from rows ``0 .. M``.
    With ``L = N + M + 1`` this interpolates the samples.

    Parameters
    ----------
    D : array_like
        Samples at ``2 pi k / L``, ``k = 0..L-1``, conjugate symmetric.
    N, M : int
        Denominator and numerator orders.

    Raises
    ------
    ValueError
        When ``L < N + M + 1``, the samples are not conjugate symmetric, or
        ``H2`` is rank deficient with an inconsistent right-hand side.
    """
    D = np.asarray(D, dtype=complex)
    L = D.size
    if N < 0 or M < 0:
        raise ValueError("orders must be nonnegative")
    if L < N + M + 1:
        raise ValueError(f"need at least N + M + 1 = {N + M + 1} samples, got {L}")
    h = np.fft.ifft(D)
    scale = max(np.abs(h).max(), 1e-300)
    if np.abs(h.imag).max() > 1e-8 * scale:
        raise ValueError("samples are not conjugate symmetric (impulse response not real)")
    h = h.real
    idx = (np.arange(L)[:, None] - np.arange(N + 1)[None, :]) % L
    Hc = h[idx]
    H1, H2 = Hc[: M + 1], Hc[M + 1:]
    if N == 0:
        return IirFilter(H1[:, 0], [1.0])
    A2, y = H2[:, 1:], -H2[:, 0]
    a_tail, _, rank, sv = np.linalg.lstsq(A2, y, rcond=None)
    if rank < N:
        resid = np.linalg.norm(A2 @ a_tail - y)
        if resid > 1e-10 * max(np.linalg.norm(y), scale):
            raise ValueError("Prony system is singular and inconsistent")
    a = np.concatenate([[1.0], a_tail])
    return IirFilter(H1 @ a, a)


def rational_matrices(D, omegas, N: int, M: int, filt: IirFilter | None = None):
    """Equation-error matrix ``F`` and, given a filter, ``G`` and ``H``.

    Returns
    -------
    F : ndarray, shape (L, M + N + 1)
    G : ndarray or None
    H : ndarray or None
        Current response ``B / A``.
    """
    w = _omegas(omegas)
    D = np.asarray(D, dtype=complex)
    Eb = _expo(w, 0, M + 1)
    Ea = _expo(w, 1, N + 1)
    F = np.hstack([Eb, -D[:, None] * Ea])
    if filt is None:
        return F, None, None
    H = iir_freq_response(filt, w)
    G = np.hstack([Eb, -H[:, None] * Ea])
    return F, G, H


def _weights(W_ext, L: int) -> np.ndarray:
    if W_ext is None:
        return np.ones(L)
    W = np.broadcast_to(np.asarray(W_ext, dtype=float), (L,)).copy()
    if np.any(W < 0) or not np.all(np.isfinite(W)):
        raise ValueError("external weights must be finite and nonnegative")
    return W


def solution_error(D, omegas, filt: IirFilter, W_ext=None) -> float:
    """``sum_k W_k |H(w_k) - D_k|^2``."""
    s = iir_freq_response(filt, omegas) - np.asarray(D)
    return float(np.sum(_weights(W_ext, s.size) * np.abs(s) ** 2))


def jacobian(D, omegas, filt: IirFilter) -> np.ndarray:
    """Jacobian ``J = G / A`` of ``s = H - D`` with respect to ``h``."""
    w = _omegas(omegas)
    _, G, _ = rational_matrices(D, w, filt.N, filt.M, filt)
    return G / _polyval(filt.a, w)[:, None]


def solution_error_gradient(D, omegas, filt: IirFilter, W_ext=None) -> np.ndarray:
    """Gradient of :func:`solution_error` over real ``h``: ``2 Re(J^H W s)``."""
    w = _omegas(omegas)
    s = iir_freq_response(filt, w) - np.asarray(D)
    J = jacobian(D, w, filt)
    return 2 * np.real(J.conj().T @ (_weights(W_ext, s.size) * s))


def equation_error_design(D, omegas, N: int, M: int, W_ext=None) -> IirFilter:
    """Minimize ``sum W |B - D A|^2`` (one linear solve)."""
    F, _, _ = rational_matrices(D, omegas, N, M)
    W = _weights(W_ext, F.shape[0])
    sol = solve_wls(F, np.asarray(D, dtype=complex), W, real_coefficients=True)
    return IirFilter.from_stacked(sol.coefficients, N, M)


@dataclass
class QuasiTrace:
    """Solution errors per iteration of an IIR solver (index 0 = start)."""

    errors: list = field(default_factory=list)
    iterations: int = 0
    diverged: bool = False
    converged: bool = False


class _Guard:
    """Tracks the best iterate and detects runs of error doublings."""

    def __init__(self, filt: IirFilter, err: float):
        self.best = filt
        self.best_err = err
        self.prev = err
        self.run = 0

    def update(self, filt: IirFilter, err: float) -> bool:
        if err < self.best_err:
            self.best, self.best_err = filt, err
        self.run = self.run + 1 if err > 2 * self.prev else 0
        self.prev = err
        return self.run >= DIVERGENCE_RUN


def _safe_error(D, w, filt, W) -> float:
    try:
        return solution_error(D, w, filt, W)
    except ValueError:
        return math.inf


def jackson_design(D, omegas, N: int, M: int, iters: int = 10, W_ext=None,
                   stabilize: bool = True, a_init=None) -> IirFilter:
    """Alternating numerator/denominator least squares.

    Starting from ``A_0 = 1``, each iteration solves
    ``b = argmin sum W |B / A_prev - D|^2`` and then
    ``a = argmin sum W |(D A - B) / A_prev|^2`` over the full ``a``, which is
    rescaled so that ``a_0 = 1``. ``iters = 0`` returns the equation-error
    seed instead. ``a_init`` replaces the starting denominator ``A_0 = 1``.

    Convergence from ``A_0 = 1`` is slow; exact rational data typically
    needs a few hundred iterations.
    """
    w = _omegas(omegas)
    D = np.asarray(D, dtype=complex)
    W = _weights(W_ext, w.size)
    if iters <= 0:
        return equation_error_design(D, w, N, M, W)
    Eb = _expo(w, 0, M + 1)
    Ea = _expo(w, 0, N + 1)
    if a_init is None:
        A_prev = np.ones(w.size, dtype=complex)
    else:
        A_prev = _polyval(IirFilter([1.0], a_init).a, w)
    guard = None
    filt = None
    for _ in range(int(iters)):
        inv = 1.0 / A_prev
        b = solve_wls(Eb * inv[:, None], D, W, real_coefficients=True).coefficients
        Bv = Eb @ b
        if N == 0:
            filt = IirFilter(b, [1.0])
        else:
            rows = (D * inv)[:, None] * Ea
            a = solve_wls(rows, Bv * inv, W, real_coefficients=True).coefficients
            if a[0] == 0:
                raise ValueError("denominator solve returned a[0] = 0")
            filt = IirFilter(b, a)
        if stabilize:
            filt = enforce_stability(filt)
        err = _safe_error(D, w, filt, W)
        if guard is None:
            guard = _Guard(filt, err)
        elif guard.update(filt, err):
            warnings.warn("Jackson iteration diverging; returning best iterate",
                          DivergenceWarning, stacklevel=2)
            return guard.best
        A_prev = _polyval(filt.a, w)
    return filt


def _iterate_soewito(D, omegas, N, M, W_ext, iters, h_init, mode, stabilize):
    w = _omegas(omegas)
    D = np.asarray(D, dtype=complex)
    W = _weights(W_ext, w.size)
    filt = h_init if h_init is not None else IirFilter(np.zeros(M + 1), np.r_[1.0, np.zeros(N)])
    A = _polyval(filt.a, w) if h_init is not None else np.ones(w.size, dtype=complex)
    guard = _Guard(filt, _safe_error(D, w, filt, W) if h_init is not None else math.inf)
    for _ in range(int(iters)):
        V = W / np.abs(A) ** 2
        F, G, _ = rational_matrices(D, w, N, M, filt if mode == 2 else None)
        if mode == 1:
            h = solve_wls(F, D, V, real_coefficients=True).coefficients
        else:
            lhs = np.real(G.conj().T @ (V[:, None] * F))
            rhs = np.real(G.conj().T @ (V * D))
            h = np.linalg.solve(lhs, rhs)
        filt = IirFilter.from_stacked(h, N, M)
        if stabilize:
            filt = enforce_stability(filt)
        if guard.update(filt, _safe_error(D, w, filt, W)):
            warnings.warn("iteration diverging; returning best iterate",
                          DivergenceWarning, stacklevel=3)
            return guard.best
        A = _polyval(filt.a, w)
    return filt


def soewito_mode1(D, omegas, N: int, M: int, W_ext=None, iters: int = 10,
                  h_init: IirFilter | None = None, stabilize: bool = True) -> IirFilter:
    """Weighted equation-error iteration (frequency-domain Steiglitz-McBride).

    ``h_{i+1} = argmin sum V_i |F h - D|^2`` with ``V_i = W_ext / |A_i|^2``
    and ``A_0 = 1`` unless ``h_init`` is given.
    """
    return _iterate_soewito(D, omegas, N, M, W_ext, iters, h_init, 1, stabilize)


def soewito_mode2(D, omegas, N: int, M: int, W_ext=None, iters: int = 10,
                  h_init: IirFilter | None = None, stabilize: bool = True) -> IirFilter:
    """Gradient-matched iteration ``Re(G^H V F) h = Re(G^H V D)``.

    ``G`` is rebuilt from the current response each step; a fixed point
    zeroes the gradient of the weighted solution error. Without ``h_init``
    the first step uses ``A = 1`` and ``G = F``, i.e. plain equation error.
    """
    if h_init is None:
        h_init = equation_error_design(D, omegas, N, M, W_ext)
        iters = max(int(iters) - 1, 0)
    return _iterate_soewito(D, omegas, N, M, W_ext, iters, h_init, 2, stabilize)


def quasilinearize(D, omegas, N: int, M: int, W_ext=None, h_init: IirFilter | None = None,
                   iters: int = 50, tol: float = 1e-12, stabilize: bool = True,
                   backtrack: int = 10, max_radius: float = 1.0, error_tol: float = 0.0):
    """Gauss-Newton iteration on the weighted solution error.

    ``h_{i+1} = argmin sum V_i |G_i h - (D + H_i - F h_i)|^2`` with
    ``V_i = W_ext / |A_i|^2``, which is one Gauss-Newton step for
    ``sum W |B / A - D|^2``. A step that raises the error is halved up to
    ``backtrack`` times; if every halving fails the iterate is kept and the
    run stops as converged. The iterate is stabilized after every step.

    Parameters
    ----------
    D : array_like
        Desired samples on ``omegas`` (any half-circle grid).
    omegas : array_like or FrequencyGrid
    N, M : int
    W_ext : array_like, optional
        Weights on squared errors; zero rows are ignored.
    h_init : IirFilter, optional
        Starting point; defaults to the equation-error design.
    iters : int
        Iteration cap.
    tol : float
        Stop when the relative coefficient change falls below ``tol``.
    error_tol : float
        Also stop when the error decreases by a relative amount of at most
        ``error_tol`` (off by default).
    max_radius : float
        Pole radius bound applied with the stabilization, see
        :func:`stabilize`.

    Returns
    -------
    IirFilter, QuasiTrace
    """
    w = _omegas(omegas)
    D = np.asarray(D, dtype=complex)
    W = _weights(W_ext, w.size)
    keep = W > 0
    w, D, W = w[keep], D[keep], W[keep]
    filt = h_init if h_init is not None else equation_error_design(D, w, N, M, W)
    if stabilize:
        filt = _stab(filt, max_radius)
    err = _safe_error(D, w, filt, W)
    trace = QuasiTrace(errors=[err])
    guard = _Guard(filt, err)
    for it in range(1, int(iters) + 1):
        F, G, H = rational_matrices(D, w, N, M, filt)
        A = _polyval(filt.a, w)
        x = filt.stacked()
        rhs = D + H - F @ x
        x_new = solve_wls(G, rhs, W / np.abs(A) ** 2, real_coefficients=True).coefficients
        step = x_new - x
        cand, cand_err = filt, err
        for _ in range(backtrack + 1):
            trial = IirFilter.from_stacked(x + step, N, M)
            if stabilize:
                trial = _stab(trial, max_radius)
            trial_err = _safe_error(D, w, trial, W)
            if trial_err <= err * (1 + 1e-12) or err == 0:
                cand, cand_err = trial, trial_err
                break
            step = step / 2
        change = np.linalg.norm(cand.stacked() - x) / max(np.linalg.norm(x), 1e-300)
        stalled = err - cand_err <= error_tol * err
        filt, err = cand, cand_err
        trace.errors.append(err)
        trace.iterations = it
        if guard.update(filt, err):
            warnings.warn("quasilinearization diverging; returning best iterate",
                          DivergenceWarning, stacklevel=2)
            trace.diverged = True
            return guard.best, trace
        if change < tol or (error_tol > 0 and stalled):
            trace.converged = True
            break
    return filt, trace


def enforce_stability(filt: IirFilter) -> IirFilter:
    """Reflect denominator roots outside the unit circle to ``1 / conj(z)``.

    The numerator is divided by the product of the reflected roots' moduli,
    which leaves ``|H(w)|`` unchanged. Filters with no root outside the
    circle are returned as is.
    """
    if filt.N == 0:
        return filt
    roots = np.roots(filt.a)
    out = np.abs(roots) > 1.0
    if not np.any(out):
        return filt
    gain = np.prod(np.abs(roots[out]))
    roots = roots.copy()
    roots[out] = 1.0 / np.conj(roots[out])
    a = np.real(np.poly(roots))
    return IirFilter(filt.b / gain, a)


def limit_pole_radius(filt: IirFilter, max_radius: float) -> IirFilter:
    """Pull denominator roots with ``|z| > max_radius`` radially onto it.

    Unlike reflection this changes ``|H|``; it bounds the peak gain of
    poles that an optimizer would otherwise push onto the unit circle
    between grid samples. The numerator is left as is.
    """
    if not 0 < max_radius <= 1:
        raise ValueError(f"max_radius must lie in (0, 1], got {max_radius}")
    if filt.N == 0:
        return filt
    roots = np.roots(filt.a)
    mod = np.abs(roots)
    big = mod > max_radius
    if not np.any(big):
        return filt
    roots = roots.copy()
    roots[big] *= max_radius / mod[big]
    return IirFilter(filt.b, np.real(np.poly(roots)))


def stabilize(filt: IirFilter, max_radius: float = 1.0) -> IirFilter:
    """Reflect unstable poles, then bound the pole radius if ``max_radius < 1``."""
    filt = enforce_stability(filt)
    if max_radius < 1:
        filt = limit_pole_radius(filt, max_radius)
    return filt


# quasilinearize has a boolean parameter named ``stabilize``
_stab = stabilize
