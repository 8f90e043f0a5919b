"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import math
import numbers

import numpy as np

__all__ = [
    "check_frequencies",
    "check_response",
    "check_sample_weight",
    "check_order",
    "check_exponent",
    "check_normalized_edges",
]


def check_frequencies(omega) -> np.ndarray:
    """Radian frequencies as a strictly increasing 1-D array in ``[0, pi]``.

    A single-column 2-D array is flattened.
    """
    w = np.asarray(omega, dtype=float)
    if w.ndim == 2 and w.shape[1] == 1:
        w = w[:, 0]
    if w.ndim != 1:
        raise ValueError(f"frequencies must be 1-D, got shape {w.shape}")
    if w.size < 2:
        raise ValueError("at least two frequencies are required")
    if not np.all(np.isfinite(w)):
        raise ValueError("frequencies must be finite")
    if w[0] < 0 or w[-1] > np.pi + 1e-12:
        raise ValueError("frequencies must lie in [0, pi]")
    if np.any(np.diff(w) <= 0):
        raise ValueError("frequencies must be strictly increasing")
    return w


def check_response(D, n: int, *, real: bool = False) -> np.ndarray:
    """Desired samples aligned with ``n`` frequencies."""
    D = np.asarray(D)
    if D.ndim == 2 and D.shape[1] == 1:
        D = D[:, 0]
    if D.shape != (n,):
        raise ValueError(f"desired response has shape {D.shape}, expected ({n},)")
    if not np.all(np.isfinite(D)):
        raise ValueError("desired response must be finite")
    if real:
        if np.iscomplexobj(D) and np.any(D.imag != 0):
            raise ValueError("desired response must be real")
        return np.real(D).astype(float)
    return D.astype(complex) if np.iscomplexobj(D) else D.astype(float)


def check_sample_weight(sample_weight, n: int) -> np.ndarray:
    """Nonnegative finite weights, ones when ``None``."""
    if sample_weight is None:
        return np.ones(n)
    w = np.asarray(sample_weight, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"sample_weight has shape {w.shape}, expected ({n},)")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("sample_weight must be finite and nonnegative")
    return w


def check_order(value, name: str, minimum: int = 0) -> int:
    """Integer order or length no smaller than ``minimum``."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be at least {minimum}, got {value}")
    return int(value)


def check_exponent(p) -> float:
    """Exponent ``p >= 2``; ``"inf"`` and ``math.inf`` map to ``math.inf``."""
    if isinstance(p, str):
        if p.strip().lower() not in ("inf", "infinity"):
            raise ValueError(f"p must be a number or 'inf', got {p!r}")
        return math.inf
    p = float(p)
    if math.isnan(p) or p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    return p


def check_normalized_edges(f_pass: float, f_stop: float) -> tuple[float, float]:
    """Band edges in ``f = omega / (2 pi)`` with ``0 < f_pass < f_stop < 0.5``."""
    f_pass, f_stop = float(f_pass), float(f_stop)
    if not 0 < f_pass < 0.5 or not 0 < f_stop < 0.5:
        raise ValueError("band edges must lie in (0, 0.5)")
    if not f_pass < f_stop:
        raise ValueError(f"pass edge {f_pass} must be below stop edge {f_stop}")
    return f_pass, f_stop
