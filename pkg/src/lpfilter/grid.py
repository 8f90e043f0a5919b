"""Frequency grids and desired responses.

Frequencies are radians per sample on ``[0, pi]``. Every grid sample carries
exactly one band label: ``"pass"``, ``"stop"`` or ``"transition"``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PASS",
    "STOP",
    "TRANSITION",
    "FrequencyGrid",
    "DesiredResponse",
    "build_grid",
    "default_grid_size",
    "build_lowpass_desired",
    "band_edges_from_f",
]

PASS = "pass"
STOP = "stop"
TRANSITION = "transition"
_LABELS = (PASS, STOP, TRANSITION)


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing frequency samples in ``[0, pi]``."""

    omegas: np.ndarray

    def __post_init__(self):
        w = np.array(self.omegas, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("a frequency grid needs at least 2 samples")
        if not np.all(np.isfinite(w)):
            raise ValueError("grid frequencies must be finite")
        if w[0] < 0 or w[-1] > np.pi + 1e-12:
            raise ValueError("grid frequencies must lie in [0, pi]")
        if np.any(np.diff(w) <= 0):
            raise ValueError("grid frequencies must be strictly increasing")
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    def __len__(self) -> int:
        return self.omegas.size

    @property
    def f(self) -> np.ndarray:
        """Normalized frequencies ``omega / (2 pi)``."""
        return self.omegas / (2 * np.pi)


def default_grid_size(n_coefficients: int) -> int:
    """Default sample count: ``max(16 n, 256)``."""
    return max(16 * int(n_coefficients), 256)


def build_grid(L: int, include_endpoints: bool = True) -> FrequencyGrid:
    """Equally spaced grid of ``L`` samples on ``[0, pi]``.

    With ``include_endpoints=False`` the samples are the midpoints
    ``(k + 1/2) pi / L``.
    """
    L = int(L)
    if L < 2:
        raise ValueError(f"grid size must be at least 2, got {L}")
    if include_endpoints:
        omegas = np.linspace(0.0, np.pi, L)
    else:
        omegas = (np.arange(L) + 0.5) * np.pi / L
    return FrequencyGrid(omegas)


@dataclass(frozen=True)
class DesiredResponse:
    """Desired frequency response sampled on a grid.

    Attributes
    ----------
    grid : FrequencyGrid
    samples : ndarray of complex
        ``D(omega_k)``.
    labels : ndarray of str
        Band label per sample.
    magnitude_only : bool
        True when only ``|D|`` is meaningful (samples then real, nonnegative).
    care : ndarray of bool
        Rows that enter a design. Transition rows are excluded in dont-care
        mode.
    delay : float or None
        Group delay of a linear-phase desired response.
    """

    grid: FrequencyGrid
    samples: np.ndarray
    labels: np.ndarray
    magnitude_only: bool = False
    care: np.ndarray | None = None
    delay: float | None = None
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        L = len(self.grid)
        s = np.asarray(self.samples, dtype=complex)
        lab = np.asarray(self.labels, dtype=object)
        if s.shape != (L,) or lab.shape != (L,):
            raise ValueError("samples and labels must align with the grid")
        if not np.all(np.isfinite(s)):
            raise ValueError("desired samples must be finite")
        if not set(lab.tolist()) <= set(_LABELS):
            raise ValueError(f"labels must be drawn from {_LABELS}")
        if self.magnitude_only and (np.any(np.abs(s.imag) > 0) or np.any(s.real < 0)):
            raise ValueError("magnitude-only samples must be real and nonnegative")
        care = np.ones(L, dtype=bool) if self.care is None else np.asarray(self.care, bool)
        if care.shape != (L,):
            raise ValueError("care mask must align with the grid")
        w = np.ones(L) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (L,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("band weights must be finite, nonnegative and align with the grid")
        for name, val in (("samples", s), ("labels", lab), ("care", care), ("weights", w)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def omegas(self) -> np.ndarray:
        return self.grid.omegas

    def amplitude(self, phase_offset: float = 0.0) -> np.ndarray:
        """Real amplitude target for a linear-phase kernel.

        The linear phase ``phase_offset - omega * delay`` is removed from the
        samples and the real part is returned. Without a delay the samples are
        taken as the amplitude directly.
        """
        s = self.samples
        if self.delay is not None:
            s = s * np.exp(-1j * (phase_offset - self.omegas * self.delay))
        return np.real(s)


def band_edges_from_f(f_pass: float, f_stop: float) -> tuple[float, float]:
    """Convert normalized edges ``f = omega / (2 pi)`` to radians."""
    return 2 * np.pi * float(f_pass), 2 * np.pi * float(f_stop)


def build_lowpass_desired(
    grid: FrequencyGrid,
    omega_pass: float,
    omega_stop: float,
    transition: str = "dont-care",
    delay: float | None = None,
    pass_weight: float = 1.0,
    stop_weight: float = 1.0,
) -> DesiredResponse:
    """Lowpass desired response with unit passband and zero stopband.

    Parameters
    ----------
    grid : FrequencyGrid
    omega_pass, omega_stop : float
        Band edges in radians, ``0 < omega_pass < omega_stop < pi``.
    transition : {"dont-care", "linear-interp"}
        Dont-care rows are left out of designs; linear-interp fills them
        with a magnitude ramp from 1 to 0.
    delay : float, optional
        Group delay ``M`` of a linear phase ``exp(-j omega M)``. ``None``
        gives a zero-phase (real) target.
    pass_weight, stop_weight : float
        Per-band weights applied to squared errors.
    """
    if not 0 < omega_pass < omega_stop < np.pi:
        raise ValueError(
            "band edges must satisfy 0 < omega_pass < omega_stop < pi, "
            f"got {omega_pass}, {omega_stop}"
        )
    if transition not in ("dont-care", "linear-interp"):
        raise ValueError(f"unknown transition mode {transition!r}")
    w = grid.omegas
    labels = np.full(w.size, TRANSITION, dtype=object)
    labels[w <= omega_pass] = PASS
    labels[w >= omega_stop] = STOP
    mag = np.zeros(w.size)
    mag[labels == PASS] = 1.0
    trans = labels == TRANSITION
    if transition == "linear-interp":
        mag[trans] = (omega_stop - w[trans]) / (omega_stop - omega_pass)
        care = np.ones(w.size, dtype=bool)
    else:
        care = ~trans
    samples = mag.astype(complex)
    if delay is not None:
        samples = samples * np.exp(-1j * w * delay)
    weights = np.where(labels == PASS, pass_weight, np.where(labels == STOP, stop_weight, 1.0))
    return DesiredResponse(
        grid=grid,
        samples=samples,
        labels=labels,
        magnitude_only=delay is None,
        care=care,
        delay=delay,
        weights=weights,
    )
