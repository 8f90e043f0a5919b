"""Command line front end: ``lpfilter design <specfile> [--out DIR]``.

A spec file is INI text with the sections ``[design]``, ``[bands]``,
``[lp]``, ``[cls]`` and ``[iir]``; see the README for the grammar. Each
run writes comma-separated tables with 17 significant digits:

* ``<name>_coefficients.csv`` - ``coefficient,index,value`` (``h`` for FIR,
  ``b`` and ``a`` for IIR);
* ``<name>_response.csv`` - one row per grid sample;
* ``<name>_trace.csv`` - one row per accepted iteration;
* ``<name>_stages.csv`` - magnitude IIR designs only;
* ``<name>_summary.txt`` - ``key = value`` lines.

Outputs depend only on the spec file, so repeated runs are byte-identical.
Wall-clock timings go to standard error, never into the files.

Exit codes: 0 success, 1 design failure (or an infeasible constrained
design with ``--strict``), 2 invalid spec.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fir import (
    ClsSpec,
    FirFilter,
    build_step_desired,
    design_cls,
    design_complex_lp,
    design_freq_varying,
    design_linear_phase_lp,
    design_magnitude_fir,
)
from .grid import PASS, STOP, band_edges_from_f, build_grid, build_lowpass_desired, default_grid_size
from .iir_l2 import (
    IirFilter,
    iir_freq_response,
    jackson_design,
    soewito_mode1,
    soewito_mode2,
    stabilize,
    to_full_circle,
    prony_freq_design,
)
from .iir_lp import (
    MAX_POLE_RADIUS,
    design_iir_complex_lp,
    design_iir_freq_varying,
    design_iir_magnitude_lp,
    fill_transition,
)
from .irls import (
    FREQ_OBJECTIVES,
    INFINITY_PROXY,
    STRATEGY_NAMES,
    ConvergenceTrace,
    IrlsConfig,
    _make_record,
    lp_error,
    make_strategy,
)
from .kernels import _check_kind, impulse_to_amplitude, linear_phase_kernel

__all__ = [
    "KINDS",
    "SpecError",
    "DesignSpec",
    "OutputBundle",
    "parse_spec",
    "parse_spec_text",
    "run_design",
    "write_bundle",
    "load_coefficients",
    "main",
]

KINDS = ("fir-lp", "fir-complex", "fir-freqp", "fir-cls", "fir-mag",
         "iir-lp", "iir-freqp", "iir-mag", "iir-l2")
IIR_METHODS = ("quasilinearize", "prony", "jackson", "soewito-mode1", "soewito-mode2")

_SCHEMA = {
    "design": ("kind", "n", "m", "type", "grid_size", "name"),
    "bands": ("f_pass", "f_stop", "f_transition", "transition", "pass_weight",
              "stop_weight", "delay"),
    "lp": ("p", "p_pass", "p_stop", "objective", "strategy", "sigma", "delta", "gamma", "lambda",
           "max_iters", "coeff_tol", "error_tol"),
    "cls": ("tau", "mode", "weighting", "p", "sigma", "slack"),
    "iir": ("method", "iterations", "max_pole_radius"),
}

EXIT_OK, EXIT_DESIGN, EXIT_SPEC = 0, 1, 2


class SpecError(ValueError):
    """Invalid spec file; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class DesignSpec:
    """Validated design request. Frequencies are normalized (``f = w / 2 pi``)."""

    kind: str
    name: str
    N: int
    M: int | None = None
    type: str | None = None
    grid_size: int = 256
    f_pass: float | None = None
    f_stop: float | None = None
    f_transition: float | None = None
    transition: str = "dont-care"
    pass_weight: float = 1.0
    stop_weight: float = 1.0
    delay: float | None = None
    p: float | str = 2.0
    p_pass: float | None = None
    p_stop: float | None = None
    objective: str = "metric"
    strategy: str = "adaptive-bbs"
    sigma: float | None = None
    delta: float | None = None
    gamma: float | None = None
    lam: float | None = None
    max_iters: int = 200
    coeff_tol: float = 1e-8
    error_tol: float = 1e-10
    cls: ClsSpec | None = None
    iir_method: str = "quasilinearize"
    iir_iterations: int = 50
    max_pole_radius: float = MAX_POLE_RADIUS

    @property
    def is_iir(self) -> bool:
        return self.kind.startswith("iir")

    def config(self) -> IrlsConfig:
        return IrlsConfig(p_des=self.p, max_outer_iters=self.max_iters,
                          coeff_tol=self.coeff_tol, error_tol=self.error_tol)

    def strategy_obj(self):
        return make_strategy(self.strategy, sigma=self.sigma, delta=self.delta,
                             gamma=self.gamma, lam=self.lam)


# ---------------------------------------------------------------------------
# parsing


class _Reader:
    """Typed access to a ConfigParser that accumulates errors."""

    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp
        self.errors: list[str] = []

    def raw(self, section, key):
        if self.cp.has_option(section, key):
            return self.cp.get(section, key).strip()
        return None

    def text(self, section, key, default=None, choices=None):
        v = self.raw(section, key)
        if v is None:
            return default
        if choices is not None and v not in choices:
            self.errors.append(f"[{section}] {key}: {v!r} is not one of {', '.join(choices)}")
            return default
        return v

    def number(self, section, key, default=None, *, kind=float, check=None, rule=""):
        v = self.raw(section, key)
        if v is None:
            return default
        try:
            x = kind(v)
        except ValueError:
            self.errors.append(f"[{section}] {key}: {v!r} is not a valid {kind.__name__}")
            return default
        if kind is float and not math.isfinite(x):
            self.errors.append(f"[{section}] {key}: must be finite")
            return default
        if check is not None and not check(x):
            self.errors.append(f"[{section}] {key}: {v} out of range ({rule})")
            return default
        return x

    def exponent(self, section, key, default=None):
        v = self.raw(section, key)
        if v is None:
            return default
        if v.lower() in ("inf", "infinity"):
            return "inf"
        try:
            x = float(v)
        except ValueError:
            self.errors.append(f"[{section}] {key}: {v!r} is not a number or 'inf'")
            return default
        if math.isnan(x) or x < 2:
            self.errors.append(f"[{section}] {key}: {v} out of range (p must be >= 2)")
            return default
        return "inf" if math.isinf(x) else x

    def require(self, section, key, value):
        if value is None and self.raw(section, key) is None:
            self.errors.append(f"[{section}] {key}: missing")


def parse_spec_text(text: str, name: str = "design") -> DesignSpec:
    """Parse and validate spec text.

    Raises
    ------
    SpecError
        Listing every validation error found.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                   interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SpecError([f"malformed spec: {exc}".splitlines()[0]]) from None
    rd = _Reader(cp)
    for section in cp.sections():
        if section not in _SCHEMA:
            rd.errors.append(f"unknown section [{section}]")
            continue
        for key in cp.options(section):
            if key not in _SCHEMA[section]:
                rd.errors.append(f"[{section}] unknown key {key!r}")
    if not cp.has_section("design"):
        rd.errors.append("missing section [design]")

    kind = rd.text("design", "kind", choices=KINDS)
    rd.require("design", "kind", kind)
    iir = kind is not None and kind.startswith("iir")
    N = rd.number("design", "n", kind=int, check=(lambda x: x >= 0) if iir else (lambda x: x >= 1),
                  rule="N >= 0" if iir else "N >= 1")
    rd.require("design", "n", N)
    M = None
    if iir:
        M = rd.number("design", "m", kind=int, check=lambda x: x >= 0, rule="M >= 0")
        rd.require("design", "m", M)
        if N == 0 and M == 0:
            rd.errors.append("[design] N and M cannot both be zero")
    elif rd.raw("design", "m") is not None:
        rd.errors.append("[design] m: only IIR designs take a numerator order")
    spec_name = rd.text("design", "name", default=name)
    if spec_name is not None and (not spec_name or any(c in spec_name for c in "/\\")):
        rd.errors.append("[design] name: must be a plain file-name prefix")

    ftype = None
    if kind in ("fir-lp", "fir-cls", "fir-freqp"):
        allowed = ("I", "II", "III", "IV", "complex") if kind == "fir-freqp" else ("I", "II", "III", "IV")
        ftype = rd.text("design", "type", default="I", choices=allowed)
        if ftype in ("I", "II", "III", "IV") and N is not None:
            try:
                _check_kind(N, ftype)
            except ValueError as exc:
                rd.errors.append(f"[design] type: {exc}")
    elif rd.raw("design", "type") is not None:
        rd.errors.append(f"[design] type: not used by kind {kind}")

    n_unknowns = 1
    if N is not None:
        n_unknowns = N + (M or 0) + 1 if iir else N
    grid_size = rd.number("design", "grid_size", kind=int, check=lambda x: x >= 2, rule="L >= 2")
    if grid_size is None:
        grid_size = default_grid_size(n_unknowns)

    # bands
    induced = kind == "fir-cls" and rd.raw("cls", "mode") == "induced-band"
    unit = lambda x: 0 < x < 0.5  # noqa: E731
    f_pass = rd.number("bands", "f_pass", check=unit, rule="0 < f < 0.5")
    f_stop = rd.number("bands", "f_stop", check=unit, rule="0 < f < 0.5")
    f_t = rd.number("bands", "f_transition", check=unit, rule="0 < f < 0.5")
    if induced:
        rd.require("bands", "f_transition", f_t)
    else:
        rd.require("bands", "f_pass", f_pass)
        rd.require("bands", "f_stop", f_stop)
        if f_pass is not None and f_stop is not None and not f_pass < f_stop:
            rd.errors.append(f"[bands] f_pass ({f_pass}) must be below f_stop ({f_stop})")
    transition = rd.text("bands", "transition", default="dont-care",
                         choices=("dont-care", "linear-interp"))
    positive = lambda x: x > 0  # noqa: E731
    pw = rd.number("bands", "pass_weight", 1.0, check=positive, rule="> 0")
    sw = rd.number("bands", "stop_weight", 1.0, check=positive, rule="> 0")
    delay = None
    if rd.raw("bands", "delay") is not None and rd.raw("bands", "delay").lower() != "auto":
        delay = rd.number("bands", "delay", check=lambda x: x >= 0, rule="delay >= 0")
    needs_delay = kind in ("iir-lp", "iir-freqp", "iir-l2")
    if needs_delay and delay is None and rd.raw("bands", "delay") in (None, "auto"):
        rd.errors.append(f"[bands] delay: required for {kind} (desired phase exp(-j w delay))")
    if delay is None and kind in ("fir-complex",) or (kind == "fir-freqp" and ftype == "complex"):
        delay = (N - 1) / 2 if N is not None and delay is None else delay

    # l_p
    p = rd.exponent("lp", "p", 2.0)
    freqp = kind in ("fir-freqp", "iir-freqp")
    p_pass = rd.exponent("lp", "p_pass")
    p_stop = rd.exponent("lp", "p_stop")
    if freqp:
        rd.require("lp", "p_pass", p_pass)
        rd.require("lp", "p_stop", p_stop)
    elif p_pass is not None or p_stop is not None:
        rd.errors.append("[lp] p_pass/p_stop: only frequency-varying kinds take per-band exponents")
    objective = rd.text("lp", "objective", default="metric", choices=FREQ_OBJECTIVES)
    if rd.raw("lp", "objective") is not None and not freqp:
        rd.errors.append("[lp] objective: only frequency-varying kinds choose an objective")
    strategy = rd.text("lp", "strategy", default="adaptive-bbs", choices=STRATEGY_NAMES)
    sigma = rd.number("lp", "sigma", check=lambda x: 1 < x <= 2, rule="1 < sigma <= 2")
    delta = rd.number("lp", "delta", check=lambda x: 0 < x < 1, rule="0 < delta < 1")
    gamma = rd.number("lp", "gamma", check=positive, rule="gamma > 0")
    lam = rd.number("lp", "lambda", check=lambda x: 0 < x <= 1, rule="0 < lambda <= 1")
    max_iters = rd.number("lp", "max_iters", 200, kind=int, check=lambda x: x >= 1, rule=">= 1")
    coeff_tol = rd.number("lp", "coeff_tol", 1e-8, check=positive, rule="> 0")
    error_tol = rd.number("lp", "error_tol", 1e-10, check=positive, rule="> 0")

    # constrained least squares
    cls = None
    if kind == "fir-cls":
        tau = rd.number("cls", "tau", check=positive, rule="tau > 0")
        rd.require("cls", "tau", tau)
        mode = rd.text("cls", "mode", default="fixed-band", choices=("fixed-band", "induced-band"))
        weighting = rd.text("cls", "weighting", default="auto",
                            choices=("auto", "polynomial", "envelope"))
        cls_p = rd.number("cls", "p", 50.0, check=lambda x: x > 2, rule="p > 2")
        cls_sigma = rd.number("cls", "sigma", 1.5, check=lambda x: 1 < x <= 2, rule="1 < sigma <= 2")
        slack = rd.number("cls", "slack", 1e-4, check=lambda x: x >= 0, rule=">= 0")
        if tau is not None:
            cls = ClsSpec(tau=tau, mode=mode, weighting=None if weighting == "auto" else weighting,
                          p=cls_p, sigma=cls_sigma, feasibility_slack=slack)
    elif cp.has_section("cls"):
        rd.errors.append(f"[cls] section only applies to fir-cls, not {kind}")

    method = rd.text("iir", "method", default="quasilinearize", choices=IIR_METHODS)
    if method != "quasilinearize" and kind != "iir-l2":
        rd.errors.append("[iir] method: only iir-l2 designs select a method")
    iir_iters = rd.number("iir", "iterations", 50, kind=int, check=lambda x: x >= 0, rule=">= 0")
    radius = rd.number("iir", "max_pole_radius", MAX_POLE_RADIUS,
                       check=lambda x: 0 < x <= 1, rule="0 < r <= 1")
    if not iir and cp.has_section("iir"):
        rd.errors.append(f"[iir] section only applies to IIR kinds, not {kind}")

    if grid_size is not None and grid_size <= n_unknowns:
        rd.errors.append(f"[design] grid_size: {grid_size} samples cannot determine "
                         f"{n_unknowns} coefficients")
    if rd.errors:
        raise SpecError(rd.errors)
    return DesignSpec(
        kind=kind, name=spec_name, N=N, M=M, type=ftype, grid_size=grid_size,
        f_pass=f_pass, f_stop=f_stop, f_transition=f_t, transition=transition,
        pass_weight=pw, stop_weight=sw, delay=delay, p=p, p_pass=p_pass, p_stop=p_stop,
        objective=objective, strategy=strategy, sigma=sigma, delta=delta, gamma=gamma, lam=lam,
        max_iters=max_iters, coeff_tol=coeff_tol, error_tol=error_tol, cls=cls,
        iir_method=method, iir_iterations=iir_iters, max_pole_radius=radius,
    )


def parse_spec(path) -> DesignSpec:
    """Read and validate a spec file; the default output name is its stem."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError([f"cannot read {path}: {exc.strerror}"]) from None
    return parse_spec_text(text, name=path.stem)


# ---------------------------------------------------------------------------
# running


@dataclass
class OutputBundle:
    """Everything a run produces.

    ``tables`` maps a file suffix to ``(header, rows)``; ``summary`` is an
    ordered list of ``(key, value)`` pairs.
    """

    spec: DesignSpec
    status: str
    filter: FirFilter | IirFilter | None = None
    tables: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)
    failed: bool = False


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _desired(spec: DesignSpec, delay=None):
    grid = build_grid(spec.grid_size)
    if spec.kind == "fir-cls" and spec.cls.mode == "induced-band":
        return build_step_desired(grid, 2 * np.pi * spec.f_transition)
    wp, ws = band_edges_from_f(spec.f_pass, spec.f_stop)
    return build_lowpass_desired(grid, wp, ws, transition=spec.transition, delay=delay,
                                 pass_weight=spec.pass_weight, stop_weight=spec.stop_weight)


def _p_per_sample(spec: DesignSpec, desired) -> np.ndarray:
    def val(p):
        return INFINITY_PROXY if p == "inf" else float(p)

    return np.where(desired.labels == STOP, val(spec.p_stop), val(spec.p_pass))


def _single_record_trace(residual) -> ConvergenceTrace:
    trace = ConvergenceTrace()
    trace.records.append(_make_record(0, 2.0, math.nan, 1.0, residual,
                                      lp_error(residual, 2.0)))
    trace.status = "converged"
    trace.final_weights = np.ones(residual.size)
    trace.final_p = 2.0
    return trace


def _iir_l2(spec: DesignSpec, desired):
    c = desired.care
    D, w, W = desired.samples[c], desired.omegas[c], desired.weights[c]
    N, M = spec.N, spec.M
    if spec.iir_method == "quasilinearize":
        return design_iir_complex_lp(desired, N, M, config=spec.config(),
                                     max_radius=spec.max_pole_radius)
    if spec.iir_method == "prony":
        full = to_full_circle(desired.omegas, fill_transition(desired))
        filt = prony_freq_design(full, N, M)
    elif spec.iir_method == "jackson":
        filt = jackson_design(D, w, N, M, spec.iir_iterations, W)
    elif spec.iir_method == "soewito-mode1":
        filt = soewito_mode1(D, w, N, M, W, spec.iir_iterations)
    else:
        filt = soewito_mode2(D, w, N, M, W, spec.iir_iterations)
    filt = stabilize(filt, spec.max_pole_radius)
    return filt, _single_record_trace(iir_freq_response(filt, w) - D)


def _errors(spec: DesignSpec, desired, filt) -> np.ndarray:
    """Error of the final design on the whole grid, as the design defines it."""
    w = desired.omegas
    if isinstance(filt, IirFilter):
        H = iir_freq_response(filt, w)
    else:
        H = filt.response(w)
    if spec.kind in ("fir-mag", "iir-mag"):
        return (np.abs(H) - np.abs(desired.samples)).astype(complex), H
    if spec.kind in ("fir-lp", "fir-cls") or (spec.kind == "fir-freqp" and spec.type != "complex"):
        K = linear_phase_kernel(w, filt.N, spec.type)
        A = K.matrix @ impulse_to_amplitude(filt.h, spec.type)
        return (A - desired.amplitude(K.phase_offset)).astype(complex), H
    return H - desired.samples, H


def _design(spec: DesignSpec):
    strategy, config = spec.strategy_obj(), spec.config()
    extra, stages = [], None
    k = spec.kind
    if k == "fir-lp":
        desired = _desired(spec)
        filt, trace = design_linear_phase_lp(desired, spec.N, spec.type, strategy, config)
    elif k == "fir-complex":
        desired = _desired(spec, spec.delay)
        filt, trace = design_complex_lp(desired, spec.N, strategy, config)
    elif k == "fir-freqp":
        desired = _desired(spec, spec.delay if spec.type == "complex" else None)
        kind = None if spec.type == "complex" else spec.type
        filt, trace = design_freq_varying(desired, spec.N, _p_per_sample(spec, desired), kind,
                                          sigma0=spec.sigma or 1.5, delta=spec.delta or 0.1,
                                          config=config, objective=spec.objective)
    elif k == "fir-cls":
        desired = _desired(spec)
        filt, trace, report = design_cls(desired, spec.N, spec.type, spec.cls, config)
        extra += [("tau", spec.cls.tau), ("cls_mode", spec.cls.mode),
                  ("cls_weighting", spec.cls.resolved_weighting)]
        for lab in (PASS, STOP):
            if lab in report.max_error:
                extra += [(f"max_error_{lab}", report.max_error[lab]),
                          (f"constraint_met_{lab}", report.met[lab])]
        if report.induced_edges is not None:
            extra += [("induced_pass_edge_f", report.induced_edges[0] / (2 * np.pi)),
                      ("induced_stop_edge_f", report.induced_edges[1] / (2 * np.pi))]
    elif k == "fir-mag":
        desired = _desired(spec)
        filt, trace = design_magnitude_fir(desired, spec.N, strategy, config)
        extra.append(("psd_lift", filt.record["lift"]))
    elif k == "iir-lp":
        desired = _desired(spec, spec.delay)
        filt, trace = design_iir_complex_lp(desired, spec.N, spec.M, strategy, config,
                                            max_radius=spec.max_pole_radius)
    elif k == "iir-freqp":
        desired = _desired(spec, spec.delay)
        filt, trace = design_iir_freq_varying(desired, spec.N, spec.M,
                                              _p_per_sample(spec, desired),
                                              sigma0=spec.sigma or 1.5, delta=spec.delta or 0.1,
                                              config=config, max_radius=spec.max_pole_radius,
                                              objective=spec.objective)
    elif k == "iir-mag":
        desired = _desired(spec)
        filt, stages, trace = design_iir_magnitude_lp(desired, spec.N, spec.M, strategy=strategy,
                                                      config=config,
                                                      max_radius=spec.max_pole_radius)
    else:  # iir-l2
        desired = _desired(spec, spec.delay)
        filt, trace = _iir_l2(spec, desired)
    return desired, filt, trace, stages, extra


def run_design(spec: DesignSpec) -> OutputBundle:
    """Run the design described by ``spec`` and build the output tables.

    Design errors do not propagate: the bundle is marked failed and its
    summary carries the message.
    """
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            desired, filt, trace, stages, extra = _design(spec)
    except Exception as exc:  # reported through the summary and exit code
        summary = [("name", spec.name), ("kind", spec.kind), ("status", "failed"),
                   ("error", f"{type(exc).__name__}: {exc}".replace("\n", " "))]
        return OutputBundle(spec, "failed", summary=summary, failed=True)

    status = trace.status
    E, H = _errors(spec, desired, filt)
    care = desired.care
    weights = np.zeros(E.size)
    fw = trace.final_weights if trace.final_weights is not None else np.ones(care.sum())
    weights[care] = desired.weights[care] * np.asarray(fw)

    f = desired.grid.f
    response_rows = [
        (f[k], abs(H[k]), np.angle(H[k]), E[k].real, E[k].imag, abs(E[k]),
         desired.labels[k] if care[k] else "dont-care", weights[k])
        for k in range(E.size)
    ]
    tables = {
        "response": (("f", "magnitude", "phase", "error_re", "error_im", "error_abs",
                      "band", "weight"), response_rows),
    }
    if isinstance(filt, IirFilter):
        coeff_rows = [("b", i, v) for i, v in enumerate(filt.b)]
        coeff_rows += [("a", i, v) for i, v in enumerate(filt.a)]
    else:
        coeff_rows = [("h", i, v) for i, v in enumerate(filt.h)]
    tables["coefficients"] = (("coefficient", "index", "value"), coeff_rows)
    trace_rows = [
        (r.iteration, r.p, r.sigma, r.lam, r.lp_error, r.l2_error, r.max_error,
         r.inner_iterations, r.flags or ("adapted" if r.adapted else ""))
        for r in trace.records
    ]
    tables["trace"] = (("iteration", "p", "sigma", "lambda", "lp_error", "l2_error",
                        "max_error", "inner_iterations", "flags"), trace_rows)
    if stages is not None:
        tables["stages"] = (("stage", "iterations", "max_error", "l2_error", "flags"),
                            [(s.stage, s.iterations, s.max_error, s.l2_error, s.flags)
                             for s in stages])

    Ec = np.abs(E[care])
    summary = [
        ("name", spec.name), ("kind", spec.kind), ("status", status),
        ("N", spec.N),
    ]
    if spec.M is not None:
        summary.append(("M", spec.M))
    if spec.type is not None:
        summary.append(("type", spec.type))
    summary += [
        ("grid_size", spec.grid_size),
        ("strategy", spec.strategy if spec.kind != "fir-cls" else "cls"),
        ("p", spec.p if spec.kind not in ("fir-freqp", "iir-freqp") else "per-band"),
        ("iterations", trace.iterations),
        ("final_p", trace.final_p if np.ndim(trace.final_p) == 0 else "per-sample"),
        ("l2_error", float(np.sqrt(np.sum(Ec ** 2)))),
        ("max_error", float(Ec.max())),
    ]
    if isinstance(filt, IirFilter) and filt.N:
        summary.append(("max_pole_radius_used", float(np.abs(filt.poles).max())))
    summary += extra
    notes = sorted({str(w.message) for w in caught})
    if notes:
        summary.append(("warnings", " | ".join(notes)))
    if stages is not None:
        for s in stages:
            summary.append((f"stage_{s.stage}_max_error", s.max_error))
    return OutputBundle(spec, status, filt, tables, summary)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_bundle(bundle: OutputBundle, out_dir) -> list[Path]:
    """Write the bundle's files into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = bundle.spec.name
    written = []
    for suffix in ("coefficients", "response", "trace", "stages"):
        if suffix in bundle.tables:
            path = out / f"{name}_{suffix}.csv"
            path.write_text(_csv_text(*bundle.tables[suffix]))
            written.append(path)
    path = out / f"{name}_summary.txt"
    path.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in bundle.summary))
    written.append(path)
    return written


def load_coefficients(path):
    """Read a coefficients table back into a filter object."""
    groups: dict[str, dict[int, float]] = {}
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header != ["coefficient", "index", "value"]:
            raise ValueError(f"{path}: not a coefficients table")
        for name, idx, val in rows:
            groups.setdefault(name, {})[int(idx)] = float(val)

    def vec(name):
        g = groups[name]
        return np.array([g[i] for i in range(len(g))])

    if "h" in groups:
        return FirFilter(vec("h"))
    if "a" in groups and "b" in groups:
        return IirFilter(vec("b"), vec("a"))
    raise ValueError(f"{path}: expected h or a/b coefficients")


# ---------------------------------------------------------------------------
# entry point


def _run_one(path, out, strict, quiet, show_trace):
    """Run one spec file; returns (exit code, messages for stdout, stderr)."""
    stdout, stderr = [], []
    try:
        spec = parse_spec(path)
    except SpecError as exc:
        stderr.append(f"{path}: invalid spec")
        stderr += [f"  {e}" for e in exc.errors]
        return EXIT_SPEC, stdout, stderr
    t0 = time.perf_counter()
    bundle = run_design(spec)
    elapsed = time.perf_counter() - t0
    out_dir = out if out is not None else Path.cwd()
    write_bundle(bundle, out_dir)
    if not quiet:
        stderr.append(f"{path}: {spec.kind} finished in {elapsed:.3f} s")
    if bundle.failed:
        stderr.append(f"{path}: design failed: {dict(bundle.summary)['error']}")
        return EXIT_DESIGN, stdout, stderr
    if show_trace:
        stdout.append(_csv_text(*bundle.tables["trace"]).rstrip("\n"))
    if not quiet:
        s = dict(bundle.summary)
        stdout.append(f"{spec.name}: status={bundle.status} iterations={s['iterations']} "
                      f"max_error={_fmt(s['max_error'])}")
    if strict and bundle.status in ("constraint-infeasible", "error-increase-unrecoverable"):
        stderr.append(f"{path}: {bundle.status} (strict mode)")
        return EXIT_DESIGN, stdout, stderr
    return EXIT_OK, stdout, stderr


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpfilter",
                                     description="l_p FIR/IIR filter design by IRLS")
    sub = parser.add_subparsers(dest="command", required=True)
    d = sub.add_parser("design", help="run one or more design spec files")
    d.add_argument("specfile", nargs="+", help="INI design spec")
    d.add_argument("--out", type=Path, default=None,
                   help="output directory (default: current directory)")
    d.add_argument("--trace", action="store_true",
                   help="also print the convergence trace table to stdout")
    d.add_argument("--quiet", action="store_true", help="suppress progress output")
    d.add_argument("--strict", action="store_true",
                   help="treat infeasible or unrecoverable designs as failures")
    d.add_argument("--jobs", type=int, default=1, help="spec files to run concurrently")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SPEC if exc.code else EXIT_OK
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_SPEC

    def task(path):
        return _run_one(path, args.out, args.strict, args.quiet, args.trace)

    if args.jobs == 1 or len(args.specfile) == 1:
        results = [task(p) for p in args.specfile]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(task, args.specfile))
    code = EXIT_OK
    for rc, out_lines, err_lines in results:
        for line in out_lines:
            print(line)
        for line in err_lines:
            print(line, file=sys.stderr)
        code = max(code, rc)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
