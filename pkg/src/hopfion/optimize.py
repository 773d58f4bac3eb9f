"""Nonlinear conjugate-gradient relaxation on the product of unit spheres.

Energy E4 + beta * E2 is minimized in stages with beta decreasing
geometrically and the final stage at beta = 0.  Sites move along tangent
directions and are projected back to unit length after each step.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyReport, IllConditionedPlaquette, energy_e4, evaluate
from .field import Field, continuity_check
from .geometry import LatticeGeometry

log = logging.getLogger(__name__)

ARMIJO_C1 = 1e-4


@dataclass
class RelaxConfig:
    beta0: float = 0.5
    beta_decay: float = 0.7
    beta_stages: int = 10
    grad_tol: float = 1e-8
    max_iters: int = 300
    final_max_iters: int = 3000
    # stop a stage once the energy drops by less than ftol (relative) over `window` iterations
    ftol: float = 1e-8
    window: int = 25
    discontinuity_threshold: float = 0.5 * math.pi

    def __post_init__(self):
        if self.beta0 < 0:
            raise ValueError("beta0 must be non-negative")
        if not 0 < self.beta_decay < 1:
            raise ValueError("beta_decay must lie in (0, 1)")
        if self.beta_stages < 1 or self.max_iters < 1 or self.final_max_iters < 1:
            raise ValueError("stage and iteration counts must be positive")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")

    def betas(self) -> list[float]:
        """beta per stage; the last stage is always pure E4."""
        return [self.beta0 * self.beta_decay**k for k in range(self.beta_stages - 1)] + [0.0]


@dataclass
class TraceRow:
    iteration: int
    beta: float
    E4: float
    E2: float
    grad_norm: float


@dataclass
class StageSummary:
    beta: float
    iterations: int
    converged: bool
    E4: float
    E2: float
    max_angle: float


@dataclass
class RelaxResult:
    field: Field
    trace: list[TraceRow]
    converged: bool
    discontinuous: bool
    report: EnergyReport | None
    iterations: int = 0
    max_angle: float = 0.0
    notes: list[str] = field(default_factory=list)
    stages: list[StageSummary] = field(default_factory=list)
    # field at the end of the last stage that finished continuous
    last_continuous: Field | None = None

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "beta", "E4", "E2", "grad_norm"])
            for r in self.trace:
                w.writerow([r.iteration, r.beta, repr(r.E4), repr(r.E2), repr(r.grad_norm)])


def _retract(data, direction, step):
    new = data + step * direction
    return new / np.linalg.norm(new, axis=-1, keepdims=True)


def _total(data, geom, beta):
    e4, e2, _ = evaluate(data, geom, beta, grad=False)
    return e4 + beta * e2


def line_search(
    data: np.ndarray,
    direction: np.ndarray,
    geom: LatticeGeometry,
    beta: float,
    e0: float | None = None,
    slope: float | None = None,
    step0: float | None = None,
    grad: np.ndarray | None = None,
) -> tuple[float, float]:
    """Backtracking Armijo search along a tangent direction.

    Returns ``(step, energy)``; a zero step means no sufficient decrease was
    found (the caller restarts CG).  ``slope`` is the directional derivative
    at step 0; pass ``grad`` instead to have it computed.
    """
    if e0 is None:
        e0 = _total(data, geom, beta)
    if slope is None:
        if grad is None:
            grad = evaluate(data, geom, beta)[2]
        slope = float(np.sum(grad * direction))
    dmax = float(np.sqrt(np.max(np.sum(direction * direction, axis=-1))))
    if dmax == 0.0 or slope >= 0.0:
        return 0.0, e0
    # no site turns by more than ~0.3 rad in one step
    cap = 0.3 / dmax
    step = min(step0 if step0 else 0.05 / dmax, cap)
    e = _total(_retract(data, direction, step), geom, beta)
    if e <= e0 + ARMIJO_C1 * step * slope:
        # try the minimizer of the quadratic through e0, slope and e(step)
        curv = e - e0 - slope * step
        if curv > 0:
            cand = min(-slope * step * step / (2.0 * curv), 4.0 * step, cap)
            if cand > step * 1.1:
                ec = _total(_retract(data, direction, cand), geom, beta)
                if ec < e:
                    return cand, ec
        return step, e
    for _ in range(40):
        curv = e - e0 - slope * step
        new = -slope * step * step / (2.0 * curv) if curv > 0 else 0.5 * step
        step = min(max(new, 0.1 * step), 0.5 * step)
        e = _total(_retract(data, direction, step), geom, beta)
        if e <= e0 + ARMIJO_C1 * step * slope:
            return step, e
        if step * dmax < 1e-14:
            break
    return 0.0, e0


def _cg_stage(data, geom, beta, cfg: RelaxConfig, max_iters, trace, it0, threshold):
    """One fixed-beta stage of Polak-Ribiere CG.  Returns (data, converged, iterations)."""
    e4, e2, g = evaluate(data, geom, beta)
    e = e4 + beta * e2
    d = -g
    gg = float(np.sum(g * g))
    step = None
    history = [e]
    it = 0
    converged = False
    restarted = False
    while True:
        gnorm = float(np.sqrt(np.max(np.sum(g * g, axis=-1))))
        if not restarted:
            trace.append(TraceRow(it0 + it, beta, e4, e2, gnorm))
        restarted = False
        if it >= max_iters:
            break
        if it and it % 50 == 0 and continuity_check(Field(geom.spec, data), geom) > threshold:
            break
        if gnorm < cfg.grad_tol:
            converged = True
            break
        if len(history) > cfg.window and history[-cfg.window - 1] - e <= cfg.ftol * abs(e):
            converged = True
            break
        slope = float(np.sum(g * d))
        if slope >= 0:
            d, slope = -g, -gg
        step, e_new = line_search(data, d, geom, beta, e0=e, slope=slope, step0=step)
        if step == 0.0:
            if np.array_equal(d, -g):
                converged = True  # steepest descent cannot improve: at machine precision
                break
            d = -g
            step = None
            restarted = True
            continue
        data = _retract(data, d, step)
        e4, e2, g_new = evaluate(data, geom, beta)
        e = e4 + beta * e2
        history.append(e)
        gg_new = float(np.sum(g_new * g_new))
        beta_pr = max(0.0, float(np.sum(g_new * (g_new - g))) / gg) if gg > 0 else 0.0
        # transport the old direction by projecting onto the new tangent planes
        d = d - np.sum(d * data, axis=-1, keepdims=True) * data
        d = -g_new + beta_pr * d
        g, gg = g_new, gg_new
        step *= 1.5
        it += 1
    return data, converged, it


def relax(field: Field, geom: LatticeGeometry, config: RelaxConfig | None = None) -> RelaxResult:
    """Minimize E4 with the beta phase-out schedule; flag discontinuous outcomes."""
    cfg = config or RelaxConfig()
    if field.spec != geom.spec:
        raise ValueError("field and geometry are on different lattices")
    data = field.data.copy()
    trace: list[TraceRow] = []
    notes: list[str] = []
    total_iters = 0
    converged = False
    discontinuous = False
    betas = cfg.betas()
    stages: list[StageSummary] = []
    last_continuous = None
    for k, beta in enumerate(betas):
        final = k == len(betas) - 1
        limit = cfg.final_max_iters if final else cfg.max_iters
        try:
            data, converged, its = _cg_stage(
                data, geom, beta, cfg, limit, trace, total_iters, cfg.discontinuity_threshold
            )
        except IllConditionedPlaquette as exc:
            notes.append(f"stage {k} (beta={beta:.4g}): {exc}")
            discontinuous = True
            converged = False
            break
        total_iters += its
        angle = continuity_check(Field(geom.spec, data), geom)
        row = trace[-1]
        stages.append(StageSummary(beta, its, converged, row.E4, row.E2, angle))
        log.info("stage %d beta=%.4g iters=%d E4=%.8f angle=%.3f", k, beta, its, row.E4, angle)
        if angle > cfg.discontinuity_threshold:
            notes.append(f"stage {k} (beta={beta:.4g}): neighbour angle {angle:.3f} exceeds threshold")
            discontinuous = True
            converged = False
            break
        last_continuous = Field(geom.spec, data.copy())
    out = Field(geom.spec, data)
    try:
        report = energy_e4(out, geom)
    except IllConditionedPlaquette:
        report = None
        discontinuous = True
    return RelaxResult(
        field=out,
        trace=trace,
        converged=converged and not discontinuous,
        discontinuous=discontinuous,
        report=report,
        iterations=total_iters,
        max_angle=continuity_check(out, geom),
        notes=notes,
        stages=stages,
        last_continuous=last_continuous,
    )
