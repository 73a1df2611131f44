"""End-to-end experiment assembly for the nonconvex-channel convergence run.

Builds the full Theorem-style setup from (m, k): arcs a1 < a2 with curvature
matching the forcing, barrier lengths, the decay-rate bound delta_0, a grid
resolving the barrier interval, arc-band initial data, and the truncation
pin mask; then runs the flow and evaluates the convergence metric and the
barrier sandwich at every snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import channel as ch
from . import fields as fl
from . import geometry as ge
from . import solver as so


@dataclass
class ChannelConvergenceSetup:
    params: ch.ChannelParams
    spec: ge.Channel
    grid: ge.GridGeometry
    c: fl.ConstantForcing
    a1: float
    a2: float
    l1: float
    l2: float
    delta0: float
    delta: float
    t_final: float
    alpha: float
    beta: float
    u0: fl.ScalarField
    pin_mask: np.ndarray
    sub: ch.BarrierSchedule
    sup: ch.BarrierSchedule
    epsilon: float
    cfl_safety: float
    snapshot_every: float


def _dilate(mask: np.ndarray, cells: int) -> np.ndarray:
    out = mask.copy()
    for _ in range(cells):
        grown = out.copy()
        for ax in range(mask.ndim):
            grown[tuple(slice(1, None) if i == ax else slice(None) for i in range(mask.ndim))] |= \
                out[tuple(slice(None, -1) if i == ax else slice(None) for i in range(mask.ndim))]
            grown[tuple(slice(None, -1) if i == ax else slice(None) for i in range(mask.ndim))] |= \
                out[tuple(slice(1, None) if i == ax else slice(None) for i in range(mask.ndim))]
        out = grown
    return out


def _erode(mask: np.ndarray, cells: int) -> np.ndarray:
    return ~_dilate(~mask, cells)


def setup_channel_convergence(m: float, k: float, c_frac: float = 0.9,
                              l_frac: float = 0.3, cells_across: int = 11,
                              alpha: float = 0.0, beta: float = 1.0,
                              delta_T_product: float = 5.02,
                              epsilon: float = 1e-6,
                              cfl_safety: float = 0.9,
                              n_snapshots: int = 40) -> ChannelConvergenceSetup:
    params = ch.ChannelParams(m=m, k=k)
    c_val = c_frac / ch.channel_r_min(params)
    a1, a2 = ch.solve_radii(params, c_val)
    l1 = l2 = l_frac * (a2 - a1)
    d0 = ch.delta0(params, a1, l1, l2)
    delta = d0 / 2.0
    t_final = delta_T_product / delta

    h = (l1 + l2) / cells_across
    reach = float(np.abs(ch.p_center(params, np.asarray(a1 + l2))[..., 0])) \
        + float(ch.r_of(params, a1 + l2))
    x_max = reach + 12.0 * h
    spec = ge.Channel(m=m, k=k, x_max=x_max)
    grid = ge.build_grid(spec, h)

    ch.check_nesting(params, grid, a1 - l1, a1 + l2)
    u0 = ch.make_initial_data(params, a1, l1, l2, alpha, beta, grid)

    # truncation pinning: cells more than 4 cells outside U(a1 + l2) hold alpha
    sup_mask, _ = ch.build_U_mask(params, a1 + l2, grid)
    pin = grid.inside & ~_dilate(sup_mask.values > 0.5, 4)

    sub = ch.BarrierSchedule(a1=a1, l1=l1, l2=l2, delta=delta, direction="sub")
    sup = ch.BarrierSchedule(a1=a1, l1=l1, l2=l2, delta=delta, direction="super")
    return ChannelConvergenceSetup(
        params=params, spec=spec, grid=grid, c=fl.ConstantForcing(c_val),
        a1=a1, a2=a2, l1=l1, l2=l2, delta0=d0, delta=delta, t_final=t_final,
        alpha=alpha, beta=beta, u0=u0, pin_mask=pin, sub=sub, sup=sup,
        epsilon=epsilon, cfl_safety=cfl_safety,
        snapshot_every=t_final / n_snapshots,
    )


@dataclass
class ChannelConvergenceResult:
    setup: ChannelConvergenceSetup
    final: fl.ScalarField
    diags: so.RunDiagnostics
    metric_t: np.ndarray
    metric: np.ndarray
    sandwich_ok: bool
    sandwich_detail: str


def run_channel_convergence(setup: ChannelConvergenceSetup,
                            band_cells: int = 6,
                            sandwich_margin_cells: int = 2) -> ChannelConvergenceResult:
    grid = setup.grid
    cfg = so.SolverConfig(
        t_final=setup.t_final, epsilon=setup.epsilon, cfl_safety=setup.cfl_safety,
        snapshot_every=setup.snapshot_every, pin_mask=setup.pin_mask,
    )
    final, diags, snaps = so.run(setup.u0, cfg, setup.c)

    band = band_cells * grid.h
    half = 0.5 * (setup.alpha + setup.beta)
    metric_t, metric = [], []
    sandwich_ok = True
    detail = ""
    for t, vals in snaps:
        field = fl.ScalarField(grid, vals)
        metric_t.append(t)
        metric.append(ch.convergence_metric(field, setup.params, setup.a1,
                                            setup.alpha, setup.beta, band))
        a_lo = float(ch.barrier_a(setup.sub, t))
        a_hi = float(ch.barrier_a(setup.sup, t))
        lo_mask, _ = ch.build_U_mask(setup.params, a_lo, grid)
        hi_mask, _ = ch.build_U_mask(setup.params, a_hi, grid)
        lo_eroded = _erode(lo_mask.values > 0.5, sandwich_margin_cells)
        hi_dilated = _dilate(hi_mask.values > 0.5, sandwich_margin_cells)
        level = (vals >= half) & grid.inside
        lo_bad = int(np.sum(lo_eroded & grid.inside & ~level))
        hi_bad = int(np.sum(level & ~hi_dilated))
        if lo_bad or hi_bad:
            sandwich_ok = False
            detail = f"t={t:.3g}: below={lo_bad} above={hi_bad}"
    return ChannelConvergenceResult(
        setup=setup, final=final, diags=diags,
        metric_t=np.array(metric_t), metric=np.array(metric),
        sandwich_ok=sandwich_ok, sandwich_detail=detail,
    )
