"""Explicit time stepping for the regularized flow, run diagnostics, and
the predicted Lipschitz-bound calculators.

Diagnostics sampled at the snapshot cadence:
  max_w      max of sqrt(eps^2 + |Du|^2) over inside cells
  lip_x      discrete spatial Lipschitz constant
  sup_ut     max |du|/dt over the steps since the previous snapshot
  lyapunov_E h^n * sum_inside [ sqrt(eps^2+|Du|^2) - c u ]
  sup_u      max |u| over inside cells
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._stepper import StepperState
from .fields import (
    Forcing,
    ScalarField,
    grad_central,
    lipschitz_x,
    neumann_fill_ghosts,
    w_field,
)
from .geometry import BoundaryMetrics, GridGeometry

MAX_TOTAL_STEPS = 10 ** 9


class SolverAbort(RuntimeError):
    """Raised when the field goes non-finite (CFL violation or bad input)."""


@dataclass
class SolverConfig:
    t_final: float
    epsilon: float | None = None        # default: grid spacing h
    cfl_safety: float = 0.25
    snapshot_every: float | None = None  # default: t_final / 20
    pin_mask: np.ndarray | None = None   # cells held fixed (channel truncation)
    store_snapshots: bool = True

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class RunDiagnostics:
    t: np.ndarray
    max_w: np.ndarray
    lip_x: np.ndarray
    sup_ut: np.ndarray
    lyapunov_E: np.ndarray
    sup_u: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("diagnostic times must be strictly increasing")
        for name in ("t", "max_w", "lip_x", "sup_ut", "lyapunov_E", "sup_u"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite diagnostics in {name}")

    HEADER = ("t", "max_w", "lip_x", "sup_ut", "lyapunov_E", "sup_u")

    def rows(self):
        cols = [self.t, self.max_w, self.lip_x, self.sup_ut, self.lyapunov_E, self.sup_u]
        return list(zip(*cols))


@dataclass
class PredictedBounds:
    """A-priori constants. global_L is meaningful only under the forcing condition."""

    M: float
    global_L: float
    M_prime: float
    local_CT: float
    T: float
    branch: str
    inputs: dict = field(default_factory=dict)

    def local_CT_at(self, T: float) -> float:
        C0 = self.inputs["C0"]
        K0 = self.inputs["K0"]
        du0 = self.inputs["sup_du0"]
        return math.exp(self.M_prime * T) * ((C0 + 1.0) * K0 / 4.0 + 1.0) * (du0 + 1.0)


def cfl_dt(config: SolverConfig, geom: GridGeometry, c: Forcing) -> float:
    """Combined parabolic/advective step restriction for the explicit scheme."""
    h, n = geom.h, geom.dim
    cmax = c.max_abs(geom)
    if not np.isfinite(cmax) or not np.isfinite(h):
        raise ValueError("non-finite CFL inputs")
    parabolic = h * h / (2.0 * n * 2.0)
    advective = h / (cmax * math.sqrt(n) + 1e-30)
    return config.cfl_safety * min(parabolic, advective)


def _make_state(u0: ScalarField, c: Forcing, pin_mask) -> StepperState:
    cvals = c.grid_values(u0.geom)
    return StepperState(u0.geom, u0.values, cvals, pin_mask)


def step(u: ScalarField, dt: float, c: Forcing, eps: float,
         pin_mask: np.ndarray | None = None) -> ScalarField:
    """One explicit Euler step: u + dt (b^{ij}u_ij + c sqrt(eps^2 + RT^2))."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    state = _make_state(u, c, pin_mask)
    state.advance(1, dt, eps)
    out = ScalarField(u.geom, state.current.copy())
    return out.check_finite()


def lyapunov(u: ScalarField, c: Forcing, eps: float) -> float:
    """h^n * sum_inside [ sqrt(eps^2 + |Du|^2) - c(x) u ], fixed summation order."""
    g = u.geom
    filled = neumann_fill_ghosts(u)
    p = grad_central(filled)
    w = np.sqrt(eps * eps + np.sum(p * p, axis=0))
    cu = c.grid_values(g) * filled.values
    return g.cell_volume * float(np.sum((w - cu)[g.inside]))


def run(u0: ScalarField, config: SolverConfig, c: Forcing):
    """Advance to t_final; returns (final field, RunDiagnostics, snapshots).

    Snapshots are (t, values copy) pairs at the snapshot cadence (always
    including t = 0 and t_final). Deterministic for fixed inputs.
    """
    geom = u0.geom
    u0.check_finite()
    eps = config.epsilon if config.epsilon is not None else geom.h
    dt_raw = cfl_dt(config, geom, c)
    n_steps = int(math.ceil(config.t_final / dt_raw))
    if n_steps > MAX_TOTAL_STEPS:
        raise ValueError(f"run needs {n_steps} steps (> {MAX_TOTAL_STEPS})")
    dt = config.t_final / n_steps

    snap_every = config.snapshot_every or config.t_final / 20.0
    chunk = max(1, min(n_steps, int(round(snap_every / dt))))

    state = _make_state(u0, c, config.pin_mask)
    cvals = state.cvals.reshape(geom.shape)

    times = [0.0]
    snaps = [(0.0, u0.values.copy())] if config.store_snapshots else []
    filled0 = neumann_fill_ghosts(u0)
    max_w = [float(np.max(w_field(filled0, eps).inside_values()))]
    lips = [lipschitz_x(filled0)]
    sups_ut = [0.0]
    lyap = [lyapunov(u0, c, eps)]
    sup_u = [float(np.max(np.abs(u0.inside_values())))]

    done = 0
    while done < n_steps:
        k = min(chunk, n_steps - done)
        sup_du = state.advance(k, dt, eps)
        done += k
        t = done * dt
        vals = state.current
        if not np.all(np.isfinite(vals[geom.inside])):
            raise SolverAbort(f"non-finite field at t={t:.6g} (CFL violation or bad input)")
        f = neumann_fill_ghosts(ScalarField(geom, vals))
        times.append(t)
        max_w.append(float(np.max(w_field(f, eps).inside_values())))
        lips.append(lipschitz_x(f))
        sups_ut.append(sup_du / dt)
        lyap.append(g_lyap(f, cvals, eps, geom))
        sup_u.append(float(np.max(np.abs(f.inside_values()))))
        if config.store_snapshots:
            snaps.append((t, vals.copy()))

    diags = RunDiagnostics(
        t=np.array(times), max_w=np.array(max_w), lip_x=np.array(lips),
        sup_ut=np.array(sups_ut), lyapunov_E=np.array(lyap), sup_u=np.array(sup_u),
    )
    final = ScalarField(geom, state.current.copy()).check_finite()
    return final, diags, snaps


def g_lyap(filled: ScalarField, cvals: np.ndarray, eps: float, geom: GridGeometry) -> float:
    p = grad_central(filled)
    w = np.sqrt(eps * eps + np.sum(p * p, axis=0))
    return geom.cell_volume * float(np.sum((w - cvals * filled.values)[geom.inside]))


def predicted_bounds(u0_stats, c_stats, metrics: BoundaryMetrics,
                     delta: float, n: int, T: float) -> PredictedBounds:
    """A-priori constants from sup norms of the data.

    u0_stats = (sup |u0|, sup |Du0|, sup |D^2 u0|); c_stats = (sup c, sup |Dc|).
    The global bound follows the proof branches on the sign of C0 and is a
    conservative envelope, not a sharp constant.
    """
    sup_u0, sup_du0, sup_d2u0 = (float(v) for v in u0_stats)
    sup_c, sup_dc = (float(v) for v in c_stats)
    if min(sup_u0, sup_du0, sup_d2u0, sup_c, sup_dc) < 0:
        raise ValueError("sup norms must be nonnegative")
    C0, K0 = metrics.C0, metrics.K0

    M = n * n * sup_d2u0 + sup_c * math.sqrt(1.0 + sup_du0 * sup_du0)

    if delta <= 0:
        raise ValueError("delta must be positive for the global branch")
    if C0 > 0.0:
        core = (C0 * K0 / 4.0 + 1.0) * (2.0 * M * sup_c) / (n * delta)
        branch = "boundary(C0>0)"
    elif C0 == 0.0:
        delta1 = delta / (2.0 * (sup_c + 2.0 * n / K0))
        core = (delta1 * K0 / 4.0 + 1.0) * (2.0 * M * sup_c) / (n * (delta / 2.0))
        branch = "boundary(C0=0,delta1)"
    else:
        core = (2.0 * M * sup_c) / (n * delta)
        branch = "interior(C0<0)"
    global_L = max(sup_du0 + 1.0, core)

    M_prime = 2.0 * n * (abs(C0) + 1.0) / K0 + sup_dc + (abs(C0) + 1.0) * sup_c + 1.0
    local_CT = math.exp(M_prime * T) * ((C0 + 1.0) * K0 / 4.0 + 1.0) * (sup_du0 + 1.0)

    return PredictedBounds(
        M=M, global_L=global_L, M_prime=M_prime, local_CT=local_CT, T=T, branch=branch,
        inputs=dict(sup_u0=sup_u0, sup_du0=sup_du0, sup_d2u0=sup_d2u0,
                    sup_c=sup_c, sup_dc=sup_dc, C0=C0, K0=K0, delta=delta, n=n),
    )


def comparison_check(u0_low: ScalarField, u0_high: ScalarField,
                     config: SolverConfig, c: Forcing, tol: float = 1e-12) -> bool:
    """Run both fields and check ordering at every snapshot and cell.

    Violations beyond `tol` count as failures (the scheme is monotone up to
    the documented centered cross-term caveat).
    """
    gap0 = u0_high.values[u0_low.geom.inside] - u0_low.values[u0_low.geom.inside]
    if np.min(gap0) < 0:
        raise ValueError("initial data not ordered: u0_low must be <= u0_high")
    _, _, snaps_lo = run(u0_low, config, c)
    _, _, snaps_hi = run(u0_high, config, c)
    inside = u0_low.geom.inside
    for (t_lo, v_lo), (t_hi, v_hi) in zip(snaps_lo, snaps_hi):
        assert t_lo == t_hi
        if float(np.min((v_hi - v_lo)[inside])) < -tol:
            return False
    return True
