"""Arc-family analytics and stationary-set machinery on the parabolic channel.

For f(x) = (m/2) x^2 + k, the constant-curvature arcs meeting the boundary
at right angles have center and radius
    p(a) = (a/2 - k/(m a), 0),
    r(a) = (a/2 + k/(m a)) sqrt(m^2 a^2 + 1),
    r'(a) = (m^2 a^2 + 1/2 - k/(m a^2)) / sqrt(m^2 a^2 + 1),
with a single critical point a* = sqrt(-1 + sqrt(1 + 16 m k)) / (2m) and
r_min = r(a*). The region U(a) (two-disk intersection with the channel) is
a set-theoretic stationary solution exactly when the forcing equals 1/r(a);
for c in (0, 1/r_min) there are two such arcs a1 < a* < a2, and exponential
barrier schedules a1 -/+ l e^{-delta t} sandwich the evolution for any
delta below an explicit delta_0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .fields import ScalarField, smoothstep, SMOOTHSTEP_MAX_SLOPE
from .geometry import Channel, GridGeometry


@dataclass(frozen=True)
class ChannelParams:
    m: float
    k: float

    def __post_init__(self):
        if self.m <= 0 or self.k <= 0:
            raise ValueError("m and k must be positive")

    def f(self, x):
        return 0.5 * self.m * np.asarray(x, dtype=float) ** 2 + self.k


def p_center(params: ChannelParams, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.stack([0.5 * a - params.k / (params.m * a), np.zeros_like(a)], axis=-1)


def r_of(params: ChannelParams, a):
    a = np.asarray(a, dtype=float)
    return (0.5 * a + params.k / (params.m * a)) * np.sqrt(params.m ** 2 * a ** 2 + 1.0)


def r_prime(params: ChannelParams, a):
    a = np.asarray(a, dtype=float)
    m, k = params.m, params.k
    return (m * m * a * a + 0.5 - k / (m * a * a)) / np.sqrt(m * m * a * a + 1.0)


def a_star(params: ChannelParams) -> float:
    m, k = params.m, params.k
    return math.sqrt(-1.0 + math.sqrt(1.0 + 16.0 * m * k)) / (2.0 * m)


def channel_r_min(params: ChannelParams) -> float:
    return float(r_of(params, a_star(params)))


@dataclass
class ArcFamily:
    """Bundle of the arc evaluators with the derived critical quantities."""

    params: ChannelParams

    def __post_init__(self):
        self.a_star = a_star(self.params)
        self.r_min = channel_r_min(self.params)

    def p(self, a):
        return p_center(self.params, a)

    def r(self, a):
        return r_of(self.params, a)

    def r_prime(self, a):
        return r_prime(self.params, a)


def solve_radii(params: ChannelParams, c: float) -> tuple[float, float]:
    """The two arcs with curvature c: r(a1) = r(a2) = 1/c, a1 < a* < a2."""
    rmin = channel_r_min(params)
    if not 0.0 < c < 1.0 / rmin:
        if abs(c - 1.0 / rmin) <= 1e-12 / rmin:
            raise ValueError("c = 1/r_min is tangential (single root a*)")
        raise ValueError(f"c must lie in (0, 1/r_min) = (0, {1.0 / rmin:.6g})")
    target = 1.0 / c
    a_s = a_star(params)

    lo = a_s
    while float(r_of(params, lo)) < target:
        lo *= 0.5
        if lo < 1e-300:
            raise RuntimeError("bracket growth failed on the left branch")
    a1 = brentq(lambda a: float(r_of(params, a)) - target, lo, a_s, xtol=1e-15, rtol=1e-15)

    hi = a_s
    while float(r_of(params, hi)) < target:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("bracket growth failed on the right branch")
    a2 = brentq(lambda a: float(r_of(params, a)) - target, a_s, hi, xtol=1e-15, rtol=1e-15)

    for ai in (a1, a2):
        if abs(float(r_of(params, ai)) - target) > 1e-10 * target:
            raise RuntimeError("radius solve did not meet residual tolerance")
    return float(a1), float(a2)


def right_angle_residual(params: ChannelParams, a: float) -> float:
    """|<(a, f(a)) - p(a), n_boundary(a)>| / r(a); zero iff the arc is perpendicular."""
    fa = float(params.f(a))
    join = np.array([a, fa]) - p_center(params, np.asarray(float(a)))
    n_hat = np.array([-params.m * a, 1.0]) / math.hypot(params.m * a, 1.0)
    return abs(float(join @ n_hat)) / float(r_of(params, a))


# ---------------------------------------------------------------------------
# Stationary sets U(a)
# ---------------------------------------------------------------------------

def u_region_predicate(params: ChannelParams, a: float, x_max: float | None = None):
    """Membership test for U(a) = Omega ∩ B(p(a), r(a)) ∩ B(p~(a), r(a))."""
    pc = p_center(params, np.asarray(a)).ravel()
    r2 = float(r_of(params, a)) ** 2
    px = float(pc[0])

    def contains(pts):
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        in_omega = np.abs(x2) < params.f(x1)
        if x_max is not None:
            in_omega &= np.abs(x1) < x_max
        d_plus = (x1 - px) ** 2 + x2 ** 2
        d_minus = (x1 + px) ** 2 + x2 ** 2
        return in_omega & (d_plus < r2) & (d_minus < r2)

    return contains


def build_U_mask(params: ChannelParams, a: float, grid: GridGeometry):
    """Indicator field of U(a) on a channel grid plus the analytic predicate."""
    spec = grid.spec
    if not isinstance(spec, Channel):
        raise TypeError("build_U_mask needs a Channel grid")
    if float(np.abs(p_center(params, np.asarray(a))[..., 0])) + float(r_of(params, a)) > spec.x_max:
        warnings.warn("arc family exits the truncation window; enlarge x_max")
    pred = u_region_predicate(params, a, spec.x_max)
    vals = np.zeros(grid.shape)
    inside_pts = grid.cell_centers()
    vals[pred(inside_pts) & grid.inside] = 1.0
    return ScalarField(grid, vals), pred


# ---------------------------------------------------------------------------
# Barrier schedules
# ---------------------------------------------------------------------------

def bound_constant_C(params: ChannelParams, L: float) -> float:
    """sup over (0, L] of |p'(a)| + r'(a) in its closed displayed form."""
    m, k = params.m, params.k

    def expr(a):
        s = m * m * a * a
        w = math.sqrt(s + 1.0)
        return 0.5 + (s + 0.5) / w + m * k / (s + 1.0 + w)

    aa = np.linspace(L * 1e-6, L, 20001)
    vals = np.array([expr(float(a)) for a in aa])
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = float(aa[max(0, i - 1)])
    hi = float(aa[min(len(aa) - 1, i + 1)])
    res = minimize_scalar(lambda a: -expr(a), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return max(best, -float(res.fun), expr(1e-12), expr(L))


def h_stall(params: ChannelParams, a1: float, a) -> np.ndarray:
    """h(a) = (a1 - a) / (1/r(a1) - 1/r(a)), patched at the removable a = a1."""
    a = np.asarray(a, dtype=float)
    r1 = float(r_of(params, a1))
    limit = -r1 * r1 / float(r_prime(params, a1))
    ra = r_of(params, a)
    denom = 1.0 / r1 - 1.0 / ra
    near = np.abs(a - a1) < 1e-9 * max(a1, 1.0)
    safe = np.where(near, 1.0, denom)
    return np.where(near, limit, (a1 - a) / safe)


def sup_h_stall(params: ChannelParams, a1: float, l1: float, l2: float) -> float:
    lo, hi = a1 - l1, a1 + l2
    aa = np.linspace(lo, hi, 20001)
    vals = h_stall(params, a1, aa)
    i = int(np.argmax(vals))
    best = float(vals[i])
    blo = float(aa[max(0, i - 1)])
    bhi = float(aa[min(len(aa) - 1, i + 1)])
    res = minimize_scalar(lambda a: -float(h_stall(params, a1, np.asarray(a))),
                          bounds=(blo, bhi), method="bounded", options={"xatol": 1e-13})
    return max(best, -float(res.fun))


def delta0(params: ChannelParams, a1: float, l1: float, l2: float) -> float:
    """Barrier decay-rate bound delta_0 = 1 / (C * sup h) for the schedules."""
    if not 0 < l1 < a1:
        raise ValueError("need 0 < l1 < a1")
    _, a2 = solve_radii(params, 1.0 / float(r_of(params, a1)))
    if not 0 < l2 < a2 - a1:
        raise ValueError("need 0 < l2 < a2 - a1 (h blows up at a2)")
    C = bound_constant_C(params, a1 + l2)
    sup_h = sup_h_stall(params, a1, l1, l2)
    return 1.0 / (C * sup_h)


@dataclass(frozen=True)
class BarrierSchedule:
    """a(t) = a1 -/+ l e^{-delta t}; direction 'sub' shrinks from below."""

    a1: float
    l1: float
    l2: float
    delta: float
    direction: str

    def __post_init__(self):
        if self.direction not in ("sub", "super"):
            raise ValueError("direction must be 'sub' or 'super'")
        if not 0 < self.l1 < self.a1:
            raise ValueError("need 0 < l1 < a1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


def barrier_a(schedule: BarrierSchedule, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if schedule.direction == "sub":
        return schedule.a1 - schedule.l1 * np.exp(-schedule.delta * t)
    return schedule.a1 + schedule.l2 * np.exp(-schedule.delta * t)


# ---------------------------------------------------------------------------
# Initial data and convergence metric
# ---------------------------------------------------------------------------

def arc_index(params: ChannelParams, pts: np.ndarray, a_lo: float, a_hi: float,
              x_max: float | None = None, iters: int = 48) -> np.ndarray:
    """Smallest arc parameter a with x in U(a), clamped to [a_lo, a_hi].

    Bisection on the nested family; points already in U(a_lo) report a_lo,
    points outside U(a_hi) report a_hi plus one bracket width.
    """
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 2)
    in_lo = u_region_predicate(params, a_lo, x_max)(flat)
    in_hi = u_region_predicate(params, a_hi, x_max)(flat)
    lo = np.full(len(flat), a_lo)
    hi = np.full(len(flat), a_hi)
    out = np.empty(len(flat))
    band = ~in_lo & in_hi
    lo_b = lo[band]
    hi_b = hi[band]
    sub = flat[band]
    for _ in range(iters):
        mid = 0.5 * (lo_b + hi_b)
        # membership per candidate a: evaluate pointwise (vectorized over points
        # sharing the same mid is impossible here, so test each point's own mid)
        pc = p_center(params, mid)
        rr = np.asarray(r_of(params, mid))
        d_plus = (sub[:, 0] - pc[:, 0]) ** 2 + sub[:, 1] ** 2
        d_minus = (sub[:, 0] + pc[:, 0]) ** 2 + sub[:, 1] ** 2
        member = (d_plus < rr * rr) & (d_minus < rr * rr)
        hi_b = np.where(member, mid, hi_b)
        lo_b = np.where(member, lo_b, mid)
    out[band] = hi_b
    out[in_lo] = a_lo
    out[~in_hi] = a_hi + (a_hi - a_lo)
    return out.reshape(pts.shape[:-1])


def check_nesting(params: ChannelParams, grid: GridGeometry, a_lo: float, a_hi: float,
                  samples: int = 9) -> None:
    """Verify U(a) nesting cell-wise across [a_lo, a_hi]; raise on violation."""
    prev = None
    for a in np.linspace(a_lo, a_hi, samples):
        mask, _ = build_U_mask(params, float(a), grid)
        cur = mask.values > 0.5
        if prev is not None and np.any(prev & ~cur):
            raise RuntimeError("U(a) nesting violated on the barrier interval")
        prev = cur


def make_initial_data(params: ChannelParams, a1: float, l1: float, l2: float,
                      alpha: float, beta: float, grid: GridGeometry) -> ScalarField:
    """Arc-index quintic profile: beta on U(a1-l1), alpha outside U(a1+l2).

    Level sets are members of the arc family, hence meet the boundary at
    right angles (Neumann compatible by construction).
    """
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    if (l1 + l2) / grid.h < 6.0:
        raise ValueError("grid too coarse: need >= 6 cells across l1 + l2")
    spec = grid.spec
    x_max = spec.x_max if isinstance(spec, Channel) else None
    a_of_x = arc_index(params, grid.cell_centers(), a1 - l1, a1 + l2, x_max)
    s = np.clip((a1 + l2 - a_of_x) / (l1 + l2), 0.0, 1.0)
    vals = alpha + (beta - alpha) * smoothstep(s)
    # exact plateaus
    pred_lo = u_region_predicate(params, a1 - l1, x_max)(grid.cell_centers())
    pred_hi = u_region_predicate(params, a1 + l2, x_max)(grid.cell_centers())
    vals[pred_lo] = beta
    vals[~pred_hi] = alpha
    return ScalarField(grid, vals)


def arc_distance(params: ChannelParams, pts: np.ndarray, a: float) -> np.ndarray:
    """Distance proxy to the two stationarity arcs: min over the circles of ||x-p| - r|."""
    pts = np.asarray(pts, dtype=float)
    pc = p_center(params, np.asarray(a)).ravel()
    r = float(r_of(params, a))
    d_plus = np.abs(np.hypot(pts[..., 0] - pc[0], pts[..., 1]) - r)
    d_minus = np.abs(np.hypot(pts[..., 0] + pc[0], pts[..., 1]) - r)
    return np.minimum(d_plus, d_minus)


def convergence_metric(u: ScalarField, params: ChannelParams, a1: float,
                       alpha: float, beta: float, band: float) -> float:
    """Mean |u - limit| over inside cells farther than `band` from the arcs of U(a1)."""
    grid = u.geom
    spec = grid.spec
    x_max = spec.x_max if isinstance(spec, Channel) else None
    pts = grid.cell_centers()
    pred = u_region_predicate(params, a1, x_max)
    target = np.where(pred(pts), beta, alpha)
    keep = grid.inside & (arc_distance(params, pts, a1) > band)
    if not keep.any():
        raise ValueError("exclusion band covers the whole interior")
    dev = np.abs(u.values - target)[keep]
    return float(np.mean(dev))


def initial_lipschitz_bound(params: ChannelParams, a1: float, l1: float, l2: float,
                            alpha: float, beta: float) -> float:
    """Upper bound for |grad u0|: max S' / ((l1+l2) * min_a,theta dX/da . n)."""
    aa = np.linspace(a1 - l1, a1 + l2, 2001)
    m = params.m
    lo = math.inf
    for a in aa:
        p_dot = 0.5 + params.k / (m * a * a)
        rp = float(r_prime(params, a))
        cos_min = 1.0 / math.hypot(m * a, 1.0)   # theta at the boundary contact
        speed = min(p_dot + rp, p_dot * cos_min + rp)
        lo = min(lo, speed)
    if lo <= 0:
        raise RuntimeError("arc family not expanding on the barrier interval")
    return (beta - alpha) * SMOOTHSTEP_MAX_SLOPE / ((l1 + l2) * lo)
