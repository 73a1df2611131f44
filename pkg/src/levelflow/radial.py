"""Radially symmetric theory on the ball B(0, R).

The flow reduces to the singular first-order equation
    phi_t - ((n-1)/r) phi_r - c(r) |phi_r| = 0   on (0, R),
    phi_r(R) = 0,
with no condition needed at r = 0. The large-time profile is determined by
the region classification
    A  = { r : c(r) = (n-1)/r },   A+/- = { c >< (n-1)/r },
through the attractor map d(r) and phi_inf(r0) = max{ u0(r) : r >= d(r0) }.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from ._stepper import _radial_chunk
from .fields import Forcing


def _as_radial_callable(c):
    if isinstance(c, Forcing):
        return lambda r: np.asarray(c.radial(r), dtype=float)
    return lambda r: np.asarray(c(np.asarray(r, dtype=float)), dtype=float)


@dataclass
class RadialProblem:
    n: int
    R: float
    c: object          # Forcing with a radial profile, or callable r -> c(r)
    u0: object         # callable r -> u0(r)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be >= 2")
        if self.R <= 0:
            raise ValueError("R must be positive")
        self._c = _as_radial_callable(self.c)
        rr = np.linspace(self.R * 1e-6, self.R, 4097)
        cv = self._c(rr)
        if np.any(cv < -1e-12):
            raise ValueError("radial forcing must be nonnegative on (0, R]")
        u = np.asarray(self.u0(rr), dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("u0 must be finite on [0, R]")
        du_end = (self.u0(self.R) - self.u0(self.R * (1 - 1e-6))) / (self.R * 1e-6)
        if abs(du_end) > 1e-3 * (1.0 + np.max(np.abs(u))):
            raise ValueError("u0'(R) must vanish (Neumann compatibility)")

    def c_at(self, r):
        return self._c(r)

    def g_at(self, r):
        """g(r) = c(r) - (n-1)/r; A is its zero set."""
        r = np.asarray(r, dtype=float)
        return self._c(r) - (self.n - 1.0) / r


@dataclass
class RegionClassification:
    R: float
    tol_r: float
    a_intervals: list        # closed [lo, hi], possibly degenerate lo == hi
    plus_intervals: list
    minus_intervals: list

    def label_of(self, r0: float) -> str:
        for lo, hi in self.a_intervals:
            if lo - self.tol_r <= r0 <= hi + self.tol_r:
                return "A"
        for lo, hi in self.plus_intervals:
            if lo <= r0 <= hi:
                return "A+"
        return "A-"

    def r_min(self) -> float:
        """min A, or R when A is empty."""
        if not self.a_intervals:
            return self.R
        return min(lo for lo, _ in self.a_intervals)


def _zero_tol(n: int, r: float) -> float:
    return max(1e-10, 1e-6 * (n - 1.0) / r)


def classify(problem: RadialProblem, tol_r: float = 1e-6, samples: int = 8192) -> RegionClassification:
    """Locate A, A+, A- by dense sampling with bisection refinement.

    Transversal sign changes and tangential touch points both become
    (possibly degenerate) closed A intervals.
    """
    if tol_r <= 0:
        raise ValueError("tol_r must be positive")
    R, n = problem.R, problem.n
    rr = np.linspace(R / samples, R, samples)
    gg = problem.g_at(rr)
    tol = np.maximum(1e-10, 1e-6 * (n - 1.0) / rr)
    state = np.where(np.abs(gg) <= tol, 0, np.where(gg > 0, 1, -1))

    def refine_flip(lo, hi, pred):
        """pred flips between lo (True) and hi (False); bisect the flip point."""
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if pred(mid):
                lo = mid
            else:
                hi = mid
            if abs(hi - lo) <= tol_r * 0.25:
                break
        return 0.5 * (lo + hi)

    def in_zone(r):
        return abs(float(problem.g_at(r))) <= _zero_tol(n, r)

    a_marks = []        # list of (lo, hi)
    # runs of in-tolerance samples
    i = 0
    while i < samples:
        if state[i] == 0:
            j = i
            while j + 1 < samples and state[j + 1] == 0:
                j += 1
            lo = rr[i] if i == 0 else refine_flip(rr[i], rr[i - 1], in_zone)
            hi = rr[j] if j == samples - 1 else refine_flip(rr[j], rr[j + 1], in_zone)
            a_marks.append((min(lo, hi), max(lo, hi)))
            i = j + 1
        else:
            i += 1

    # transversal crossings between consecutive nonzero samples
    for i in range(samples - 1):
        if state[i] != 0 and state[i + 1] != 0 and state[i] != state[i + 1]:
            root = brentq(lambda r: float(problem.g_at(r)), rr[i], rr[i + 1], xtol=1e-14)
            a_marks.append((root, root))

    # tangential touches: minima of |g| interior to same-sign runs
    ag = np.abs(gg)
    for i in range(1, samples - 1):
        if state[i] != 0 and state[i - 1] == state[i] == state[i + 1] \
                and ag[i] < ag[i - 1] and ag[i] < ag[i + 1]:
            res = minimize_scalar(lambda r: abs(float(problem.g_at(r))),
                                  bracket=(rr[i - 1], rr[i], rr[i + 1]), method="golden",
                                  options={"xtol": 1e-12})
            r_star = float(res.x)
            if 0 < r_star <= R and abs(float(problem.g_at(r_star))) <= _zero_tol(n, r_star):
                a_marks.append((r_star, r_star))

    # merge overlapping / near-duplicate A intervals
    a_marks.sort()
    merged = []
    for lo, hi in a_marks:
        if merged and lo <= merged[-1][1] + tol_r:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))

    # complementary intervals between consecutive A intervals
    plus, minus = [], []
    bounds = [0.0]
    for lo, hi in merged:
        bounds.extend([lo, hi])
    bounds.append(R)
    for lo, hi in zip(bounds[0::2], bounds[1::2]):
        if hi - lo <= tol_r:
            continue
        mid = 0.5 * (lo + hi)
        (plus if float(problem.g_at(mid)) > 0 else minus).append((lo, hi))

    return RegionClassification(R=R, tol_r=tol_r, a_intervals=merged,
                                plus_intervals=plus, minus_intervals=minus)


def d_of(r0: float, regions: RegionClassification, R: float) -> float:
    """Attractor map d(r0) of the large-time profile."""
    if not 0 < r0 <= R:
        raise ValueError("r0 must lie in (0, R]")
    label = regions.label_of(r0)
    if label == "A":
        return r0
    if label == "A+":
        below = [hi for lo, hi in regions.a_intervals if hi < r0]
        if not below:
            raise RuntimeError("A+ point with no A below: classification inconsistent "
                               "(g -> -inf as r -> 0 forces a crossing)")
        return max(below)
    above = [lo for lo, hi in regions.a_intervals if lo > r0]
    return min(above) if above else R


def phi_infinity(r0: float, problem: RadialProblem, regions: RegionClassification) -> float:
    """Large-time profile max{ u0(r) : r >= d(r0) }."""
    lo = d_of(r0, regions, problem.R)
    rr = np.linspace(lo, problem.R, 4001)
    uu = np.asarray(problem.u0(rr), dtype=float)
    best = float(np.max(uu))
    i = int(np.argmax(uu))
    a = rr[max(0, i - 1)]
    b = rr[min(len(rr) - 1, i + 1)]
    if b > a:
        res = minimize_scalar(lambda r: -float(problem.u0(np.asarray(r))),
                              bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


@dataclass
class RadialSolution:
    r: np.ndarray
    phi: np.ndarray
    t: float
    snapshots: list

    def interp(self, r):
        return np.interp(np.asarray(r, dtype=float), self.r, self.phi)


def solve_radial(problem: RadialProblem, h: float, T: float,
                 cfl_safety: float = 0.9, snapshot_every: float | None = None) -> RadialSolution:
    """Monotone explicit scheme for the radial evolution equation.

    Nodes sit at (j + 1/2) h (no node at the singular r = 0); transport
    (n-1)/r phi_r is upwinded from the right, the forcing uses the 1D
    Godunov magnitude max(D+ phi, -D- phi, 0); symmetry ghost at 0 and
    Neumann mirror at R. CFL: dt <= safety * h / ((n-1)/(h/2) + c_max).
    """
    R, n = problem.R, problem.n
    if h > R / 16:
        raise ValueError("need h <= R/16")
    N = int(round(R / h))
    h = R / N
    r = (np.arange(N) + 0.5) * h
    adv = (n - 1.0) / r
    cv = problem.c_at(r)
    if np.any(cv < 0):
        raise ValueError("forcing must be nonnegative")
    phi0 = np.asarray(problem.u0(r), dtype=np.float64)

    if T == 0:
        return RadialSolution(r=r, phi=phi0.copy(), t=0.0, snapshots=[(0.0, phi0.copy())])

    cmax = float(np.max(cv))
    dt_raw = cfl_safety * h / ((n - 1.0) / (0.5 * h) + cmax)
    n_steps = int(math.ceil(T / dt_raw))
    dt = T / n_steps

    snap_every = snapshot_every or T
    chunk = max(1, min(n_steps, int(round(snap_every / dt))))

    buf_a = phi0.copy()
    buf_b = phi0.copy()
    parity = 0
    done = 0
    snapshots = [(0.0, phi0.copy())]
    while done < n_steps:
        k = min(chunk, n_steps - done)
        _radial_chunk(buf_a, buf_b, parity, adv, cv, dt, 1.0 / h, k)
        parity = (parity + k) % 2
        done += k
        cur = buf_a if parity == 0 else buf_b
        if not np.all(np.isfinite(cur)):
            raise FloatingPointError(f"radial solve went non-finite at t={done * dt:.6g}")
        snapshots.append((done * dt, cur.copy()))

    cur = buf_a if parity == 0 else buf_b
    return RadialSolution(r=r, phi=cur.copy(), t=T, snapshots=snapshots)


def eta1_curve(r0: float, problem: RadialProblem, t_max: float,
               n_samples: int = 513) -> tuple[np.ndarray, np.ndarray]:
    """Slowest reversed characteristic: eta' = -c(eta) + (n-1)/eta, held at R.

    Returns (s, eta(s)) sampled on [0, t_max]; once the curve reaches R it
    stays there. Stalling near an A point is convergence to equilibrium.
    """
    R, n = problem.R, problem.n
    if not 0 < r0 <= R:
        raise ValueError("r0 must lie in (0, R]")
    ss = np.linspace(0.0, t_max, n_samples)
    if r0 >= R * (1 - 1e-13):
        return ss, np.full_like(ss, R)

    def rhs(_, y):
        r = min(max(y[0], 1e-12), R)
        return [float(-problem.c_at(np.asarray(r)) + (n - 1.0) / r)]

    def hit_R(_, y):
        return y[0] - R
    hit_R.terminal = True
    hit_R.direction = 1.0

    sol = solve_ivp(rhs, (0.0, t_max), [r0], method="RK45", events=hit_R,
                    dense_output=True, rtol=1e-10, atol=1e-12, max_step=t_max / 50)
    eta = np.empty_like(ss)
    t_end = sol.t[-1]
    before = ss <= t_end
    eta[before] = sol.sol(ss[before])[0]
    eta[~before] = R
    if sol.status == 1:  # absorbed at R
        eta[ss >= sol.t_events[0][0]] = R
    return ss, np.minimum(eta, R)


def component_constancy(r: np.ndarray, phi: np.ndarray,
                        regions: RegionClassification) -> list:
    """Oscillation of phi over each connected component of (0,R) \\ int(A).

    Returns [(lo, hi, max phi - min phi over nodes in the component)].
    """
    interiors = [(lo, hi) for lo, hi in regions.a_intervals if hi - lo > regions.tol_r]
    bounds = [0.0]
    for lo, hi in interiors:
        bounds.extend([lo, hi])
    bounds.append(regions.R)
    out = []
    for lo, hi in zip(bounds[0::2], bounds[1::2]):
        if hi <= lo:
            continue
        mask = (r >= lo) & (r <= hi)
        if mask.sum() >= 1:
            vals = phi[mask]
            out.append((lo, hi, float(vals.max() - vals.min())))
        else:
            out.append((lo, hi, 0.0))
    return out
