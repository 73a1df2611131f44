"""Domain geometry on masked Cartesian grids.

Domains are a rectangle, a disk, or a truncated parabolic channel
    {(x1, x2) : |x2| < (m/2) x1^2 + k,  |x1| < x_max}.
A grid is cell-centered and uniform; the domain enters through an inside
mask plus a ring of ghost cells carrying analytic outward normals and a
mirror plan used for the homogeneous Neumann fill.

Also computes the two geometric constants of the forcing condition:
    C0 = max over the boundary of (-lambda), lambda a principal curvature
         w.r.t. the outward normal,
    K0 = min over boundary points x of the largest diameter 2r with
         B(x - r n(x), r) inside the domain,
and evaluates the condition margin
    (1/n) c^2 - |Dc| - delta - max(0, C0 |c| + 2 n C0 / K0)
on a dense interior sample.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class GridTooCoarseError(ValueError):
    """Grid spacing too large to resolve the domain interior."""


# ---------------------------------------------------------------------------
# Domain specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box given by half-extents per axis."""

    half_extents: tuple[float, ...]

    def __post_init__(self):
        if len(self.half_extents) < 2:
            raise ValueError("rectangle needs dimension >= 2")
        if any(e <= 0 for e in self.half_extents):
            raise ValueError("half extents must be positive")

    @property
    def dim(self) -> int:
        return len(self.half_extents)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        ext = np.asarray(self.half_extents)
        return np.all(np.abs(pts) < ext, axis=-1)

    def bounding_extents(self) -> tuple[float, ...]:
        return self.half_extents


@dataclass(frozen=True)
class Disk:
    """Ball of given radius centered at the origin (any dimension >= 2)."""

    radius: float
    dim: int = 2

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.sum(pts * pts, axis=-1) < self.radius ** 2

    def bounding_extents(self) -> tuple[float, ...]:
        return (self.radius,) * self.dim


@dataclass(frozen=True)
class Channel:
    """Nonconvex channel |x2| < f(x1) with f(x) = (m/2) x^2 + k, truncated at |x1| < x_max.

    Only n = 2 is supported.
    """

    m: float
    k: float
    x_max: float

    def __post_init__(self):
        if self.m <= 0 or self.k <= 0 or self.x_max <= 0:
            raise ValueError("m, k, x_max must be positive")

    @property
    def dim(self) -> int:
        return 2

    def f(self, x1):
        return 0.5 * self.m * np.asarray(x1, dtype=float) ** 2 + self.k

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        return (np.abs(x2) < self.f(x1)) & (np.abs(x1) < self.x_max)

    def bounding_extents(self) -> tuple[float, ...]:
        return (self.x_max, float(self.f(self.x_max)))


DomainSpec = Rectangle | Disk | Channel


@dataclass(frozen=True)
class BoundaryMetrics:
    """Geometric constants of the forcing condition."""

    C0: float
    K0: float

    def __post_init__(self):
        if not self.K0 > 0:
            raise ValueError("K0 must be positive")


# ---------------------------------------------------------------------------
# Grid geometry
# ---------------------------------------------------------------------------

@dataclass
class GridGeometry:
    """Uniform cell-centered grid with inside mask and Neumann ghost plan.

    Ghost cells are the outside cells within Chebyshev distance 1 of an
    inside cell; they carry the analytic outward normal at their center, the
    index of the nearest inside cell, and a fill plan (source cells plus
    weights) realizing the first-order zero-normal-derivative extension.
    """

    spec: DomainSpec
    h: float
    axes: tuple[np.ndarray, ...]
    inside: np.ndarray                 # bool, full shape
    ghost: np.ndarray                  # bool, full shape
    ghost_dst: np.ndarray              # (K,) flat indices
    ghost_src: np.ndarray              # (K, S) flat indices
    ghost_w: np.ndarray                # (K, S) weights, rows sum to 1
    ghost_normals: np.ndarray          # (K, n) outward unit normals
    ghost_nearest_inside: np.ndarray   # (K, n) multi-indices
    inside_flat: np.ndarray = field(init=False)

    def __post_init__(self):
        self.inside_flat = np.flatnonzero(self.inside.ravel())

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def cell_centers(self) -> np.ndarray:
        """Coordinates of all cell centers, shape (*grid_shape, dim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def inside_centers(self) -> np.ndarray:
        return self.cell_centers()[self.inside]

    def interior_cells_per_axis(self) -> tuple[int, ...]:
        counts = []
        for ax in range(self.dim):
            other = tuple(i for i in range(self.dim) if i != ax)
            counts.append(int(np.any(self.inside, axis=other).sum()))
        return tuple(counts)

    def ghost_indices(self) -> np.ndarray:
        """Ghost cells as (K, n) multi-indices (same order as the ghost plan)."""
        return np.stack(np.unravel_index(self.ghost_dst, self.shape), axis=-1)

    def boundary_cells(self):
        """List of (cell index, outward unit normal, nearest inside index)."""
        idx = self.ghost_indices()
        return [
            (tuple(idx[i]), self.ghost_normals[i].copy(), tuple(self.ghost_nearest_inside[i]))
            for i in range(len(self.ghost_dst))
        ]


def _axis_coords(spec: DomainSpec, h: float, pad: int) -> tuple[np.ndarray, ...]:
    if isinstance(spec, Rectangle):
        axes = []
        for e in spec.half_extents:
            n_cells = max(int(round(2.0 * e / h)), 1)
            idx = np.arange(-pad, n_cells + pad)
            axes.append(-e + (idx + 0.5) * h)
        return tuple(axes)
    # Disk / Channel: lattice centers through the origin
    axes = []
    for e in spec.bounding_extents():
        j = int(math.ceil(e / h)) + pad
        axes.append(np.arange(-j, j + 1) * h)
    return tuple(axes)


def _outward_normal(spec: DomainSpec, x: np.ndarray) -> np.ndarray:
    if isinstance(spec, Disk):
        r = np.linalg.norm(x)
        return x / r if r > 0 else np.eye(len(x))[0]
    if isinstance(spec, Rectangle):
        ext = np.asarray(spec.half_extents)
        over = np.abs(x) - ext
        ax = int(np.argmax(over))
        n = np.zeros(len(x))
        n[ax] = math.copysign(1.0, x[ax])
        return n
    # Channel: wall side or parabola side, larger violation wins at corners
    wall_over = abs(x[0]) - spec.x_max
    para_over = abs(x[1]) - float(spec.f(x[0]))
    if wall_over >= para_over:
        return np.array([math.copysign(1.0, x[0]), 0.0])
    s = math.copysign(1.0, x[1]) if x[1] != 0 else 1.0
    g = np.array([-spec.m * x[0], s])  # grad(|x2| - f(x1)) = (-f'(x1), sign(x2))
    return g / np.linalg.norm(g)


def _closest_point_parabola(m: float, k: float, px: float, py: float) -> tuple[float, float]:
    """Closest point (t, f(t)) on x2 = (m/2) x1^2 + k to (px, py)."""
    # stationarity: (m^2/2) t^3 + (1 + m(k - py)) t - px = 0
    coeffs = [0.5 * m * m, 0.0, 1.0 + m * (k - py), -px]
    roots = np.roots(coeffs)
    ts = roots[np.abs(roots.imag) < 1e-9].real
    if ts.size == 0:
        ts = np.array([px])
    fy = 0.5 * m * ts ** 2 + k
    d2 = (ts - px) ** 2 + (fy - py) ** 2
    i = int(np.argmin(d2))
    return float(ts[i]), float(fy[i])


def _mirror_point(spec: DomainSpec, x: np.ndarray) -> np.ndarray:
    """Reflection of an outside point through the nearest boundary piece."""
    if isinstance(spec, Disk):
        r = np.linalg.norm(x)
        return x * ((2.0 * spec.radius - r) / r)
    if isinstance(spec, Channel):
        cands = []
        s = math.copysign(1.0, x[1]) if x[1] != 0 else 1.0
        t, fy = _closest_point_parabola(spec.m, spec.k, x[0], s * x[1])
        cp = np.array([t, s * fy])
        cands.append((np.linalg.norm(x - cp), cp))
        if abs(x[0]) > 0.5 * spec.x_max:
            wall = np.array([math.copysign(spec.x_max, x[0]), x[1]])
            cands.append((np.linalg.norm(x - wall), wall))
        _, cp = min(cands, key=lambda c: c[0])
        return 2.0 * cp - x
    raise TypeError("mirror points are only needed for curved domains")


def build_grid(spec: DomainSpec, h: float, min_interior: int = 8, pad: int = 2) -> GridGeometry:
    """Build the masked grid for a domain spec.

    Raises GridTooCoarseError when any axis has fewer than `min_interior`
    occupied interior columns.
    """
    if not (h > 0 and np.isfinite(h)):
        raise ValueError("h must be positive and finite")
    axes = _axis_coords(spec, h, pad)
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = spec.contains(centers)
    dim = len(axes)
    shape = inside.shape

    counts = []
    for ax in range(dim):
        other = tuple(i for i in range(dim) if i != ax)
        counts.append(int(np.any(inside, axis=other).sum()))
    if min(counts) < min_interior:
        raise GridTooCoarseError(
            f"interior resolves only {tuple(counts)} cells per axis; need >= {min_interior}"
        )

    # ghost ring: outside cells Chebyshev-adjacent to an inside cell
    dil = np.zeros_like(inside)
    for off in itertools.product((-1, 0, 1), repeat=dim):
        if all(o == 0 for o in off):
            continue
        src = tuple(slice(max(-o, 0), s - max(o, 0)) for o, s in zip(off, shape))
        dst = tuple(slice(max(o, 0), s - max(-o, 0)) for o, s in zip(off, shape))
        dil[dst] |= inside[src]
    ghost = dil & ~inside

    # no inside cell may touch the array edge (its stencil must exist)
    for ax in range(dim):
        edge = [slice(None)] * dim
        for end in (0, -1):
            edge[ax] = end
            if inside[tuple(edge)].any():
                raise AssertionError("inside cell on array edge; enlarge pad")

    ghost_idx = np.argwhere(ghost)
    K = len(ghost_idx)
    n_src = 2 ** dim
    ghost_dst = np.ravel_multi_index(ghost_idx.T, shape).astype(np.int64)
    ghost_src = np.zeros((K, n_src), dtype=np.int64)
    ghost_w = np.zeros((K, n_src), dtype=np.float64)
    normals = np.zeros((K, dim))
    nearest = np.zeros((K, dim), dtype=np.int64)

    axis0 = np.array([ax[0] for ax in axes])
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(dim)], dtype=np.int64)

    def flat(idx):
        return int(np.dot(idx, strides))

    for gi in range(K):
        idx = ghost_idx[gi]
        x = np.array([axes[d][idx[d]] for d in range(dim)])
        n_hat = _outward_normal(spec, x)
        normals[gi] = n_hat

        # nearest inside cell within the 3^n (falling back to 5^n) neighborhood
        best = None
        for radius in (1, 2):
            for off in itertools.product(range(-radius, radius + 1), repeat=dim):
                j = idx + np.array(off)
                if np.any(j < 0) or np.any(j >= shape):
                    continue
                if not inside[tuple(j)]:
                    continue
                xj = np.array([axes[d][j[d]] for d in range(dim)])
                d2 = float(np.sum((xj - x) ** 2))
                key = (d2, tuple(j))
                if best is None or key < best[0]:
                    best = (key, j, xj)
            if best is not None:
                break
        if best is None:
            raise AssertionError("ghost cell with no inside neighbor")
        nearest[gi] = best[1]

        if isinstance(spec, Rectangle):
            # exact index reflection across each violated face
            j = idx.copy()
            for d in range(dim):
                lo = pad
                hi = shape[d] - pad - 1
                if j[d] > hi:
                    j[d] = 2 * hi + 1 - j[d]
                elif j[d] < lo:
                    j[d] = 2 * lo - 1 - j[d]
            if not inside[tuple(j)]:
                j = best[1]
            ghost_src[gi, :] = flat(j)
            ghost_w[gi, 0] = 1.0
            continue

        # curved boundary: linear interpolation at the mirror point
        xm = _mirror_point(spec, x)
        fi = (xm - axis0) / h
        i0 = np.clip(np.floor(fi).astype(int), 0, np.array(shape) - 2)
        frac = fi - i0
        srcs, wts = [], []
        for corner in itertools.product((0, 1), repeat=dim):
            j = i0 + np.array(corner)
            w = float(np.prod([frac[d] if corner[d] else 1.0 - frac[d] for d in range(dim)]))
            if inside[tuple(j)] and w > 0:
                srcs.append(flat(j))
                wts.append(w)
        total = sum(wts)
        if total >= 0.25:
            wts = [w / total for w in wts]
        else:
            # shallow mirror: fall back to the best inward-aligned inside cell
            cand = None
            for off in itertools.product(range(-2, 3), repeat=dim):
                j = idx + np.array(off)
                if np.any(j < 0) or np.any(j >= shape) or not inside[tuple(j)]:
                    continue
                xj = np.array([axes[d][j[d]] for d in range(dim)])
                v = xj - x
                dist = np.linalg.norm(v)
                align = float(np.dot(v, -n_hat)) / dist
                key = (-align, dist, tuple(j))
                if cand is None or key < cand[0]:
                    cand = (key, j)
            srcs, wts = [flat(cand[1])], [1.0]
        for s_i, (sf, wv) in enumerate(zip(srcs, wts)):
            ghost_src[gi, s_i] = sf
            ghost_w[gi, s_i] = wv
        ghost_src[gi, len(srcs):] = srcs[0]

    return GridGeometry(
        spec=spec, h=h, axes=axes, inside=inside, ghost=ghost,
        ghost_dst=ghost_dst, ghost_src=ghost_src, ghost_w=ghost_w,
        ghost_normals=normals, ghost_nearest_inside=nearest,
    )


# ---------------------------------------------------------------------------
# Boundary constants
# ---------------------------------------------------------------------------

def principal_curvature_extreme(spec: DomainSpec) -> float:
    """C0: max over the boundary of minus a principal curvature."""
    if isinstance(spec, Disk):
        return -1.0 / spec.radius
    if isinstance(spec, Rectangle):
        return 0.0
    return spec.m  # parabola curvature m/(1+m^2 x^2)^(3/2), maximal at the vertex


def _channel_boundary_distance(spec: Channel, pts: np.ndarray) -> np.ndarray:
    """Distance from interior points to the channel boundary (incl. truncation wall)."""
    pts = np.atleast_2d(pts)
    out = np.empty(len(pts))
    for i, (px, py) in enumerate(pts):
        t, fy = _closest_point_parabola(spec.m, spec.k, px, abs(py))
        d_par = math.hypot(t - px, fy - abs(py))
        d_wall = spec.x_max - abs(px)
        out[i] = min(d_par, d_wall)
    return out


def _channel_ball_diameter(spec: Channel, s: float, r_hi: float) -> float:
    """K_x at the boundary point (s, f(s)): largest 2r with B(x - r n, r) inside."""
    fp = spec.m * s
    w = math.hypot(fp, 1.0)
    x = np.array([s, float(spec.f(s))])
    n_hat = np.array([-fp, 1.0]) / w

    def contained(r: float) -> bool:
        c = x - r * n_hat
        if abs(c[1]) >= float(spec.f(c[0])):
            return False
        d = float(_channel_boundary_distance(spec, c[None, :])[0])
        return d >= r * (1.0 - 1e-9)

    rs = np.geomspace(1e-4 * spec.k, r_hi, 64)
    last_ok = None
    first_bad = None
    for r in rs:
        if contained(float(r)):
            last_ok = float(r)
        else:
            first_bad = float(r)
            if last_ok is not None:
                break
    if last_ok is None:
        return 0.0
    if first_bad is None or first_bad < last_ok:
        return 2.0 * last_ok
    lo, hi = last_ok, first_bad
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if contained(mid):
            lo = mid
        else:
            hi = mid
    return 2.0 * lo


@lru_cache(maxsize=32)
def inscribed_ball_min(spec: DomainSpec, samples: int = 200) -> float:
    """K0: minimal boundary-touching inscribed-ball diameter."""
    if isinstance(spec, Disk):
        return 2.0 * spec.radius
    if isinstance(spec, Rectangle):
        return 2.0 * min(spec.half_extents)
    # channel: sample the parabola symmetrically and take the min of K_x
    r_hi = 4.0 * (spec.k + spec.x_max)
    ss = np.linspace(0.0, spec.x_max, samples)
    ss = np.concatenate([-ss[:0:-1], ss])  # mirror-symmetric sample
    best = math.inf
    for s in ss:
        best = min(best, _channel_ball_diameter(spec, float(s), r_hi))
    return best


def boundary_metrics(spec: DomainSpec) -> BoundaryMetrics:
    return BoundaryMetrics(C0=principal_curvature_extreme(spec), K0=inscribed_ball_min(spec))


# ---------------------------------------------------------------------------
# Forcing condition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    holds: bool
    worst_margin: float
    worst_point: tuple[float, ...]


def condition_margin(metrics: BoundaryMetrics, c, pts: np.ndarray, delta: float, n: int) -> np.ndarray:
    """Pointwise margin of the forcing condition; positive everywhere means it holds."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    cv = np.asarray(c.value(pts), dtype=float)
    dc = np.asarray(c.gradient(pts), dtype=float)
    dcn = np.linalg.norm(dc, axis=-1)
    rhs = np.maximum(0.0, metrics.C0 * np.abs(cv) + 2.0 * n * metrics.C0 / metrics.K0)
    return cv * cv / n - dcn - delta - rhs


def check_forcing_condition(spec: DomainSpec, c, delta: float,
                            sample_density: int = 64) -> ConditionReport:
    """Sample the condition margin on a dense interior grid."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = spec.dim
    ext = spec.bounding_extents()
    axes = [np.linspace(-e, e, sample_density + 2)[1:-1] for e in ext]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    pts = pts[spec.contains(pts)]
    metrics = boundary_metrics(spec)
    margin = condition_margin(metrics, c, pts, delta, n)
    i = int(np.argmin(margin))
    return ConditionReport(
        holds=bool(margin[i] > 0.0),
        worst_margin=float(margin[i]),
        worst_point=tuple(pts[i]),
    )
