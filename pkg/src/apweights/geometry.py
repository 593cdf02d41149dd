"""Ambient-space primitives for R^n with Lebesgue measure.

Balls, point clouds, distance fields with certified error bands, and a
Monte Carlo integrator stratified by dyadic distance shells around a closed
set, which keeps integrands such as dist(y, E)^(-alpha) bounded per stratum.
"""

from __future__ import annotations

import csv
import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtri
from scipy.stats import qmc

BRUTE_FORCE_LIMIT = 512
CELL_COVER_LIMIT = 2**20
SEQUENCES = ("pseudo-random", "low-discrepancy")

Integrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


def unit_ball_volume(n: int) -> float:
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    # v_n = (2 pi / n) v_{n-2}, starting from v_0 = 1 and v_1 = 2
    v = 1.0 if n % 2 == 0 else 2.0
    for k in range(2 + n % 2, n + 1, 2):
        v *= 2.0 * math.pi / k
    return v


def lebesgue_ball_measure(n: int, r: float) -> float:
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    power = 1.0
    for _ in range(n):
        power *= r
    return unit_ball_volume(n) * power


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float
    tag: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.center:
            raise ValueError("ball center must have at least one coordinate")
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise ValueError(f"ball radius must be positive and finite, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def measure(self) -> float:
        return lebesgue_ball_measure(self.dim, self.radius)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.center_array
        return c - self.radius, c + self.radius

    def contains(self, points: np.ndarray) -> np.ndarray:
        diff = np.atleast_2d(points) - self.center_array
        return np.einsum("ij,ij->i", diff, diff) < self.radius * self.radius

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor, self.tag)


@dataclass(frozen=True)
class MCConfig:
    seed: int = 0
    shells: int = 20
    samples_per_shell: int = 1024
    sequence: str = "pseudo-random"
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.shells < 1:
            raise ValueError(f"shells must be >= 1, got {self.shells}")
        if self.samples_per_shell < 16:
            raise ValueError(f"samples_per_shell must be >= 16, got {self.samples_per_shell}")
        if self.sequence not in SEQUENCES:
            raise ValueError(f"sequence must be one of {SEQUENCES}, got {self.sequence!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def generator(self, *key: int) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.Philox(seq))

    def uniforms(self, key: Sequence[int], count: int, dim: int) -> np.ndarray:
        """Uniforms on [0,1)^dim for one stratum; the key fixes the stream."""
        rng = self.generator(*key)
        if self.sequence == "pseudo-random":
            return rng.random((count, dim))
        with warnings.catch_warnings():
            # balance warnings for non power-of-two counts are expected
            warnings.simplefilter("ignore", UserWarning)
            return qmc.Sobol(dim, scramble=True, seed=rng).random(count)

    def with_samples(self, samples_per_shell: int) -> "MCConfig":
        return MCConfig(self.seed, self.shells, max(16, int(samples_per_shell)), self.sequence, self.workers)

    def map(self, fn, items):
        items = list(items)
        if self.workers == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.workers) as pool:
            return list(pool.map(fn, items))


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float = 0.0
    truncation_bound: float = 0.0
    samples_used: int = 0
    divergent: bool = False
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.std_error < 0 or self.truncation_bound < 0:
            raise ValueError("std_error and truncation_bound must be non-negative")
        if not self.divergent and not (math.isfinite(self.std_error) and math.isfinite(self.truncation_bound)):
            raise ValueError("non-finite error terms require the divergent flag")

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value))

    @classmethod
    def diverged(cls, value: float = math.inf, samples_used: int = 0, flags=()) -> "Estimate":
        return cls(value, math.inf, math.inf, samples_used, True, tuple(flags))

    @property
    def upper(self) -> float:
        return self.value + self.truncation_bound

    def to_dict(self) -> dict:
        return {
            "value": _finite_or_none(self.value),
            "std_error": _finite_or_none(self.std_error),
            "truncation_bound": _finite_or_none(self.truncation_bound),
            "samples_used": self.samples_used,
            "divergent": self.divergent,
        }


class Banded(NamedTuple):
    value: float
    lo: float
    hi: float


@dataclass(frozen=True, eq=False)
class PointCloud:
    dim: int
    points: np.ndarray
    resolution: float
    set_tag: str | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim)
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"points must have exactly {self.dim} coordinates")
        if len(pts) == 0:
            raise ValueError("point cloud must be non-empty")
        if not self.resolution >= 0:
            raise ValueError(f"resolution must be >= 0, got {self.resolution}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "resolution", float(self.resolution))

    def __len__(self) -> int:
        return len(self.points)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["dim", self.dim, "resolution", repr(self.resolution)])
            for row in self.points:
                writer.writerow([repr(float(x)) for x in row])

    @classmethod
    def read_csv(cls, path, set_tag: str | None = None) -> "PointCloud":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows or len(rows[0]) < 4 or rows[0][0] != "dim" or rows[0][2] != "resolution":
            raise ValueError(f"{path}: first line must be 'dim,<n>,resolution,<eps>'")
        dim, eps = int(rows[0][1]), float(rows[0][3])
        return cls(dim, np.array([[float(x) for x in r] for r in rows[1:]]), eps, set_tag)


# ---------------------------------------------------------------------------
# samplers: regions with a known sampling density covering a shell


class BoxUnion:
    """Uniform sampling over a union of axis-aligned boxes.

    Each draw picks a box with probability proportional to its volume and a
    uniform point in it; the weight volume/multiplicity makes the estimator
    unbiased for integrals over the union.
    """

    def __init__(self, lo: np.ndarray, hi: np.ndarray, multiplicity: Callable[[np.ndarray], np.ndarray]):
        self.lo = np.atleast_2d(lo)
        self.hi = np.atleast_2d(hi)
        self._multiplicity = multiplicity
        vols = np.prod(self.hi - self.lo, axis=1)
        self._cum = np.cumsum(vols)
        self.volume = float(self._cum[-1]) if len(vols) else 0.0

    @classmethod
    def few(cls, lo: np.ndarray, hi: np.ndarray) -> "BoxUnion":
        lo, hi = np.atleast_2d(lo), np.atleast_2d(hi)

        def count(points):
            inside = (points[:, None, :] >= lo[None]) & (points[:, None, :] <= hi[None])
            return inside.all(axis=2).sum(axis=1)

        return cls(lo, hi, count)

    def clipped(self, box_lo: np.ndarray, box_hi: np.ndarray) -> "BoxUnion | None":
        lo = np.maximum(self.lo, box_lo)
        hi = np.minimum(self.hi, box_hi)
        keep = np.all(hi > lo, axis=1)
        if not keep.any():
            return None
        # membership of points inside the clip window is unchanged by clipping
        return BoxUnion(lo[keep], hi[keep], self._multiplicity)

    def sample(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.searchsorted(self._cum, u[:, 0] * self.volume, side="right")
        idx = np.minimum(idx, len(self._cum) - 1)
        pts = self.lo[idx] + u[:, 1:] * (self.hi[idx] - self.lo[idx])
        mult = np.maximum(self._multiplicity(pts), 1)
        return pts, self.volume / mult


def _directions(u: np.ndarray) -> np.ndarray:
    n = u.shape[1]
    if n == 1:
        return np.where(u[:, :1] < 0.5, -1.0, 1.0)
    z = ndtri(np.clip(u, 1e-15, 1 - 1e-15))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


class Annulus:
    """Uniform sampling in {r_lo <= |y - center| < r_hi}, optionally restricted
    to a planar angular sector."""

    def __init__(self, center: np.ndarray, r_lo: float, r_hi: float, sector: tuple[float, float] | None = None):
        self.center = np.asarray(center, dtype=float)
        self.r_lo, self.r_hi = float(r_lo), float(r_hi)
        self.sector = sector if self.center.size == 2 else None
        n = self.center.size
        frac = 1.0 if self.sector is None else (self.sector[1] - self.sector[0]) / (2 * math.pi)
        self.volume = frac * unit_ball_volume(n) * (self.r_hi**n - self.r_lo**n)

    def sample(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.center.size
        lo_n, hi_n = self.r_lo**n, self.r_hi**n
        radius = (lo_n + u[:, 0] * (hi_n - lo_n)) ** (1.0 / n)
        if self.sector is not None:
            theta = self.sector[0] + u[:, 1] * (self.sector[1] - self.sector[0])
            dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        else:
            dirs = _directions(u[:, 1:])
        pts = self.center + radius[:, None] * dirs
        return pts, np.full(len(pts), self.volume)


# ---------------------------------------------------------------------------
# distance fields


class DistanceField:
    """Distance to a closed set E with a certified band.

    ``distance`` returns the field the integrator stratifies by; the true
    dist(., E) lies within ``resolution`` below it.
    """

    dim: int
    resolution: float = 0.0

    def distance(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inf_on_ball(self, ball: Ball) -> float:
        return max(float(self.distance(ball.center_array[None])[0]) - ball.radius, 0.0)

    def sup_on_ball(self, ball: Ball) -> float:
        return float(self.distance(ball.center_array[None])[0]) + ball.radius

    def exact_sup(self, ball: Ball) -> float | None:
        return None

    def exact_inf(self, ball: Ball) -> float | None:
        return None

    def shell_sampler(self, ball: Ball, lo: float, hi: float):
        """Sampler for a superset of {lo <= dist < hi} inside the ball's box, or None."""
        return None


def _sector(center: np.ndarray, ball: Ball) -> tuple[float, float] | None:
    if center.size != 2:
        return None
    v = ball.center_array - center
    d = float(np.hypot(*v))
    if d <= ball.radius * 1.0000001:
        return None
    half = math.asin(ball.radius / d)
    theta = math.atan2(v[1], v[0])
    return theta - half, theta + half


class PointDistance(DistanceField):
    def __init__(self, point: Sequence[float]):
        self.point = np.asarray(point, dtype=float).ravel()
        self.dim = self.point.size

    def distance(self, points):
        return np.linalg.norm(np.atleast_2d(points) - self.point, axis=1)

    def exact_sup(self, ball):
        return float(np.linalg.norm(ball.center_array - self.point)) + ball.radius

    def exact_inf(self, ball):
        return max(float(np.linalg.norm(ball.center_array - self.point)) - ball.radius, 0.0)

    inf_on_ball = exact_inf
    sup_on_ball = exact_sup

    def shell_sampler(self, ball, lo, hi):
        return Annulus(self.point, lo, hi, _sector(self.point, ball))


class SubspaceDistance(DistanceField):
    """Distance to the coordinate subspace spanned by the first m axes."""

    def __init__(self, m: int, n: int):
        if not 0 <= m < n:
            raise ValueError(f"need 0 <= m < n, got m={m}, n={n}")
        self.m, self.dim = m, n

    def distance(self, points):
        return np.linalg.norm(np.atleast_2d(points)[:, self.m:], axis=1)

    def exact_sup(self, ball):
        return float(np.linalg.norm(ball.center_array[self.m:])) + ball.radius

    def exact_inf(self, ball):
        return max(float(np.linalg.norm(ball.center_array[self.m:])) - ball.radius, 0.0)

    inf_on_ball = exact_inf
    sup_on_ball = exact_sup

    def shell_sampler(self, ball, lo, hi):
        if self.m == 0:
            return Annulus(np.zeros(self.dim), lo, hi, _sector(np.zeros(self.dim), ball))
        blo, bhi = ball.bbox()
        slab_lo = np.concatenate([blo[: self.m], np.full(self.dim - self.m, -hi)])
        slab_hi = np.concatenate([bhi[: self.m], np.full(self.dim - self.m, hi)])
        return BoxUnion.few(slab_lo[None], slab_hi[None])


class SphereDistance(DistanceField):
    """Distance to the origin-centred sphere of the given radius."""

    def __init__(self, radius: float, n: int):
        self.radius, self.dim = float(radius), n

    def distance(self, points):
        return np.abs(np.linalg.norm(np.atleast_2d(points), axis=1) - self.radius)

    def exact_sup(self, ball):
        c = float(np.linalg.norm(ball.center_array))
        return max(c + ball.radius - self.radius, self.radius - max(c - ball.radius, 0.0))

    def exact_inf(self, ball):
        c = float(np.linalg.norm(ball.center_array))
        return max(abs(c - self.radius) - ball.radius, 0.0)

    inf_on_ball = exact_inf
    sup_on_ball = exact_sup

    def shell_sampler(self, ball, lo, hi):
        origin = np.zeros(self.dim)
        return Annulus(origin, max(self.radius - hi, 0.0), self.radius + hi, _sector(origin, ball))


class SquareBoundaryDistance(DistanceField):
    """Distance to the boundary of the unit square [0,1]^2."""

    dim = 2

    def distance(self, points):
        pts = np.atleast_2d(points)
        clipped = np.clip(pts, 0.0, 1.0)
        outside = np.linalg.norm(pts - clipped, axis=1)
        inside = np.minimum(pts, 1.0 - pts).min(axis=1)
        return np.where(outside > 0, outside, np.maximum(inside, 0.0))

    def shell_sampler(self, ball, lo, hi):
        a = hi
        lo_b = np.array([[-a, -a], [-a, 1 - a], [-a, -a], [1 - a, -a]])
        hi_b = np.array([[1 + a, a], [1 + a, 1 + a], [a, 1 + a], [1 + a, 1 + a]])
        return BoxUnion.few(lo_b, hi_b)


def _pairwise_min(points: np.ndarray, cloud: np.ndarray) -> np.ndarray:
    out = np.empty(len(points))
    step = max(1, 2**16 // max(len(cloud), 1))
    for i in range(0, len(points), step):
        diff = points[i : i + step, None, :] - cloud[None]
        out[i : i + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))
    return out


class CloudDistance(DistanceField):
    """Nearest-neighbour distance to a point cloud.

    Small clouds are searched by brute force; larger ones through a k-d tree.
    Shell covers are unions of grid cells next to occupied ones, cached per
    dyadic cell size; very fine levels fall back to overlapping boxes around
    a grid net of the cloud.
    """

    def __init__(self, cloud: PointCloud):
        self.cloud = cloud
        self.dim = cloud.dim
        self.resolution = cloud.resolution
        self._tree = cKDTree(cloud.points) if len(cloud) >= BRUTE_FORCE_LIMIT else None
        self._nets: dict[int, tuple[np.ndarray, cKDTree]] = {}
        self._covers: dict[tuple[int, int], np.ndarray | None] = {}
        self._lock = threading.RLock()

    def distance(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._tree is None:
            return _pairwise_min(pts, self.cloud.points)
        return self._tree.query(pts)[0]

    def net(self, level: int) -> tuple[np.ndarray, cKDTree]:
        """One cloud point per grid cell of side 2^-level, in cloud order."""
        with self._lock:
            if level not in self._nets:
                cells = np.floor(self.cloud.points * 2.0**level).astype(np.int64)
                _, first = np.unique(cells, axis=0, return_index=True)
                centers = self.cloud.points[np.sort(first)]
                self._nets[level] = (centers, cKDTree(centers))
            return self._nets[level]

    def cell_cover(self, level: int, reach: int) -> np.ndarray | None:
        """Integer indices of the grid cells (side 2^-level) within `reach`
        cells of an occupied one, or None when there would be too many."""
        with self._lock:
            key = (level, reach)
            if key not in self._covers:
                occupied = np.floor(self.net(level)[0] * 2.0**level).astype(np.int64)
                width = 2 * reach + 1
                if len(occupied) * width**self.dim > CELL_COVER_LIMIT:
                    self._covers[key] = None
                else:
                    axes = [np.arange(-reach, reach + 1)] * self.dim
                    offsets = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
                    grown = (occupied[:, None, :] + offsets[None]).reshape(-1, self.dim)
                    base = grown.min(axis=0)
                    shape = tuple(grown.max(axis=0) - base + 1)
                    flat = np.unique(np.ravel_multi_index(tuple((grown - base).T), shape))
                    self._covers[key] = np.column_stack(np.unravel_index(flat, shape)) + base
            return self._covers[key]

    def shell_sampler(self, ball, lo, hi):
        level = math.ceil(math.log2(2.0 / hi))
        centers, tree = self.net(level)
        cell = 2.0**-level
        a = hi + cell
        blo, bhi = ball.bbox()
        near = np.all((centers > blo - a) & (centers < bhi + a), axis=1)
        if not near.any():
            return None
        reach = math.ceil(hi / cell)
        cells = self.cell_cover(level, reach)
        if cells is not None:
            cells = cells * cell
            keep = np.all((cells < bhi) & (cells + cell > blo), axis=1)
            if not keep.any():
                return None
            return BoxUnion(cells[keep], cells[keep] + cell, lambda points: np.ones(len(points)))

        # too many cells: overlapping boxes around the net, weighted by overlap count
        def count(points):
            return tree.query_ball_point(points, r=a, p=np.inf, return_length=True)

        sel = centers[near]
        return BoxUnion(sel - a, sel + a, count)


def distance_to_set(x: Sequence[float], oracle: DistanceField) -> Banded:
    d = float(oracle.distance(np.asarray(x, dtype=float)[None])[0])
    return Banded(d, max(d - oracle.resolution, 0.0), d)


def _grid_in_ball(ball: Ball, per_axis: int) -> tuple[np.ndarray, float]:
    """Grid over the ball's box with outside nodes projected onto the ball,
    plus the fill radius of the result."""
    n = ball.dim
    axes = [np.linspace(c - ball.radius, c + ball.radius, per_axis) for c in ball.center]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    diff = grid - ball.center_array
    norm = np.linalg.norm(diff, axis=1)
    # projected nodes sit a hair inside so the sample max never exceeds the true sup
    scale = np.where(norm > ball.radius, ball.radius * (1 - 1e-12) / np.maximum(norm, 1e-300), 1.0)
    h = 2 * ball.radius / (per_axis - 1)
    return ball.center_array + diff * scale[:, None], h * math.sqrt(n) / 2


def _grid_size(n: int) -> int:
    return {1: 4097, 2: 257, 3: 41}.get(n, 9)


def sup_distance_on_ball(ball: Ball, oracle: DistanceField) -> Banded:
    exact = oracle.exact_sup(ball)
    if exact is not None:
        return Banded(exact, exact, exact)
    pts, fill = _grid_in_ball(ball, _grid_size(ball.dim))
    top = float(oracle.distance(pts).max())
    return Banded(top, top, top + fill + oracle.resolution)


def inf_distance_on_ball(ball: Ball, oracle: DistanceField) -> Banded:
    exact = oracle.exact_inf(ball)
    if exact is not None:
        return Banded(exact, exact, exact)
    pts, fill = _grid_in_ball(ball, _grid_size(ball.dim))
    low = float(oracle.distance(pts).min())
    return Banded(low, max(low - fill - oracle.resolution, 0.0), low)


# ---------------------------------------------------------------------------
# shell-stratified integration


@dataclass
class _Stratum:
    integral: float = 0.0
    variance: float = 0.0
    measure: float = 0.0
    samples: int = 0
    hits: int = 0
    scaled_max: float = 0.0
    volume: float = 0.0


def _sample_stratum(ball, integrand, oracle, alpha, cfg, key, lo, hi, include_values, window=None) -> _Stratum:
    n = ball.dim
    box_lo, box_hi = ball.bbox()
    if window is not None:
        box_lo, box_hi = np.maximum(box_lo, window[0]), np.minimum(box_hi, window[1])
        if np.any(box_hi <= box_lo):
            return _Stratum(samples=0, hits=0, volume=0.0)
    box = BoxUnion.few(box_lo[None], box_hi[None])
    sampler = oracle.shell_sampler(ball, lo, hi)
    if isinstance(sampler, BoxUnion):
        sampler = sampler.clipped(box_lo, box_hi)
    if sampler is None or sampler.volume >= box.volume:
        sampler = box
    count = cfg.samples_per_shell
    u = cfg.uniforms(key, count, n + 1)
    pts, weights = sampler.sample(u)
    d = oracle.distance(pts)
    mask = ball.contains(pts) & (d >= lo) & (d < hi)
    if window is not None:
        mask &= np.all((pts >= window[0]) & (pts <= window[1]), axis=1)
    out = _Stratum(samples=count, hits=int(mask.sum()), volume=sampler.volume)
    ind = weights * mask
    out.measure = float(ind.mean())
    if out.hits == 0:
        return out
    values = np.zeros(count)
    values[mask] = integrand(pts[mask], d[mask])
    dm = d[mask]
    pos = dm > 0
    out.scaled_max = float(np.max(np.abs(values[mask][pos]) * dm[pos] ** alpha, initial=0.0))
    if include_values:
        contrib = weights * values
        out.integral = float(contrib.mean())
        out.variance = float(contrib.var(ddof=1) / count)
    return out


def integrate_over_ball(
    ball: Ball,
    integrand: Integrand,
    oracle: DistanceField,
    singular_exponent: float,
    cfg: MCConfig,
    *,
    stream: int = 0,
    window: tuple[np.ndarray, np.ndarray] | None = None,
) -> Estimate:
    """Integral of ``integrand(points, dist)`` over ``ball``.

    The integrand receives sample points and their distances to E and may
    blow up like dist^(-singular_exponent) near E. Shells are sampled
    independently; for a positive exponent the innermost core is never
    evaluated and its contribution is bounded from the decay of the shell
    measures instead. An optional box ``window`` (lo, hi) declares where the
    integrand can be nonzero; sampling is restricted to it.
    """
    if window is not None:
        window = (np.asarray(window[0], dtype=float), np.asarray(window[1], dtype=float))
    alpha = float(singular_exponent)
    n = ball.dim
    K = cfg.shells
    d_min = oracle.inf_on_ball(ball)
    D = oracle.sup_on_ball(ball)
    if D <= 0:
        return Estimate.exact(0.0)
    edges = [D * 2.0**-k for k in range(K + 1)]
    strata = [(k, edges[k + 1], edges[k]) for k in range(K)] + [(K, 0.0, edges[K])]
    live = [s for s in strata if s[2] > d_min]

    def run(s):
        k, lo, hi = s
        include = k < K or alpha <= 0
        return _sample_stratum(ball, integrand, oracle, alpha, cfg, (stream, k), lo, hi, include, window)

    results = dict(zip((s[0] for s in live), cfg.map(run, live)))
    samples = sum(r.samples for r in results.values())
    flags = []

    evaluated = {k: r for k, r in results.items() if k < K or alpha <= 0}
    deep = [evaluated[k] for k in range(max(K - 4, 0), K + 1) if k in evaluated]
    if any(r.hits for r in deep):
        # zero here means the integrand vanishes near E at the resolved scales
        c_near = max(r.scaled_max for r in deep)
    else:
        c_near = max((r.scaled_max for r in evaluated.values()), default=0.0)

    meets = d_min == 0.0
    if alpha >= n and meets and c_near > 0:
        return Estimate.diverged(samples_used=samples, flags=("divergent",))

    value, variance, trunc = 0.0, 0.0, 0.0
    for k, lo, hi in live:
        r = results[k]
        if k == K and alpha > 0:
            continue
        if r.hits == 0:
            if r.volume > 0 and c_near > 0:
                flags.append("insufficient-samples")
                top = lo**-alpha if alpha > 0 else hi**-alpha
                trunc += c_near * top * 3.0 * r.volume / r.samples
            continue
        value += r.integral
        variance += r.variance

    if alpha > 0 and K in results and c_near > 0:
        core = results[K]
        span = min(4, K)
        m_core = core.measure
        if core.hits == 0:
            m_core = 3.0 * core.volume / core.samples if core.samples else 0.0
            q_m = 0.0
        else:
            m_outer = m_core + sum(results[k].measure for k in range(K - span, K) if k in results)
            q_m = (m_core / m_outer) ** (1.0 / span) if m_outer > 0 else 0.0
        q = 2.0**alpha * q_m
        if q >= 1.0:
            return Estimate.diverged(value, samples, flags=tuple(flags) + ("divergent",))
        rho = edges[K]
        trunc += c_near * 2.0**alpha * rho**-alpha * m_core * (1.0 - q_m) / (1.0 - q)

    return Estimate(value, math.sqrt(variance), trunc, samples, False, tuple(dict.fromkeys(flags)))
