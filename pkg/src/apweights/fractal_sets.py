"""Canonical closed sets with known Assouad dimension.

Points, coordinate subspaces, spheres, the square boundary, middle Cantor
sets and attractors of similitude systems, in particular the planar antenna
system. Each set can be discretised into a PointCloud and paired with a
distance field (closed form where one exists).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .geometry import (
    BoxUnion,
    CloudDistance,
    DistanceField,
    PointCloud,
    PointDistance,
    SphereDistance,
    SquareBoundaryDistance,
    SubspaceDistance,
)

DEFAULT_POINT_CAP = 2**22
DEFAULT_WINDOW = 8.0


class BudgetError(RuntimeError):
    """Raised when a requested discretisation exceeds the point budget."""


@dataclass(frozen=True)
class Similitude:
    scale: float
    matrix: tuple[tuple[float, ...], ...]
    translation: tuple[float, ...]

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if not 0 < self.scale < 1:
            raise ValueError(f"similitude scale must lie in (0,1), got {self.scale}")
        if A.shape != (len(self.translation),) * 2:
            raise ValueError("linear part and translation dimensions differ")
        sv = np.linalg.svd(A, compute_uv=False)
        if not np.allclose(sv, self.scale, rtol=1e-12, atol=0):
            raise ValueError("linear part is not scale times an orthogonal matrix")

    @classmethod
    def planar(cls, multiplier: complex, shift: complex) -> "Similitude":
        a, b = multiplier.real, multiplier.imag
        return cls(abs(multiplier), ((a, -b), (b, a)), (shift.real, shift.imag))

    @classmethod
    def linear(cls, scale: float, shift: float) -> "Similitude":
        return cls(scale, ((scale,),), (shift,))

    @property
    def dim(self) -> int:
        return len(self.translation)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ np.asarray(self.matrix).T + np.asarray(self.translation)

    def fixed_point(self) -> np.ndarray:
        A = np.asarray(self.matrix)
        return np.linalg.solve(np.eye(self.dim) - A, np.asarray(self.translation))


@dataclass(frozen=True)
class IfsSystem:
    dim: int
    maps: tuple[Similitude, ...]
    open_set_condition: bool = False

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise ValueError("an IFS needs at least one map")
        if any(m.dim != self.dim for m in self.maps):
            raise ValueError("all maps must act on the declared dimension")

    @property
    def max_scale(self) -> float:
        return max(m.scale for m in self.maps)

    def bounding_box(self, iterations: int = 200) -> tuple[np.ndarray, np.ndarray]:
        """A box containing the attractor.

        Starts from a ball that every map sends into itself and shrinks it by
        box images; every iterate still contains the attractor.
        """
        c = self.maps[0].fixed_point()
        rho = max(np.linalg.norm(m(c)[0] - c) / (1 - m.scale) for m in self.maps)
        lo, hi = c - rho, c + rho
        corners = np.array(list(itertools.product((0.0, 1.0), repeat=self.dim)))
        for _ in range(iterations):
            box = lo + corners * (hi - lo)
            imgs = np.vstack([m(box) for m in self.maps])
            new_lo, new_hi = np.maximum(imgs.min(axis=0), lo), np.minimum(imgs.max(axis=0), hi)
            if np.allclose(new_lo, lo, rtol=0, atol=1e-15) and np.allclose(new_hi, hi, rtol=0, atol=1e-15):
                break
            lo, hi = new_lo, new_hi
        return lo, hi

    def diameter_bound(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))


def antenna_ifs(alpha: float) -> IfsSystem:
    if not 0 < alpha < 0.5:
        raise ValueError(f"antenna parameter must lie in (0, 1/2), got {alpha}")
    maps = (
        Similitude.planar(0.5, 0),
        Similitude.planar(0.5, 0.5),
        Similitude.planar(alpha * 1j, 0.5),
        Similitude.planar(-alpha * 1j, 0.5 + alpha * 1j),
    )
    return IfsSystem(2, maps, open_set_condition=True)


def cantor_ifs(ratio: float) -> IfsSystem:
    if not 0 < ratio < 0.5:
        raise ValueError(f"Cantor ratio must lie in (0, 1/2), got {ratio}")
    return IfsSystem(1, (Similitude.linear(ratio, 0.0), Similitude.linear(ratio, 1.0 - ratio)), True)


VARIANTS = ("point", "subspace", "sphere", "cantor", "antenna", "square-boundary", "ifs")


@dataclass(frozen=True)
class CanonicalSet:
    variant: str
    ambient_dim: int
    parameter: float | None = None
    system: IfsSystem | None = None

    def __post_init__(self):
        v, n, a = self.variant, self.ambient_dim, self.parameter
        if v not in VARIANTS:
            raise ValueError(f"unknown set variant {v!r}")
        if n < 1:
            raise ValueError("ambient dimension must be >= 1")
        if v == "subspace" and not (a is not None and float(a).is_integer() and 0 <= a < n):
            raise ValueError(f"subspace dimension must be an integer in [0, {n}), got {a}")
        if v == "sphere" and not (a is not None and a > 0 and n >= 1):
            raise ValueError("sphere radius must be positive")
        if v == "cantor" and not (a is not None and 0 < a < 0.5):
            raise ValueError(f"Cantor ratio must lie in (0, 1/2), got {a}")
        if v == "antenna" and not (a is not None and 0 < a < 0.5 and n == 2):
            raise ValueError(f"antenna needs parameter in (0, 1/2) in the plane, got {a} in R^{n}")
        if v == "square-boundary" and n != 2:
            raise ValueError("the square boundary lives in the plane")
        if v == "ifs" and (self.system is None or self.system.dim != n):
            raise ValueError("an attractor set needs an IFS of matching dimension")

    @classmethod
    def point(cls, n: int = 2) -> "CanonicalSet":
        return cls("point", n)

    @classmethod
    def subspace(cls, m: int, n: int) -> "CanonicalSet":
        return cls("subspace", n, float(m))

    @classmethod
    def sphere(cls, radius: float = 1.0, n: int = 2) -> "CanonicalSet":
        return cls("sphere", n, float(radius))

    @classmethod
    def cantor(cls, ratio: float = 1 / 3, n: int = 1) -> "CanonicalSet":
        return cls("cantor", n, float(ratio))

    @classmethod
    def antenna(cls, alpha: float = 0.25) -> "CanonicalSet":
        return cls("antenna", 2, float(alpha))

    @classmethod
    def square_boundary(cls) -> "CanonicalSet":
        return cls("square-boundary", 2)

    @classmethod
    def attractor(cls, system: IfsSystem) -> "CanonicalSet":
        return cls("ifs", system.dim, None, system)

    @property
    def spec(self) -> str:
        if self.parameter is None:
            return self.variant
        if self.variant == "subspace":
            return f"subspace:{int(self.parameter)}"
        return f"{self.variant}:{self.parameter!r}"

    @property
    def ifs(self) -> IfsSystem | None:
        if self.variant == "cantor":
            return cantor_ifs(self.parameter)
        if self.variant == "antenna":
            return antenna_ifs(self.parameter)
        return self.system


def parse_set(spec: str, ambient_dim: int | None = None) -> CanonicalSet:
    """Parse strings such as 'antenna:0.25', 'cantor:0.333333', 'subspace:1'."""
    name, _, arg = spec.strip().partition(":")
    name = name.strip().lower()
    defaults = {"point": 2, "subspace": 2, "sphere": 2, "cantor": 1, "antenna": 2, "square-boundary": 2}
    if name not in defaults:
        raise ValueError(f"unknown set {spec!r}; expected one of {sorted(defaults)}")
    n = ambient_dim or defaults[name]
    if name in ("point", "square-boundary"):
        if arg:
            raise ValueError(f"set {name!r} takes no parameter")
        return CanonicalSet(name, n)
    if name == "sphere" and not arg:
        return CanonicalSet.sphere(1.0, n)
    if not arg:
        raise ValueError(f"set {name!r} needs a parameter, e.g. '{name}:<value>'")
    return CanonicalSet(name, n, float(arg))


def antenna_dimension(alpha: float) -> float:
    """Root in (1,2) of 2*2^-l + 2*alpha^l = 1."""
    if not 0 < alpha < 0.5:
        raise ValueError(f"antenna parameter must lie in (0, 1/2), got {alpha}")

    def f(lam):
        return 2.0 * 2.0**-lam + 2.0 * alpha**lam - 1.0

    if not (f(1.0) > 0 > f(2.0)):
        raise ArithmeticError("no sign change of the dimension equation on (1, 2)")
    return bisect(f, 1.0, 2.0, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)


def theoretical_assouad_dim(s: CanonicalSet) -> float | None:
    if s.variant == "point":
        return 0.0
    if s.variant == "subspace":
        return float(s.parameter)
    if s.variant == "sphere":
        return float(s.ambient_dim - 1)
    if s.variant == "square-boundary":
        return 1.0
    if s.variant == "cantor":
        return math.log(2) / math.log(1 / s.parameter)
    if s.variant == "antenna":
        return antenna_dimension(s.parameter)
    return None


def attractor_cloud(system: IfsSystem, depth: int, *, cap: int = DEFAULT_POINT_CAP, dedupe: bool = False) -> PointCloud:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if len(system.maps) ** depth > cap:
        raise BudgetError(f"{len(system.maps)}^{depth} points exceed the cap of {cap}")
    pts = system.maps[0].fixed_point()[None]
    for _ in range(depth):
        pts = np.vstack([m(pts) for m in system.maps])
    resolution = system.max_scale**depth * system.diameter_bound()
    if dedupe and resolution > 0:
        keys = np.round(pts / (resolution / 4)).astype(np.int64)
        _, first = np.unique(keys, axis=0, return_index=True)
        pts = pts[np.sort(first)]
    return PointCloud(system.dim, pts, resolution)


def _embed(points: np.ndarray, n: int) -> np.ndarray:
    if points.shape[1] == n:
        return points
    return np.hstack([points, np.zeros((len(points), n - points.shape[1]))])


def _check_cap(count: float, cap: int):
    if count > cap:
        raise BudgetError(f"{int(count)} points exceed the cap of {cap}")


def canonical_cloud(
    s: CanonicalSet, target_resolution: float, *, window: float = DEFAULT_WINDOW, cap: int = DEFAULT_POINT_CAP
) -> PointCloud:
    if not target_resolution > 0:
        raise ValueError("target resolution must be positive")
    n, res = s.ambient_dim, target_resolution
    if s.variant == "point":
        return PointCloud(n, np.zeros((1, n)), 0.0, s.spec)
    if s.variant == "subspace":
        m = int(s.parameter)
        if m == 0:
            return PointCloud(n, np.zeros((1, n)), 0.0, s.spec)
        per_axis = math.ceil(2 * window * math.sqrt(m) / (2 * res)) + 1
        _check_cap(per_axis**m, cap)
        axis = np.linspace(-window, window, per_axis)
        grid = np.stack(np.meshgrid(*[axis] * m, indexing="ij"), axis=-1).reshape(-1, m)
        h = axis[1] - axis[0]
        return PointCloud(n, _embed(grid, n), h * math.sqrt(m) / 2, f"{s.spec};window={window!r}")
    if s.variant == "sphere":
        R = s.parameter
        if n == 1:
            return PointCloud(1, np.array([[-R], [R]]), 0.0, s.spec)
        if n == 2:
            count = math.ceil(2 * math.pi * R / res)
            _check_cap(count, cap)
            theta = 2 * math.pi * np.arange(count) / count
            pts = R * np.column_stack([np.cos(theta), np.sin(theta)])
            return PointCloud(2, pts, math.pi * R / count, s.spec)
        # grid on the faces of the cube [-1,1]^n pushed radially onto the sphere;
        # radial projection from the cube surface is 1-Lipschitz
        per_axis = math.ceil(2 * R * math.sqrt(n - 1) / (2 * res)) + 1
        _check_cap(2 * n * per_axis ** (n - 1), cap)
        axis = np.linspace(-1.0, 1.0, per_axis)
        face = np.stack(np.meshgrid(*[axis] * (n - 1), indexing="ij"), axis=-1).reshape(-1, n - 1)
        faces = []
        for k in range(n):
            for sign in (-1.0, 1.0):
                faces.append(np.insert(face, k, sign, axis=1))
        pts = np.unique(np.vstack(faces), axis=0)
        pts = R * pts / np.linalg.norm(pts, axis=1, keepdims=True)
        h = axis[1] - axis[0]
        return PointCloud(n, pts, R * h * math.sqrt(n - 1) / 2, s.spec)
    if s.variant == "square-boundary":
        per_side = math.ceil(1.0 / res)
        _check_cap(4 * per_side, cap)
        t = np.arange(per_side) / per_side
        zeros, ones = np.zeros(per_side), np.ones(per_side)
        pts = np.vstack(
            [
                np.column_stack([t, zeros]),
                np.column_stack([ones, t]),
                np.column_stack([1 - t, ones]),
                np.column_stack([zeros, 1 - t]),
            ]
        )
        return PointCloud(2, pts, 0.5 / per_side, s.spec)
    system = s.ifs
    depth = max(1, math.ceil(math.log(res / system.diameter_bound()) / math.log(system.max_scale)))
    cloud = attractor_cloud(system, depth, cap=cap, dedupe=True)
    return PointCloud(n, _embed(cloud.points, n), cloud.resolution, s.spec)


def decorated_square_cloud(alpha: float, target_resolution: float, *, cap: int = DEFAULT_POINT_CAP) -> PointCloud:
    """Unit square boundary with each side replaced by an outward antenna copy.

    The base segment [0,1] x {0} lies in the antenna, so the four sides of
    the square stay in the set while the decorations sit outside it.
    """
    K = canonical_cloud(CanonicalSet.antenna(alpha), target_resolution, cap=cap // 4)
    x, y = K.points[:, 0], K.points[:, 1]
    copies = [
        np.column_stack([x, -y]),
        np.column_stack([1 + y, x]),
        np.column_stack([1 - x, 1 + y]),
        np.column_stack([-y, 1 - x]),
    ]
    return PointCloud(2, np.vstack(copies), K.resolution, f"decorated-square:{alpha!r}")


# ---------------------------------------------------------------------------
# distance fields


def _cantor_distance_1d(x: np.ndarray, ratio: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.where(x < 0, -x, np.where(x > 1, x - 1, 0.0))
    active = (x >= 0) & (x <= 1)
    pos = np.where(active, x, 0.0)
    scale = np.ones_like(pos)
    gap_lo, gap_hi = ratio, 1.0 - ratio
    while active.any():
        in_gap = active & (pos > gap_lo) & (pos < gap_hi)
        out = np.where(in_gap, scale * np.minimum(pos - gap_lo, gap_hi - pos), out)
        active &= ~in_gap
        right = pos >= gap_hi
        pos = np.where(right, (pos - gap_hi) / ratio, pos / ratio)
        scale = scale * ratio
        active &= scale > 1e-20
    return out


class CantorDistance(DistanceField):
    """Exact distance to the middle Cantor set placed on the first axis."""

    def __init__(self, ratio: float, n: int = 1):
        self.ratio, self.dim = float(ratio), n

    def distance(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = _cantor_distance_1d(pts[:, 0], self.ratio)
        if self.dim == 1:
            return d
        return np.sqrt(d * d + np.einsum("ij,ij->i", pts[:, 1:], pts[:, 1:]))

    def intervals(self, lo: float, hi: float, length: float, max_count: int = 2**15) -> tuple[np.ndarray, float]:
        """Left ends of the construction intervals of length at most ``length``
        (coarsened if there would be too many) meeting [lo, hi]."""
        starts, L = np.array([0.0]), 1.0
        while L > length:
            nxt = L * self.ratio
            cand = np.concatenate([starts, starts + L - nxt])
            cand = cand[(cand + nxt >= lo) & (cand <= hi)]
            if len(cand) > max_count:
                break
            starts, L = np.sort(cand), nxt
        return starts, L

    def shell_sampler(self, ball, lo, hi):
        blo, bhi = ball.bbox()
        starts, L = self.intervals(blo[0] - hi, bhi[0] + hi, hi)
        if len(starts) == 0:
            return None
        box_lo = np.tile(np.concatenate([[0.0], np.full(self.dim - 1, -hi)]), (len(starts), 1))
        box_hi = np.tile(np.concatenate([[0.0], np.full(self.dim - 1, hi)]), (len(starts), 1))
        box_lo[:, 0] = starts - hi
        box_hi[:, 0] = starts + L + hi
        lefts, rights = box_lo[:, 0].copy(), box_hi[:, 0].copy()

        def count(points):
            c = np.searchsorted(lefts, points[:, 0], side="right") - np.searchsorted(rights, points[:, 0], side="left")
            if self.dim > 1:
                c = c * np.all(np.abs(points[:, 1:]) <= hi, axis=1)
            return c

        return BoxUnion(box_lo, box_hi, count)


@functools.lru_cache(maxsize=64)
def distance_field(s: CanonicalSet, resolution: float | None = None) -> DistanceField:
    """Closed-form distance where available, otherwise a cloud at the given resolution."""
    n = s.ambient_dim
    if s.variant == "point":
        return PointDistance(np.zeros(n))
    if s.variant == "subspace":
        return SubspaceDistance(int(s.parameter), n)
    if s.variant == "sphere":
        return SphereDistance(s.parameter, n)
    if s.variant == "square-boundary":
        return SquareBoundaryDistance()
    if s.variant == "cantor":
        return CantorDistance(s.parameter, n)
    return CloudDistance(canonical_cloud(s, resolution or default_resolution(s)))


def default_resolution(s: CanonicalSet) -> float:
    return 2.0**-9 if s.variant == "antenna" else 2.0**-10


@functools.lru_cache(maxsize=8)
def decorated_square_field(alpha: float, resolution: float = 2.0**-9) -> CloudDistance:
    return CloudDistance(decorated_square_cloud(alpha, resolution))


def points_on_set(s: CanonicalSet, count: int, rng: np.random.Generator, *, window: float = 1.0) -> np.ndarray:
    """Random points of E (exact points for closed-form sets, cloud points otherwise)."""
    n = s.ambient_dim
    if s.variant == "point":
        return np.zeros((count, n))
    if s.variant == "subspace":
        pts = np.zeros((count, n))
        m = int(s.parameter)
        pts[:, :m] = rng.uniform(-window, window, (count, m))
        return pts
    if s.variant == "sphere":
        z = rng.standard_normal((count, n))
        return s.parameter * z / np.linalg.norm(z, axis=1, keepdims=True)
    if s.variant == "square-boundary":
        t = rng.uniform(0, 4, count)
        side, u = np.floor(t).astype(int), t % 1.0
        table = [(u, 0 * u), (1 + 0 * u, u), (1 - u, 1 + 0 * u), (0 * u, 1 - u)]
        return np.column_stack([np.choose(side, [p[0] for p in table]), np.choose(side, [p[1] for p in table])])
    if s.variant == "cantor":
        digits = rng.integers(0, 2, (count, 48))
        r = s.parameter
        weights = (1 - r) * r ** np.arange(48)
        x = digits @ weights
        return _embed(x[:, None], n)
    cloud = distance_field(s).cloud
    return cloud.points[rng.integers(0, len(cloud), count)]
