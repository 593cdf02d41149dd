"""Size estimators: covering-based Assouad dimension, the Aikawa integral
condition with its codimension bracket, and dyadic Hausdorff content."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .fractal_sets import CanonicalSet, distance_field
from .geometry import Ball, Estimate, MCConfig, PointCloud, integrate_over_ball, lebesgue_ball_measure

log = logging.getLogger(__name__)

DEFAULT_CAP = 64.0
DEFAULT_GROWTH = 2.0


class ResolutionError(ValueError):
    """The requested scale is below what the cloud resolves."""


@dataclass(frozen=True)
class ScalePair:
    R: float
    r: float
    center_index: int = 0

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError(f"need 0 < r < R, got r={self.r}, R={self.R}")


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    spread: float
    pairs: int


@dataclass(frozen=True)
class AikawaProbe:
    center: tuple[float, ...]
    radius: float
    alpha: float
    ratio: Estimate

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("probe radius must be positive")


@dataclass(frozen=True)
class CodimBracket:
    lo: float | None
    hi: float | None
    conclusive: bool
    probes: tuple[AikawaProbe, ...] = field(default=(), repr=False)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        if not self.conclusive:
            return False
        return self.lo - tol <= x <= self.hi + tol


def covering_number(cloud: PointCloud, center: Sequence[float], R: float, r: float, *, tree: cKDTree | None = None) -> int:
    """Greedy r-cover count of the cloud points inside B(center, R)."""
    if r < 2 * cloud.resolution:
        raise ResolutionError(f"r = {r} is below twice the cloud resolution {cloud.resolution}")
    if r >= R:
        return 1
    tree = tree or cKDTree(cloud.points)
    inside = np.sort(np.asarray(tree.query_ball_point(np.asarray(center, dtype=float), R * (1 - 1e-12)), dtype=int))
    if len(inside) == 0:
        return 0
    pts = cloud.points[inside]
    local = cKDTree(pts)
    covered = np.zeros(len(pts), dtype=bool)
    picks = 0
    for i in range(len(pts)):
        if covered[i]:
            continue
        picks += 1
        covered[local.query_ball_point(pts[i], r)] = True
    return picks


def assouad_dim_estimate(cloud: PointCloud, pairs: Sequence[ScalePair]) -> DimensionEstimate:
    """Sup over pairs of log N(R, r) / log(R/r), a finite-resolution lower estimate."""
    if not pairs:
        raise ValueError("need at least one scale pair")
    tree = cKDTree(cloud.points)
    ratios = np.array(
        [
            math.log(max(covering_number(cloud, cloud.points[p.center_index], p.R, p.r, tree=tree), 1)) / math.log(p.R / p.r)
            for p in pairs
        ]
    )
    top = np.sort(ratios)[-max(1, math.ceil(len(ratios) / 10)) :]
    q75, q25 = np.percentile(top, [75, 25])
    return DimensionEstimate(float(ratios.max()), float(q75 - q25), len(pairs))


def aikawa_ratio(s: CanonicalSet, center: Sequence[float], r: float, alpha: float, cfg: MCConfig, *, stream: int = 0) -> Estimate:
    """[int_B dist^-alpha] / [r^-alpha |B|] over B = B(center, r)."""
    ball = Ball(center, r)
    est = integrate_over_ball(ball, lambda y, d: d**-alpha, distance_field(s), alpha, cfg, stream=stream)
    if est.divergent:
        return est
    norm = r**-alpha * lebesgue_ball_measure(ball.dim, r)
    return Estimate(est.value / norm, est.std_error / norm, est.truncation_bound / norm, est.samples_used, False, est.flags)


def _grows(ratios: list[Estimate], factor: float) -> bool:
    """Ratios ordered by increasing radius rise monotonically by ``factor`` overall."""
    vals = [e.value for e in ratios]
    if len(vals) < 2 or vals[0] <= 0:
        return False
    return all(b >= a for a, b in zip(vals, vals[1:])) and vals[-1] >= factor * vals[0]


def aikawa_codim_estimate(
    s: CanonicalSet,
    alpha_grid: Sequence[float],
    probes: Sequence[tuple[Sequence[float], float]],
    cfg: MCConfig,
    *,
    cap: float = DEFAULT_CAP,
    growth: float = DEFAULT_GROWTH,
) -> CodimBracket:
    """Bracket [alpha_lo, alpha_hi] around the Aikawa codimension.

    alpha_lo is the last grid value of the initial run whose ratios stay below
    ``cap`` (value plus truncation bound) at every probe; alpha_hi is the first
    grid value that diverges or grows by ``growth`` across radii at some center.
    """
    grid = list(alpha_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("alpha grid must be increasing")
    radii = sorted({float(r) for _, r in probes})
    if len(radii) < 2 or radii[-1] / radii[0] < 4:
        raise ValueError("probes must span at least three dyadic scales")
    by_center: dict[tuple[float, ...], list[float]] = {}
    for c, r in probes:
        by_center.setdefault(tuple(float(x) for x in np.ravel(c)), []).append(float(r))

    all_probes: list[AikawaProbe] = []
    below_cap: list[bool] = []
    alpha_hi = None
    for alpha in grid:
        ok, failed = True, False
        previous_ok = all(below_cap) if below_cap else True
        for c, rs in by_center.items():
            rows = []
            for r in sorted(rs):
                est = aikawa_ratio(s, c, r, alpha, cfg)
                all_probes.append(AikawaProbe(c, r, alpha, est))
                rows.append(est)
            if any(e.divergent for e in rows) or _grows(rows, growth):
                failed = True
            if any(e.divergent or e.upper >= cap for e in rows):
                ok = False
        below_cap.append(ok and previous_ok)
        if failed and alpha_hi is None:
            alpha_hi = alpha
        if ok and below_cap[-2:-1] == [True]:
            _self_improvement_note(alpha, all_probes, cap)
        if alpha_hi is not None and not ok:
            break
    passing = [a for a, good in zip(grid, below_cap) if good]
    alpha_lo = passing[-1] if passing else None
    conclusive = alpha_lo is not None and alpha_hi is not None and alpha_lo < alpha_hi
    return CodimBracket(alpha_lo, alpha_hi, conclusive, tuple(all_probes))


def _self_improvement_note(alpha: float, probes: list[AikawaProbe], cap: float) -> None:
    """Log whether ratios stayed below cap at alpha when they were below cap/4 one grid step earlier."""
    current = [p for p in probes if p.alpha == alpha]
    earlier = sorted({p.alpha for p in probes if p.alpha < alpha})
    if not earlier:
        return
    prev = [p for p in probes if p.alpha == earlier[-1]]
    if all(p.ratio.upper < cap / 4 for p in prev):
        held = all(p.ratio.upper < cap for p in current)
        log.info("self-improvement at alpha=%.3f -> %.3f: %s", earlier[-1], alpha, "held" if held else "failed")


def hausdorff_content_codim(cloud: PointCloud, q: float, R_cap: float, grid_level: int) -> float:
    """Cover sum of rad^-q |B| over balls of radius 2^-level centred on the
    dyadic cells that meet the cloud."""
    side = 2.0**-grid_level
    if side > R_cap:
        raise ValueError(f"cell size {side} exceeds R_cap {R_cap}")
    cells = np.unique(np.floor(cloud.points / side).astype(np.int64), axis=0)
    return len(cells) * side**-q * lebesgue_ball_measure(cloud.dim, side)
