"""Muckenhoupt quotients of distance weights dist(., E)^-alpha.

Ball quotients for A_p (p > 1) and A_1, stress families of balls, sup
estimates with widening scale ranges, and the duality and strong doubling
identities used as internal consistency checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fractal_sets import CanonicalSet, distance_field, points_on_set, theoretical_assouad_dim
from .geometry import (
    Ball,
    DistanceField,
    Estimate,
    MCConfig,
    inf_distance_on_ball,
    integrate_over_ball,
    sup_distance_on_ball,
)

VERDICTS = ("bounded", "growing", "divergent", "inconclusive")
ENDPOINT_MARGIN = 0.25
REGIMES = ("centered", "tangent", "far")


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def __contains__(self, x: float) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    def endpoint_gap(self, x: float) -> float:
        return min(abs(x - self.lo), abs(x - self.hi))

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}


@dataclass(frozen=True)
class DistanceWeight:
    set: CanonicalSet
    alpha: float

    @property
    def field(self) -> DistanceField:
        return distance_field(self.set)

    def dual(self, p: float) -> "DistanceWeight":
        """w^(1/(1-p)) = dist^(alpha/(p-1)), again a distance weight."""
        return DistanceWeight(self.set, -self.alpha / (p - 1))


@dataclass(frozen=True)
class ApQuotient:
    ball: Ball
    p: float
    value: Estimate

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")


@dataclass(frozen=True)
class SweepRow:
    parameter: float
    estimate: Estimate
    verdict: str
    range_sups: tuple[float, ...] = ()

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    predicted_range: Interval
    agreement: bool
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.rows:
            raise ValueError("a sweep report needs at least one row")


@dataclass(frozen=True)
class DualityResidual:
    value: float
    std_error: float
    divergent: bool = False


def ball_average(fld: DistanceField, ball: Ball, alpha: float, cfg: MCConfig, *, stream: int = 0) -> Estimate:
    """Average of dist^-alpha over the ball; exactly 1 for alpha = 0."""
    if alpha == 0:
        return Estimate.exact(1.0)
    est = integrate_over_ball(ball, lambda y, d: d**-alpha, fld, alpha, cfg, stream=stream)
    if est.divergent:
        return est
    m = ball.measure
    return Estimate(est.value / m, est.std_error / m, est.truncation_bound / m, est.samples_used, False, est.flags)


def _product(a: Estimate, b: Estimate, power: float) -> Estimate:
    """a * b^power with independent errors; both truncations bias downwards."""
    if a.divergent or b.divergent:
        return Estimate.diverged(samples_used=a.samples_used + b.samples_used)
    value = a.value * b.value**power
    if value <= 0:
        return Estimate(value, 0.0, 0.0, a.samples_used + b.samples_used)
    rel = math.hypot(a.std_error / a.value, power * b.std_error / b.value)
    upper = a.upper * b.upper**power
    return Estimate(value, value * rel, max(upper - value, 0.0), a.samples_used + b.samples_used)


def ap_quotient(w: DistanceWeight, ball: Ball, p: float, cfg: MCConfig, *, stream: int = 0) -> ApQuotient:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p == 1:
        return a1_quotient(w, ball, cfg, stream=stream)
    if w.alpha == 0:
        return ApQuotient(ball, p, Estimate.exact(1.0))
    fld = w.field
    a = ball_average(fld, ball, w.alpha, cfg, stream=2 * stream)
    b = ball_average(fld, ball, -w.alpha / (p - 1), cfg, stream=2 * stream + 1)
    return ApQuotient(ball, p, _product(a, b, p - 1))


def a1_quotient(w: DistanceWeight, ball: Ball, cfg: MCConfig, *, stream: int = 0) -> ApQuotient:
    """Average of w times the essential sup of 1/w = dist^alpha over the ball."""
    if w.alpha == 0:
        return ApQuotient(ball, 1.0, Estimate.exact(1.0))
    fld = w.field
    if w.alpha < 0:
        closest = inf_distance_on_ball(ball, fld)
        if closest.lo == 0.0:
            # 1/w = dist^alpha is unbounded on a ball meeting E
            return ApQuotient(ball, 1.0, Estimate.diverged())
        extreme = Estimate(closest.value**w.alpha, 0.0, closest.lo**w.alpha - closest.value**w.alpha)
    else:
        farthest = sup_distance_on_ball(ball, fld)
        extreme = Estimate(farthest.value**w.alpha, 0.0, farthest.hi**w.alpha - farthest.value**w.alpha)
    avg = ball_average(fld, ball, w.alpha, cfg, stream=2 * stream)
    return ApQuotient(ball, 1.0, _product(avg, extreme, 1.0))


def predicted_ap_range(n: int, dim_a: float, p: float) -> Interval:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not 0 <= dim_a < n:
        raise ValueError(f"need 0 <= dim_A < n (porosity), got dim_A={dim_a}, n={n}")
    codim = n - dim_a
    if p == 1:
        return Interval(0.0, codim, lo_closed=True)
    return Interval((1 - p) * codim, codim)


def _unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _point_at_distance(fld: DistanceField, base: np.ndarray, target: float, rng: np.random.Generator) -> np.ndarray:
    """A point at distance ``target`` from E, found along a random ray from ``base``."""
    for _ in range(32):
        u = _unit_vector(rng, base.size)
        hi = target
        for _ in range(64):
            if fld.distance(base + hi * u)[0] >= target:
                break
            hi *= 2
        else:
            continue
        lo = 0.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if fld.distance(base + mid * u)[0] < target:
                lo = mid
            else:
                hi = mid
        return base + hi * u
    raise RuntimeError("could not place a ball at the requested distance from the set")


def family_radii(scales: tuple[float, float], n_scales: int) -> np.ndarray:
    lo, hi = scales
    if not 0 < lo <= hi:
        raise ValueError(f"scale interval must satisfy 0 < lo <= hi, got {scales}")
    if n_scales == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, n_scales)


def ball_family(s: CanonicalSet, scales: tuple[float, float], count: int, seed: int) -> list[Ball]:
    """Balls centred on E, tangent to E (gap equal to the radius) and far
    from E (gap eight radii), one of each per scale."""
    if count < 3:
        raise ValueError("count must be >= 3")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    fld = distance_field(s)
    balls = []
    for r in family_radii(scales, count // 3):
        on_set = points_on_set(s, 3, rng, window=max(1.0, 4 * r))
        balls.append(Ball(on_set[0], r, "centered"))
        balls.append(Ball(_point_at_distance(fld, on_set[1], 2 * r, rng), r, "tangent"))
        balls.append(Ball(_point_at_distance(fld, on_set[2], 9 * r, rng), r, "far"))
    return balls


def family_quotients(w: DistanceWeight, p: float, family: Sequence[Ball], cfg: MCConfig) -> list[ApQuotient]:
    inner = MCConfig(cfg.seed, cfg.shells, cfg.samples_per_shell, cfg.sequence)
    return cfg.map(lambda b: ap_quotient(w, b, p, inner), family)


def sup_estimate(estimates: Sequence[Estimate]) -> Estimate:
    if not estimates:
        raise ValueError("empty family")
    used = sum(e.samples_used for e in estimates)
    if any(e.divergent for e in estimates):
        return Estimate.diverged(samples_used=used)
    top = max(estimates, key=lambda e: e.value)
    return Estimate(top.value, top.std_error, top.truncation_bound, used, False, top.flags)


def ap_constant_estimate(w: DistanceWeight, p: float, family: Sequence[Ball], cfg: MCConfig) -> Estimate:
    return sup_estimate([q.value for q in family_quotients(w, p, family, cfg)])


def widening_verdict(radii: Sequence[float], estimates: Sequence[Estimate], scales: tuple[float, float]) -> tuple[str, tuple[float, ...]]:
    """Compare sups over three nested scale ranges sharing the bottom scale."""
    if any(e.divergent for e in estimates):
        return "divergent", ()
    lo, hi = scales
    tops = [lo * (hi / lo) ** (j / 3) for j in (1, 2, 3)] if hi > lo else [hi] * 3
    sups = []
    for top in tops:
        vals = [e.value for r, e in zip(radii, estimates) if r <= top * (1 + 1e-9)]
        sups.append(max(vals) if vals else 0.0)
    if sups[0] <= 0:
        return "inconclusive", tuple(sups)
    steps = [b / a for a, b in zip(sups, sups[1:])]
    if all(s <= 2.0 for s in steps):
        return "bounded", tuple(sups)
    if all(s >= 4.0 for s in steps):
        return "growing", tuple(sups)
    return "inconclusive", tuple(sups)


def agrees(alpha: float, verdict: str, predicted: Interval) -> bool | None:
    """None when the grid point is too close to a threshold to count."""
    if predicted.endpoint_gap(alpha) < ENDPOINT_MARGIN:
        return None
    if alpha in predicted:
        return verdict == "bounded"
    return verdict in ("growing", "divergent")


def ap_threshold_sweep(
    s: CanonicalSet,
    p: float,
    alpha_grid: Sequence[float],
    scales: tuple[float, float],
    cfg: MCConfig,
    *,
    count: int | None = None,
) -> SweepReport:
    dim_a = theoretical_assouad_dim(s)
    if dim_a is None:
        raise ValueError(f"{s.spec} has no known Assouad dimension")
    predicted = predicted_ap_range(s.ambient_dim, dim_a, p)
    lo, hi = scales
    n_scales = int(math.floor(math.log2(hi / lo) + 1e-9)) + 1
    family = ball_family(s, scales, count or 3 * n_scales, cfg.seed)
    radii = [b.radius for b in family]
    rows, checks = [], []
    for alpha in alpha_grid:
        quotients = [q.value for q in family_quotients(DistanceWeight(s, alpha), p, family, cfg)]
        verdict, sups = widening_verdict(radii, quotients, scales)
        rows.append(SweepRow(float(alpha), sup_estimate(quotients), verdict, sups))
        checks.append(agrees(alpha, verdict, predicted))
    agreement = all(c for c in checks if c is not None)
    return SweepReport(tuple(rows), predicted, agreement, {"family_size": len(family), "dim_A": dim_a, "p": p})


def duality_residual(w: DistanceWeight, ball: Ball, p: float, cfg: MCConfig) -> DualityResidual:
    """Relative gap between Q_p'(w^(1/(1-p))) and Q_p(w)^(1/(p-1)), with its
    propagated standard error; the two sides use independent streams."""
    if p <= 1:
        raise ValueError("duality needs p > 1")
    q = ap_quotient(w, ball, p, cfg, stream=0).value
    qd = ap_quotient(w.dual(p), ball, p / (p - 1), cfg, stream=1).value
    if q.divergent or qd.divergent:
        return DualityResidual(math.nan, math.inf, True)
    power = 1.0 / (p - 1)
    target = q.value**power
    target_se = target * power * q.std_error / q.value
    residual = abs(qd.value - target) / target
    return DualityResidual(residual, math.hypot(qd.std_error, target_se) / target)


def strong_doubling_check(w: DistanceWeight, ball: Ball, subset: Ball, p: float, cfg: MCConfig) -> Estimate:
    """w(B) |E'|^p / (|B|^p w(E')) for a ball E' inside B."""
    gap = np.linalg.norm(ball.center_array - subset.center_array) + subset.radius
    if gap > ball.radius * (1 + 1e-12):
        raise ValueError("subset must be contained in the ball")
    if subset == ball:
        return Estimate.exact(1.0)
    fld = w.field
    whole = ball_average(fld, ball, w.alpha, cfg, stream=0)
    part = ball_average(fld, subset, w.alpha, cfg, stream=1)
    if whole.divergent or part.divergent:
        return Estimate.diverged(samples_used=whole.samples_used + part.samples_used)
    # w(B)/|B| divided by w(E')/|E'|, times (|E'|/|B|)^(p-1)
    factor = (subset.measure / ball.measure) ** (p - 1)
    value = factor * whole.value / part.value
    rel = math.hypot(whole.std_error / whole.value, part.std_error / part.value)
    upper = factor * whole.upper / part.value
    return Estimate(value, value * rel, upper - value, whole.samples_used + part.samples_used)
