"""Riesz potentials, fractional gradients and the weighted Hardy-Sobolev
harness.

Test functions carry closed-form values and gradient norms. Ratio tests probe
the inequality where the exponent conditions hold; shell cutoff sweeps probe
the failure regime beta > p - 1 near the unit square boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .fractal_sets import CanonicalSet, decorated_square_field, distance_field, theoretical_assouad_dim
from .geometry import (
    Annulus,
    _directions,
    Ball,
    DistanceField,
    Estimate,
    MCConfig,
    PointDistance,
    integrate_over_ball,
    unit_ball_volume,
)
from .muckenhoupt import (
    Interval,
    SweepReport,
    SweepRow,
    ball_average,
    ball_family,
    family_radii,
    sup_estimate,
    widening_verdict,
)

SLOPE_TOLERANCE = 0.15
FAR_WINDOW = 16.0
INNER_STREAM = 97


# ---------------------------------------------------------------------------
# functions


class TestFunction:
    """Lipschitz function with closed-form value, gradient norm and support."""

    __test__ = False  # keep pytest from collecting this class
    kind = "abstract"
    dim: int
    lipschitz: float

    @property
    def support(self) -> Ball | None:
        raise NotImplementedError

    def __call__(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_norm(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def window(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Box outside which the function and its gradient vanish, if tighter than the support ball."""
        return None

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class RadialBump(TestFunction):
    """(1 - |y-c|^2/R^2)^2 inside B(c, R), zero outside."""

    center: tuple[float, ...]
    R: float
    kind = "radial-bump"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        if not self.R > 0:
            raise ValueError("bump radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    @property
    def lipschitz(self):
        return 8.0 / (3.0 * math.sqrt(3.0) * self.R)

    @property
    def support(self):
        return Ball(self.center, self.R)

    def _rho(self, points):
        return np.linalg.norm(np.atleast_2d(points) - np.asarray(self.center), axis=1) / self.R

    def __call__(self, points):
        rho = self._rho(points)
        return np.where(rho < 1, (1 - rho**2) ** 2, 0.0)

    def grad_norm(self, points):
        rho = self._rho(points)
        return np.where(rho < 1, 4 * rho * (1 - rho**2) / self.R, 0.0)


@dataclass(frozen=True)
class Tent(TestFunction):
    """max(2R - |y - c|, 0)."""

    center: tuple[float, ...]
    R: float
    kind = "tent"
    lipschitz = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        if not self.R > 0:
            raise ValueError("tent radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    @property
    def support(self):
        return Ball(self.center, 2 * self.R)

    def _dist(self, points):
        return np.linalg.norm(np.atleast_2d(points) - np.asarray(self.center), axis=1)

    def __call__(self, points):
        return np.maximum(2 * self.R - self._dist(points), 0.0)

    def grad_norm(self, points):
        return np.where(self._dist(points) < 2 * self.R, 1.0, 0.0)


@dataclass(frozen=True)
class ShellCutoff(TestFunction):
    """Equal to 1 where dist >= 2^(1-j), 0 where dist <= 2^-j, linear in the
    distance between, and zero outside the unit cube."""

    set: CanonicalSet
    j: int
    kind = "shell-cutoff"

    @property
    def dim(self):
        return self.set.ambient_dim

    @property
    def lipschitz(self):
        return 2.0**self.j

    @property
    def field(self) -> DistanceField:
        if self.set.variant == "antenna":
            return decorated_square_field(self.set.parameter)
        return distance_field(self.set)

    @property
    def support(self):
        n = self.dim
        return Ball(np.full(n, 0.5), math.sqrt(n) / 2)

    @property
    def window(self):
        return np.zeros(self.dim), np.ones(self.dim)

    def _parts(self, points):
        pts = np.atleast_2d(points)
        inside = np.all((pts >= 0) & (pts <= 1), axis=1)
        d = self.field.distance(pts)
        return inside, d * 2.0**self.j - 1.0

    def __call__(self, points):
        inside, x = self._parts(points)
        return np.where(inside, np.clip(x, 0.0, 1.0), 0.0)

    def grad_norm(self, points):
        inside, x = self._parts(points)
        return np.where(inside & (x > 0) & (x < 1), 2.0**self.j, 0.0)


@dataclass(frozen=True)
class Affine(TestFunction):
    """a . y + b; unbounded support, used for Poincare checks."""

    slope: tuple[float, ...]
    offset: float = 0.0
    kind = "affine"

    def __post_init__(self):
        object.__setattr__(self, "slope", tuple(float(c) for c in np.ravel(self.slope)))

    @property
    def dim(self):
        return len(self.slope)

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.slope))

    @property
    def support(self):
        return None

    @property
    def is_zero(self):
        return self.offset == 0 and not any(self.slope)

    def __call__(self, points):
        return np.atleast_2d(points) @ np.asarray(self.slope) + self.offset

    def grad_norm(self, points):
        return np.full(len(np.atleast_2d(points)), self.lipschitz)


@dataclass(frozen=True)
class Zero(TestFunction):
    dim: int = 1
    kind = "zero"
    lipschitz = 0.0

    @property
    def support(self):
        return None

    @property
    def is_zero(self):
        return True

    def __call__(self, points):
        return np.zeros(len(np.atleast_2d(points)))

    grad_norm = __call__


@dataclass(frozen=True)
class SupportedFunction:
    """A nonnegative function together with a ball containing its support."""

    func: Callable[[np.ndarray], np.ndarray]
    support: Ball

    def __call__(self, points):
        return self.func(np.atleast_2d(points))


def indicator(ball: Ball) -> SupportedFunction:
    return SupportedFunction(lambda y: ball.contains(y).astype(float), ball)


def gradient_norm(f: TestFunction) -> SupportedFunction:
    return SupportedFunction(f.grad_norm, f.support)


def combination(terms: Sequence[tuple[float, SupportedFunction]], support: Ball) -> SupportedFunction:
    def func(y):
        return sum(c * g(y) for c, g in terms)

    return SupportedFunction(func, support)


# ---------------------------------------------------------------------------
# exponents


@dataclass(frozen=True)
class ExponentTuple:
    Q: float
    s: float
    t: float
    p: float
    q: float
    beta: float

    def __post_init__(self):
        if not 0 < self.s <= 1:
            raise ValueError(f"s must lie in (0, 1], got {self.s}")
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if self.q < self.p:
            raise ValueError(f"q must be >= p, got q={self.q}, p={self.p}")
        if self.Q > self.s * self.p and self.q > self.sobolev_bound * (1 + 1e-12):
            raise ValueError(f"q must be <= Qp/(Q - sp) = {self.sobolev_bound}, got {self.q}")

    @property
    def sobolev_bound(self) -> float:
        gap = self.Q - self.s * self.p
        return self.Q * self.p / gap if gap > 0 else math.inf

    @property
    def weight_exponent(self) -> float:
        """Exponent of dist on the left side: (q/p)(Q - sp + beta) - Q."""
        return (self.q / self.p) * (self.Q - self.s * self.p + self.beta) - self.Q

    @property
    def dual_exponent(self) -> float:
        return -self.beta / (self.p - 1)


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    binding_condition: str
    dimension_term: float
    beta_term: float
    codim: float
    classical_beta_bound: float
    codim_beta_bound: float
    codim_bound_holds: bool
    weaker: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def admissible_exponents(e: ExponentTuple, codim: float) -> Admissibility:
    """Check codim > max{Q - (q/p)(Q - sp + beta), beta/(p-1)} and compare the
    classical beta bound (p-1)(qp+np-nq)/(qp+p-q) with beta < codim (p-1)."""
    first = e.Q - (e.q / e.p) * (e.Q - e.s * e.p + e.beta)
    second = e.beta / (e.p - 1)
    admissible = codim > max(first, second)
    binding = "none" if admissible else ("dimension_bound" if first >= second else "beta_bound")
    n, p, q = e.Q, e.p, e.q
    threshold = (q * p + n * p - n * q) / (q * p + p - q)
    classical = (p - 1) * threshold
    ours = codim * (p - 1)
    weaker = "codim" if ours > classical else ("equal" if ours == classical else "classical")
    return Admissibility(admissible, binding, first, second, codim, classical, ours, codim > threshold, weaker)


@dataclass(frozen=True)
class HsVerdict:
    lhs: Estimate
    rhs: Estimate
    ratio: float
    admissible: bool | None
    binding_condition: str

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "ratio": self.ratio if math.isfinite(self.ratio) else None,
            "admissible": self.admissible,
            "binding_condition": self.binding_condition,
        }


# ---------------------------------------------------------------------------
# potentials


def _scaled(est: Estimate, factor: float) -> Estimate:
    if est.divergent:
        return est
    return Estimate(est.value * factor, est.std_error * factor, est.truncation_bound * factor, est.samples_used, False, est.flags)


def _root(est: Estimate, k: float) -> Estimate:
    """est^(1/k) with first-order error propagation."""
    if est.divergent:
        return est
    if est.value <= 0:
        return Estimate(0.0, est.std_error ** (1 / k) if est.std_error else 0.0, est.truncation_bound ** (1 / k), est.samples_used, False, est.flags)
    v = est.value ** (1 / k)
    se = v * est.std_error / (k * est.value)
    upper = est.upper ** (1 / k)
    return Estimate(v, se, upper - v, est.samples_used, False, est.flags)


def riesz_potential(f, s: float, x: Sequence[float], cfg: MCConfig, *, stream: int = 0) -> Estimate:
    """I_s f(x) = int f(y) |x-y|^(s-n) / v_n dy over the declared support of f."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if not 0 < s <= n:
        raise ValueError(f"need 0 < s <= n, got s={s}, n={n}")
    if getattr(f, "is_zero", False) or f.support is None:
        return Estimate.exact(0.0)
    vn = unit_ball_volume(n)

    def integrand(y, d):
        return f(y) * d ** (s - n) / vn

    return integrate_over_ball(f.support, integrand, PointDistance(x), n - s, cfg, stream=stream)


def _inner_config(cfg: MCConfig) -> MCConfig:
    return MCConfig(cfg.seed, cfg.shells, max(16, 2 * math.ceil(math.sqrt(cfg.samples_per_shell))), cfg.sequence)


def fractional_energy(f: TestFunction, ys: np.ndarray, s: float, t: float, cfg: MCConfig, *, stream: int = INNER_STREAM):
    """Inner energies int |f(y)-f(z)|^t / (|y-z|^(st) v_n |y-z|^n) dz at many y.

    Each y gets its own annuli over B(y, rho0) with rho0 reaching past the
    support; outside it the integrand is |f(y)|^t times a kernel with a
    closed-form tail. The core |z - y| < rho_K is bounded through the
    Lipschitz constant. Returns (energy, std_error, core_bound).
    """
    ys = np.atleast_2d(ys)
    M, n = ys.shape
    support = f.support
    fy = f(ys)
    rho0 = np.linalg.norm(ys - support.center_array, axis=1) + support.radius
    vn = unit_ball_volume(n)
    energy = np.zeros(M)
    var = np.zeros(M)
    N = cfg.samples_per_shell
    for k in range(cfg.shells):
        hi = rho0 * 2.0**-k
        lo = hi / 2
        u = cfg.uniforms((stream, k), N, n + 1)
        r = (lo[:, None] ** n + u[None, :, 0] * (hi[:, None] ** n - lo[:, None] ** n)) ** (1.0 / n)
        dirs = _directions(u[:, 1:])
        z = ys[:, None, :] + r[..., None] * dirs[None]
        fz = f(z.reshape(-1, n)).reshape(M, N)
        vals = np.abs(fy[:, None] - fz) ** t / (r ** (s * t) * vn * r**n)
        vol = vn * (hi**n - lo**n)
        contrib = vol[:, None] * vals
        energy += contrib.mean(axis=1)
        var += contrib.var(axis=1, ddof=1) / N
    rho_k = rho0 * 2.0**-cfg.shells
    core = f.lipschitz**t * n / (t - s * t) * rho_k ** (t - s * t)
    energy += np.abs(fy) ** t * n / (s * t) * rho0 ** (-s * t)
    return energy, np.sqrt(var), core


def fractional_gradients(f: TestFunction, ys: np.ndarray, s: float, t: float, cfg: MCConfig, *, stream: int = INNER_STREAM) -> np.ndarray:
    energy, _, _ = fractional_energy(f, ys, s, t, cfg, stream=stream)
    return energy ** (1.0 / t)


def fractional_gradient(f: TestFunction, y: Sequence[float], s: float, t: float, cfg: MCConfig) -> Estimate:
    """g(y), the t-th root of the inner fractional energy of f at y."""
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if f.is_zero:
        return Estimate.exact(0.0)
    energy, se, core = fractional_energy(f, np.asarray(y, dtype=float)[None], s, t, cfg)
    e = Estimate(float(energy[0]), float(se[0]), float(core[0]), cfg.shells * cfg.samples_per_shell)
    g = _root(e, t)
    if g.value > 0 and g.truncation_bound > 0.05 * g.value:
        g = Estimate(g.value, g.std_error, g.truncation_bound, g.samples_used, False, g.flags + ("inconclusive",))
    return g


def _far_window(f: TestFunction) -> Ball:
    sup = f.support
    return Ball(sup.center, FAR_WINDOW * sup.radius)


def pointwise_domination_ratios(f: TestFunction, s: float, t: float, sample_points: Sequence[Sequence[float]], cfg: MCConfig) -> list[float]:
    """|f(x)| / I_s(g)(x) at each sample point (0 where f vanishes)."""
    if f.is_zero:
        return [0.0 for _ in sample_points]
    out = []
    for x in sample_points:
        x = np.asarray(x, dtype=float)
        fx = float(abs(f(x[None])[0]))
        if fx == 0:
            out.append(0.0)
            continue
        if s == 1:
            pot = riesz_potential(gradient_norm(f), 1.0, x, cfg)
        else:
            inner = _inner_config(cfg)
            g = SupportedFunction(lambda y: fractional_gradients(f, y, s, t, inner), _far_window(f))
            pot = riesz_potential(g, s, x, cfg)
        out.append(fx / pot.value if pot.value > 0 else math.inf)
    return out


def pointwise_domination_check(f: TestFunction, s: float, t: float, sample_points: Sequence[Sequence[float]], cfg: MCConfig) -> float:
    """Max over the samples of |f(x)| / I_s(g)(x), with g = |grad f| for s = 1
    and the fractional gradient for s < 1."""
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    ratios = pointwise_domination_ratios(f, s, t, sample_points, cfg)
    return max(ratios, default=0.0)


# ---------------------------------------------------------------------------
# Hardy-Sobolev harness


def _codim(s: CanonicalSet) -> float | None:
    d = theoretical_assouad_dim(s)
    return None if d is None else s.ambient_dim - d


def _weighted_integral(ball: Ball, values, fld: DistanceField, exponent: float, cfg: MCConfig, stream: int, window=None) -> Estimate:
    """int values(y) dist(y)^exponent dy over the ball."""
    return integrate_over_ball(ball, lambda y, d: values(y) * d**exponent, fld, -exponent, cfg, stream=stream, window=window)


def hs_sides(f: TestFunction, e: ExponentTuple, fld: DistanceField, cfg: MCConfig) -> tuple[Estimate, Estimate]:
    """(lhs, rhs) of the weighted Hardy-Sobolev inequality for f."""
    if f.is_zero:
        return Estimate.exact(0.0), Estimate.exact(0.0)
    support = f.support
    a = e.weight_exponent
    lhs = _root(_weighted_integral(support, lambda y: np.abs(f(y)) ** e.q, fld, a, cfg, 0, f.window), e.q)
    if e.s == 1:
        rhs_int = _weighted_integral(support, lambda y: f.grad_norm(y) ** e.p, fld, e.beta, cfg, 1, f.window)
    else:
        inner = _inner_config(cfg)
        rhs_int = _weighted_integral(
            _far_window(f), lambda y: fractional_gradients(f, y, e.s, e.t, inner) ** e.p, fld, e.beta, cfg, 1
        )
    return lhs, _root(rhs_int, e.p)


def hs_ratio(s: CanonicalSet, f: TestFunction, e: ExponentTuple, cfg: MCConfig, *, fld: DistanceField | None = None) -> HsVerdict:
    lhs, rhs = hs_sides(f, e, fld or distance_field(s), cfg)
    codim = _codim(s)
    if codim is None:
        admissible, binding = None, "none"
    else:
        adm = admissible_exponents(e, codim)
        admissible, binding = adm.admissible, adm.binding_condition
    finite = not (lhs.divergent or rhs.divergent)
    ratio = lhs.value / rhs.value if finite and rhs.value > 0 else math.nan
    return HsVerdict(lhs, rhs, ratio, admissible, binding)


def _trend(slope: float, tol: float = SLOPE_TOLERANCE) -> str:
    if slope < -tol:
        return "decaying"
    if slope > tol:
        return "growing"
    return "bounded"


def lhs_trend(powered: Sequence[float]) -> str:
    """'growing' when the q-th powers increase with non-shrinking increments."""
    vals = np.asarray(powered)
    steps = np.diff(vals)
    if len(steps) and np.all(steps > 0) and steps[-1] >= 0.5 * steps[0]:
        return "growing"
    return "bounded"


def counterexample_sweep(s: CanonicalSet, e: ExponentTuple, j_range: Sequence[int], cfg: MCConfig) -> SweepReport:
    """Shell cutoffs f_j against the square boundary (or its antenna-decorated
    version): tabulate both sides, fit the slope of log2(rhs^p) in j."""
    if s.variant not in ("square-boundary", "antenna"):
        raise ValueError("counterexample sweeps run on the square boundary or the antenna set")
    if e.s != 1:
        raise ValueError("counterexample sweeps use the first-order inequality (s = 1)")
    js = list(j_range)
    rows, lhs_vals, rhs_vals = [], [], []
    for j in js:
        f = ShellCutoff(s, j)
        lhs, rhs = hs_sides(f, e, f.field, cfg)
        lhs_vals.append(lhs)
        rhs_vals.append(rhs)
        rows.append(SweepRow(float(j), rhs, "divergent" if rhs.divergent or lhs.divergent else "bounded"))
    rhs_pow = np.array([r.value**e.p for r in rhs_vals])
    lhs_pow = np.array([v.value**e.q for v in lhs_vals])
    slope = float(np.polyfit(js, np.log2(rhs_pow), 1)[0]) if len(js) > 1 and np.all(rhs_pow > 0) else math.nan
    rhs_t, lhs_t = _trend(slope), lhs_trend(lhs_pow)
    lhs_spread = max(v.value for v in lhs_vals) / min(v.value for v in lhs_vals) if min(v.value for v in lhs_vals) > 0 else math.inf
    failure = (rhs_t == "decaying" and min(v.value for v in lhs_vals) > 0) or (rhs_t == "bounded" and lhs_t == "growing")
    predicted_failure = e.beta > e.p - 1 or (e.beta == e.p - 1 and e.q == e.p)
    rows = [SweepRow(r.parameter, r.estimate, "growing" if rhs_t == "growing" else r.verdict) for r in rows]
    extra = {
        "j": js,
        "lhs": [v.value for v in lhs_vals],
        "lhs_std_error": [v.std_error for v in lhs_vals],
        "rhs": [v.value for v in rhs_vals],
        "rhs_std_error": [v.std_error for v in rhs_vals],
        "rhs_power_slope": slope,
        "rhs_trend": rhs_t,
        "lhs_trend": lhs_t,
        "lhs_spread": lhs_spread,
        "failure_signal": failure,
        "predicted_failure": predicted_failure,
    }
    predicted = Interval(-math.inf, e.p - 1, hi_closed=e.q != e.p)
    return SweepReport(tuple(rows), predicted, failure == predicted_failure, extra)


def mix_condition_check(s: CanonicalSet, e: ExponentTuple, ball: Ball, cfg: MCConfig, *, stream: int = 0) -> Estimate:
    """rad^s w(B)^(1/q) h(B)^((p-1)/p) / |B| with w = dist^weight_exponent and
    h = dist^(-beta/(p-1))."""
    fld = distance_field(s)
    w_avg = ball_average(fld, ball, -e.weight_exponent, cfg, stream=2 * stream)
    h_avg = ball_average(fld, ball, -e.dual_exponent, cfg, stream=2 * stream + 1)
    used = w_avg.samples_used + h_avg.samples_used
    if w_avg.divergent or h_avg.divergent:
        return Estimate.diverged(samples_used=used)
    m = ball.measure
    a, b = 1.0 / e.q, (e.p - 1) / e.p

    def functional(wv, hv):
        return ball.radius**e.s * (m * wv) ** a * (m * hv) ** b / m

    value = functional(w_avg.value, h_avg.value)
    rel = math.hypot(a * w_avg.std_error / w_avg.value, b * h_avg.std_error / h_avg.value)
    upper = functional(w_avg.upper, h_avg.upper)
    return Estimate(value, value * rel, upper - value, used)


def mix_far_field(e: ExponentTuple, ball: Ball, gap: float) -> tuple[float, float]:
    """Bounds on the mixed functional when dist(B, E) = gap >= rad(B), using
    gap <= dist <= 3 gap on B."""
    m = ball.measure
    a, b = 1.0 / e.q, (e.p - 1) / e.p

    def functional(scale):
        return ball.radius**e.s * (m * scale**e.weight_exponent) ** a * (m * scale**e.dual_exponent) ** b / m

    lo_hi = [functional(gap), functional(3 * gap)]
    return min(lo_hi), max(lo_hi)


def mix_condition_sweep(s: CanonicalSet, e: ExponentTuple, scales: tuple[float, float], cfg: MCConfig, *, count: int | None = None) -> SweepReport:
    lo, hi = scales
    n_scales = int(math.floor(math.log2(hi / lo) + 1e-9)) + 1
    family = ball_family(s, scales, count or 3 * n_scales, cfg.seed)
    inner = MCConfig(cfg.seed, cfg.shells, cfg.samples_per_shell, cfg.sequence)
    values = cfg.map(lambda b: mix_condition_check(s, e, b, inner), family)
    verdict, sups = widening_verdict([b.radius for b in family], values, scales)
    codim = _codim(s)
    adm = admissible_exponents(e, codim) if codim is not None else None
    row = SweepRow(e.beta, sup_estimate(values), verdict, sups)
    if adm is None:
        agreement = False
    elif adm.admissible:
        agreement = verdict == "bounded"
    else:
        agreement = verdict in ("growing", "divergent")
    extra = {"admissibility": adm.to_dict() if adm else None, "family_size": len(family), "radii": list(family_radii(scales, n_scales))}
    return SweepReport((row,), Interval(-math.inf, math.inf), agreement, extra)


def poincare_ratio(f: TestFunction, ball: Ball, cfg: MCConfig, *, stream: int = 0) -> float | None:
    """avg_B |f - f_B| / (rad(B) avg_B |grad f|); None when the gradient vanishes."""
    count = cfg.shells * cfg.samples_per_shell
    # Latin hypercube stratifies the radial coordinate as well as the angular ones
    u = qmc.LatinHypercube(ball.dim + 1, seed=cfg.generator(stream, 0)).random(count)
    pts, _ = Annulus(ball.center_array, 0.0, ball.radius).sample(u)
    vals = f(pts)
    grad = float(np.mean(f.grad_norm(pts)))
    if grad == 0:
        return None
    return float(np.mean(np.abs(vals - vals.mean()))) / (ball.radius * grad)
