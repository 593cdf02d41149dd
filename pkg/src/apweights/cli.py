"""Batch driver: one subcommand per verification, INI-style run configs,
deterministic seeds, JSON/CSV reports and a run manifest.

Exit status: 0 agreement or boundedness, 1 disagreement with a predicted
outcome, 2 inconclusive, 3 operational error, 64 malformed config, 65 budget
exceeded.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import platform
import re
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy
from scipy.spatial import cKDTree

from . import __version__
from .dimension import ScalePair, aikawa_codim_estimate, assouad_dim_estimate, covering_number
from .fractal_sets import BudgetError, CanonicalSet, canonical_cloud, default_resolution, parse_set, points_on_set, theoretical_assouad_dim
from .geometry import Ball, Estimate, MCConfig
from .muckenhoupt import (
    DistanceWeight,
    SweepReport,
    a1_quotient,
    agrees,
    ap_quotient,
    ap_threshold_sweep,
    predicted_ap_range,
)
from .potentials import (
    ExponentTuple,
    RadialBump,
    ShellCutoff,
    Tent,
    admissible_exponents,
    counterexample_sweep,
    hs_ratio,
    indicator,
    mix_condition_sweep,
    riesz_potential,
)

EXIT_OK, EXIT_DISAGREE, EXIT_INCONCLUSIVE, EXIT_ERROR = 0, 1, 2, 3
EXIT_CONFIG, EXIT_BUDGET = 64, 65

COMMANDS = (
    "gen-set",
    "estimate-dim",
    "check-aikawa",
    "check-ap",
    "sweep-ap",
    "riesz",
    "hs-test",
    "counterexample",
    "mix-check",
    "admissible",
)
NEEDS_SET = {"gen-set", "estimate-dim", "check-aikawa", "check-ap", "sweep-ap", "hs-test", "counterexample", "mix-check"}
FORMATS = ("json", "csv", "both")
FUNCTIONS = ("bump", "tent", "indicator", "shell")


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""


def _field(section: str, kind: str, default: Any = None):
    return dataclasses.field(default=default, metadata={"section": section, "kind": kind})


@dataclass(frozen=True)
class RunConfig:
    set: str | None = _field("problem", "optstr")
    dim: int | None = _field("problem", "optint")
    function: str = _field("problem", "str", "bump")
    center: tuple[float, ...] | None = _field("problem", "optfloats")
    radius: float = _field("problem", "float", 1.0)
    point: tuple[float, ...] | None = _field("problem", "optfloats")

    alpha: float = _field("exponents", "float", 0.0)
    alpha_grid: tuple[float, ...] | None = _field("exponents", "optfloats")
    p: float = _field("exponents", "float", 2.0)
    q: float = _field("exponents", "float", 2.0)
    s: float = _field("exponents", "float", 1.0)
    t: float = _field("exponents", "float", 1.0)
    beta: float = _field("exponents", "float", 0.0)
    codim: float | None = _field("exponents", "optfloat")

    scale_lo: float = _field("scales", "float", 2.0**-6)
    scale_hi: float = _field("scales", "float", 0.5)
    j_lo: int = _field("scales", "int", 3)
    j_hi: int = _field("scales", "int", 8)
    resolution: float | None = _field("scales", "optfloat")
    outer_radii: tuple[float, ...] = _field("scales", "floats", (1.0, 0.5))
    ratio_base: float = _field("scales", "float", 2.0)
    ratio_powers: tuple[int, ...] = _field("scales", "ints", (7, 8))
    centers: int = _field("scales", "int", 4)

    seed: int = _field("mc", "int", 0)
    shells: int = _field("mc", "int", 20)
    samples_per_shell: int = _field("mc", "int", 1024)
    sequence: str = _field("mc", "str", "pseudo-random")
    workers: int = _field("mc", "int", 1)

    out: str = _field("output", "str", "reports")
    format: str = _field("output", "str", "both")
    budget: int | None = _field("output", "optint")

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"format: expected one of {FORMATS}, got {self.format!r}")
        if self.function not in FUNCTIONS:
            raise ConfigError(f"function: expected one of {FUNCTIONS}, got {self.function!r}")
        if not 0 < self.scale_lo <= self.scale_hi:
            raise ConfigError(f"scale_lo/scale_hi: need 0 < scale_lo <= scale_hi, got {self.scale_lo}, {self.scale_hi}")
        if self.j_lo > self.j_hi:
            raise ConfigError(f"j_lo/j_hi: empty range {self.j_lo}..{self.j_hi}")
        if self.budget is not None and self.budget < 1:
            raise ConfigError(f"budget: must be positive, got {self.budget}")
        if self.set is not None:
            try:
                parse_set(self.set, self.dim)
            except ValueError as exc:
                raise ConfigError(f"set: {exc}") from None
        try:
            self.mc
        except ValueError as exc:
            raise ConfigError(f"mc: {exc}") from None

    @property
    def mc(self) -> MCConfig:
        return MCConfig(self.seed, self.shells, self.samples_per_shell, self.sequence, self.workers)

    @property
    def canonical_set(self) -> CanonicalSet:
        if self.set is None:
            raise ConfigError("missing required key 'set' in section [problem]")
        return parse_set(self.set, self.dim)

    @property
    def ambient_dim(self) -> int:
        if self.set is not None:
            return self.canonical_set.ambient_dim
        if self.dim is not None:
            return self.dim
        for v in (self.center, self.point):
            if v is not None:
                return len(v)
        return 2

    @property
    def exponents(self) -> ExponentTuple:
        try:
            return ExponentTuple(float(self.ambient_dim), self.s, self.t, self.p, self.q, self.beta)
        except ValueError as exc:
            raise ConfigError(f"exponents: {exc}") from None

    @property
    def scales(self) -> tuple[float, float]:
        return (self.scale_lo, self.scale_hi)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # -- text form ---------------------------------------------------------

    def emit(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for f in fields(self):
            section = f.metadata["section"]
            if not parser.has_section(section):
                parser.add_section(section)
            value = getattr(self, f.name)
            if value is not None:
                parser.set(section, f.name, _format_value(value))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        known = {f.name: f for f in fields(cls)}
        lines = _key_lines(text)
        values = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                where = f"{source}:{lines.get((section, key), '?')}"
                if key not in known:
                    raise ConfigError(f"{where}: unknown key '{key}' in section [{section}]")
                expected = known[key].metadata["section"]
                if section != expected:
                    raise ConfigError(f"{where}: key '{key}' belongs in section [{expected}], not [{section}]")
                try:
                    values[key] = _parse_value(raw, known[key].metadata["kind"])
                except ValueError as exc:
                    raise ConfigError(f"{where}: key '{key}': {exc}") from None
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.parse(text, str(path))

    def to_dict(self) -> dict:
        return {f.name: list(v) if isinstance(v := getattr(self, f.name), tuple) else v for f in fields(self)}


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _strip_quotes(raw: str) -> str:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    return raw


def _parse_value(raw: str, kind: str):
    raw = _strip_quotes(raw)
    optional = kind.startswith("opt")
    base = kind[3:] if optional else kind
    if optional and raw.lower() in ("", "none"):
        return None
    if base == "str":
        return raw
    if base == "int":
        return int(raw)
    if base == "float":
        return float(raw)
    items = [x.strip() for x in raw.replace(";", ",").split(",") if x.strip()]
    if base == "floats":
        return tuple(float(x) for x in items)
    if base == "ints":
        return tuple(int(x) for x in items)
    raise ValueError(f"unknown field kind {kind}")


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    out, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"\s*([A-Za-z_][\w-]*)\s*[=:]", line)
        if m and section:
            out[(section, m.group(1).lower())] = no
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass
class Outcome:
    status: int
    report: dict
    header: list[str]
    rows: list[list]
    extra_files: dict[str, Callable[[Path], None]] = dataclasses.field(default_factory=dict)


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    if isinstance(x, (tuple, list, np.ndarray)):
        return " ".join(_cell(v) for v in x)
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, Estimate):
        return x.to_dict()
    return x


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def json_text(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def sweep_rows(report: SweepReport) -> tuple[list[str], list[list]]:
    header = ["parameter", "value", "std_error", "truncation_bound", "divergent", "verdict", "range_sups"]
    rows = [
        [r.parameter, r.estimate.value, r.estimate.std_error, r.estimate.truncation_bound, r.estimate.divergent, r.verdict, r.range_sups]
        for r in report.rows
    ]
    return header, rows


def sweep_dict(report: SweepReport) -> dict:
    return {
        "rows": [
            {"parameter": r.parameter, "estimate": r.estimate.to_dict(), "verdict": r.verdict, "range_sups": list(r.range_sups)}
            for r in report.rows
        ],
        "predicted_range": report.predicted_range.to_dict(),
        "agreement": report.agreement,
        "extra": report.extra,
    }


PROBE_HEADER = ["probe_center", "r", "R_or_alpha", "value", "std_error", "verdict"]


# ---------------------------------------------------------------------------
# plans: sample counts estimated before running, checked against --budget


def _family_size(cfg: RunConfig) -> int:
    return 3 * (int(math.floor(math.log2(cfg.scale_hi / cfg.scale_lo) + 1e-9)) + 1)


def default_alpha_grid(n: int, dim_a: float, p: float) -> tuple[float, ...]:
    """Two points outside and three inside the predicted range, each at least
    half a unit from the endpoints when the range allows."""
    rng = predicted_ap_range(n, dim_a, p)
    lo, hi = rng.lo, rng.hi
    inside = sorted({lo + 0.5, (lo + hi) / 2, hi - 0.5})
    inside = [a for a in inside if rng.endpoint_gap(a) >= 0.25 and a in rng] or [(lo + hi) / 2]
    return tuple([lo - 0.5] + inside + [hi + 0.5])


def alpha_grid(cfg: RunConfig) -> tuple[float, ...]:
    if cfg.alpha_grid:
        return cfg.alpha_grid
    s = cfg.canonical_set
    dim_a = theoretical_assouad_dim(s)
    if dim_a is None:
        raise ConfigError("alpha_grid: no default for a set without a known Assouad dimension")
    return default_alpha_grid(s.ambient_dim, dim_a, cfg.p)


def aikawa_grid(cfg: RunConfig) -> tuple[float, ...]:
    if cfg.alpha_grid:
        return cfg.alpha_grid
    n = cfg.ambient_dim
    return tuple(float(a) for a in np.round(np.arange(0.0, n + 0.5 + 1e-9, 0.1), 10))


def plan(command: str, cfg: RunConfig) -> dict:
    """Steps and an upper estimate of Monte Carlo samples for the command."""
    per_integral = (cfg.shells + 1) * cfg.samples_per_shell
    inner = (cfg.shells + 1) * max(16, 2 * math.ceil(math.sqrt(cfg.samples_per_shell)))
    out: dict[str, Any] = {"command": command}
    if command == "gen-set":
        out["steps"] = ["build point cloud", "write cloud CSV"]
        samples = 0
    elif command == "estimate-dim":
        out["pairs"] = len(cfg.outer_radii) * len(cfg.ratio_powers) * cfg.centers
        out["steps"] = ["build point cloud", f"greedy covers for {out['pairs']} scale pairs"]
        samples = 0
    elif command == "check-aikawa":
        grid = aikawa_grid(cfg)
        radii = _aikawa_radii(cfg)
        out["alpha_grid"] = list(grid)
        out["probe_radii"] = radii
        samples = len(grid) * 2 * len(radii) * per_integral
        out["steps"] = [f"Aikawa ratios at {len(grid)} exponents x {2 * len(radii)} probes"]
    elif command == "check-ap":
        samples = 2 * per_integral
        out["steps"] = ["one A_p quotient"]
    elif command == "sweep-ap":
        grid = alpha_grid(cfg)
        out["alpha_grid"] = list(grid)
        out["family_size"] = _family_size(cfg)
        samples = len(grid) * _family_size(cfg) * 2 * per_integral
        out["steps"] = [f"A_p quotients over {out['family_size']} balls at {len(grid)} exponents", "widening verdicts"]
    elif command == "riesz":
        samples = per_integral
        out["steps"] = ["one Riesz potential"]
    elif command == "hs-test":
        samples = 2 * per_integral * (inner if cfg.s < 1 else 1)
        out["steps"] = ["weighted lhs integral", "gradient-side integral"]
    elif command == "counterexample":
        js = cfg.j_hi - cfg.j_lo + 1
        samples = js * 2 * per_integral
        out["j_range"] = [cfg.j_lo, cfg.j_hi]
        out["steps"] = [f"both sides for {js} shell cutoffs", "slope fit"]
    elif command == "mix-check":
        out["family_size"] = _family_size(cfg)
        samples = _family_size(cfg) * 2 * per_integral
        out["steps"] = [f"mixed functional over {out['family_size']} balls", "widening verdict"]
    else:
        samples = 0
        out["steps"] = ["exponent arithmetic"]
    out["estimated_samples"] = samples
    return out


# ---------------------------------------------------------------------------
# subcommands


def _ball(cfg: RunConfig, default_center=None) -> Ball:
    n = cfg.ambient_dim
    center = cfg.center if cfg.center is not None else (default_center if default_center is not None else (0.0,) * n)
    if len(center) != n:
        raise ConfigError(f"center: expected {n} coordinates, got {len(center)}")
    return Ball(tuple(center), cfg.radius)


def _status(agreement: bool | None, inconclusive: bool = False) -> int:
    if agreement:
        return EXIT_OK
    return EXIT_INCONCLUSIVE if inconclusive or agreement is None else EXIT_DISAGREE


def cmd_gen_set(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    res = cfg.resolution or default_resolution(s)
    cloud = canonical_cloud(s, res)
    report = {
        "set": s.spec,
        "ambient_dim": s.ambient_dim,
        "points": len(cloud),
        "resolution": cloud.resolution,
        "assouad_dim": theoretical_assouad_dim(s),
    }
    header = ["set", "points", "resolution", "assouad_dim"]
    rows = [[s.spec, len(cloud), cloud.resolution, report["assouad_dim"]]]
    return Outcome(EXIT_OK, report, header, rows, {"cloud.csv": cloud.write_csv})


def cmd_estimate_dim(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    # covers need r at least twice the cloud resolution
    smallest_r = min(cfg.outer_radii) / cfg.ratio_base ** max(cfg.ratio_powers)
    res = cfg.resolution or min(default_resolution(s), smallest_r / 2)
    cloud = canonical_cloud(s, res)
    rng = cfg.mc.generator(0)
    centers = [0] + sorted(rng.choice(len(cloud), size=min(cfg.centers, len(cloud)) - 1, replace=False).tolist()) if cfg.centers > 1 else [0]
    pairs = [ScalePair(R, R / cfg.ratio_base**k, int(c)) for c in centers for R in cfg.outer_radii for k in cfg.ratio_powers]
    est = assouad_dim_estimate(cloud, pairs)
    expected = theoretical_assouad_dim(s)
    agreement = None if expected is None else abs(est.value - expected) <= 0.1
    rows = []
    tree = cKDTree(cloud.points)
    for p in pairs:
        count = covering_number(cloud, cloud.points[p.center_index], p.R, p.r, tree=tree)
        rows.append([tuple(cloud.points[p.center_index]), p.r, p.R, math.log(max(count, 1)) / math.log(p.R / p.r), 0.0, f"cover={count}"])
    report = {
        "set": s.spec,
        "estimate": est.value,
        "spread": est.spread,
        "pairs": est.pairs,
        "cloud_points": len(cloud),
        "cloud_resolution": cloud.resolution,
        "assouad_dim": expected,
        "agreement": agreement,
    }
    return Outcome(_status(agreement), report, PROBE_HEADER, rows)


def _aikawa_radii(cfg: RunConfig) -> list[float]:
    k = max(2, int(math.floor(math.log2(cfg.scale_hi / cfg.scale_lo) + 1e-9)))
    return [cfg.scale_lo * 2.0**i for i in range(k + 1)]


def cmd_check_aikawa(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    rng = cfg.mc.generator(1)
    centers = points_on_set(s, 2, rng)
    radii = _aikawa_radii(cfg)
    probes = [(tuple(c), r) for c in centers for r in radii]
    bracket = aikawa_codim_estimate(s, aikawa_grid(cfg), probes, cfg.mc)
    dim_a = theoretical_assouad_dim(s)
    expected = None if dim_a is None else s.ambient_dim - dim_a
    if not bracket.conclusive:
        status, agreement = EXIT_INCONCLUSIVE, None
    else:
        agreement = None if expected is None else bracket.lo - 0.1 <= expected <= bracket.hi + 0.1
        status = _status(agreement)
    rows = [
        [pr.center, pr.radius, pr.alpha, pr.ratio.value, pr.ratio.std_error, "divergent" if pr.ratio.divergent else ""]
        for pr in bracket.probes
    ]
    report = {
        "set": s.spec,
        "bracket": [bracket.lo, bracket.hi],
        "conclusive": bracket.conclusive,
        "codim": expected,
        "agreement": agreement,
        "probe_radii": radii,
    }
    return Outcome(status, report, PROBE_HEADER, rows)


def cmd_check_ap(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    ball = _ball(cfg)
    w = DistanceWeight(s, cfg.alpha)
    q = a1_quotient(w, ball, cfg.mc) if cfg.p == 1 else ap_quotient(w, ball, cfg.p, cfg.mc)
    dim_a = theoretical_assouad_dim(s)
    predicted = None if dim_a is None else predicted_ap_range(s.ambient_dim, dim_a, cfg.p)
    inside = None if predicted is None else cfg.alpha in predicted
    status = EXIT_DISAGREE if (q.value.divergent and inside) else EXIT_OK
    report = {
        "set": s.spec,
        "ball": {"center": list(ball.center), "radius": ball.radius},
        "p": cfg.p,
        "alpha": cfg.alpha,
        "quotient": q.value.to_dict(),
        "predicted_range": predicted.to_dict() if predicted else None,
        "inside_predicted_range": inside,
    }
    header = ["alpha", "p", "value", "std_error", "truncation_bound", "divergent"]
    v = q.value
    return Outcome(status, report, header, [[cfg.alpha, cfg.p, v.value, v.std_error, v.truncation_bound, v.divergent]])


def cmd_sweep_ap(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    grid = alpha_grid(cfg)
    rep = ap_threshold_sweep(s, cfg.p, grid, cfg.scales, cfg.mc)
    counted = [agrees(r.parameter, r.verdict, rep.predicted_range) for r in rep.rows]
    inconclusive = any(r.verdict == "inconclusive" for r, c in zip(rep.rows, counted) if c is not None)
    header, rows = sweep_rows(rep)
    return Outcome(_status(rep.agreement, inconclusive), {"set": s.spec, "p": cfg.p, **sweep_dict(rep)}, header, rows)


def _function(cfg: RunConfig):
    n = cfg.ambient_dim
    center = cfg.center if cfg.center is not None else (0.0,) * n
    if cfg.function == "bump":
        return RadialBump(center, cfg.radius)
    if cfg.function == "tent":
        return Tent(center, cfg.radius)
    if cfg.function == "indicator":
        return indicator(Ball(tuple(center), cfg.radius))
    return ShellCutoff(cfg.canonical_set, cfg.j_lo)


def cmd_riesz(cfg: RunConfig) -> Outcome:
    f = _function(cfg)
    n = cfg.ambient_dim
    x = cfg.point if cfg.point is not None else (0.0,) * n
    if len(x) != n:
        raise ConfigError(f"point: expected {n} coordinates, got {len(x)}")
    try:
        est = riesz_potential(f, cfg.s, x, cfg.mc)
    except ValueError as exc:
        raise ConfigError(f"s: {exc}") from None
    report = {"function": cfg.function, "s": cfg.s, "point": list(x), "potential": est.to_dict()}
    header = ["s", "point", "value", "std_error", "truncation_bound", "divergent"]
    return Outcome(EXIT_OK, report, header, [[cfg.s, tuple(x), est.value, est.std_error, est.truncation_bound, est.divergent]])


def cmd_hs_test(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    if cfg.function == "indicator":
        raise ConfigError("function: hs-test needs a Lipschitz test function (bump, tent or shell)")
    verdict = hs_ratio(s, _function(cfg), cfg.exponents, cfg.mc)
    if verdict.admissible is False:
        status = EXIT_INCONCLUSIVE
    elif verdict.lhs.divergent or verdict.rhs.divergent or not math.isfinite(verdict.ratio):
        status = EXIT_DISAGREE if verdict.admissible else EXIT_INCONCLUSIVE
    else:
        status = EXIT_OK
    report = {"set": s.spec, "function": cfg.function, "exponents": dataclasses.asdict(cfg.exponents), **verdict.to_dict()}
    header = ["side", "value", "std_error", "truncation_bound", "divergent"]
    rows = [[name, e.value, e.std_error, e.truncation_bound, e.divergent] for name, e in (("lhs", verdict.lhs), ("rhs", verdict.rhs))]
    return Outcome(status, report, header, rows)


def cmd_counterexample(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    rep = counterexample_sweep(s, cfg.exponents, range(cfg.j_lo, cfg.j_hi + 1), cfg.mc)
    ex = rep.extra
    header = ["j", "lhs", "lhs_std_error", "rhs", "rhs_std_error"]
    rows = [list(r) for r in zip(ex["j"], ex["lhs"], ex["lhs_std_error"], ex["rhs"], ex["rhs_std_error"])]
    return Outcome(_status(rep.agreement), {"set": s.spec, "exponents": dataclasses.asdict(cfg.exponents), **sweep_dict(rep)}, header, rows)


def cmd_mix_check(cfg: RunConfig) -> Outcome:
    s = cfg.canonical_set
    rep = mix_condition_sweep(s, cfg.exponents, cfg.scales, cfg.mc)
    inconclusive = rep.rows[0].verdict == "inconclusive"
    header, rows = sweep_rows(rep)
    return Outcome(_status(rep.agreement, inconclusive), {"set": s.spec, "exponents": dataclasses.asdict(cfg.exponents), **sweep_dict(rep)}, header, rows)


def cmd_admissible(cfg: RunConfig) -> Outcome:
    if cfg.codim is not None:
        codim = cfg.codim
    else:
        dim_a = theoretical_assouad_dim(cfg.canonical_set) if cfg.set else None
        if dim_a is None:
            raise ConfigError("missing required key 'codim' in section [exponents] (or a 'set' with known dimension)")
        codim = cfg.ambient_dim - dim_a
    adm = admissible_exponents(cfg.exponents, codim)
    report = {"exponents": dataclasses.asdict(cfg.exponents), **adm.to_dict()}
    header = ["codim", "dimension_term", "beta_term", "admissible", "binding_condition", "classical_beta_bound", "codim_beta_bound", "weaker"]
    row = [codim, adm.dimension_term, adm.beta_term, adm.admissible, adm.binding_condition, adm.classical_beta_bound, adm.codim_beta_bound, adm.weaker]
    return Outcome(EXIT_OK, report, header, [row])


HANDLERS: dict[str, Callable[[RunConfig], Outcome]] = {
    "gen-set": cmd_gen_set,
    "estimate-dim": cmd_estimate_dim,
    "check-aikawa": cmd_check_aikawa,
    "check-ap": cmd_check_ap,
    "sweep-ap": cmd_sweep_ap,
    "riesz": cmd_riesz,
    "hs-test": cmd_hs_test,
    "counterexample": cmd_counterexample,
    "mix-check": cmd_mix_check,
    "admissible": cmd_admissible,
}


# ---------------------------------------------------------------------------
# driver

HELP = {
    "gen-set": "write a point cloud of the set",
    "estimate-dim": "covering-number Assouad dimension estimate",
    "check-aikawa": "bracket the Aikawa codimension",
    "check-ap": "one A_p quotient on one ball",
    "sweep-ap": "A_p threshold sweep over a ball family",
    "riesz": "Riesz potential of a test function at a point",
    "hs-test": "both sides of the weighted Hardy-Sobolev inequality",
    "counterexample": "shell cutoff sweep in the failure regime",
    "mix-check": "mixed ball condition over a ball family",
    "admissible": "exponent admissibility and bound comparison",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apweights", description="Numerical checks for distance weights near fractal sets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="INI run config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--dry-run", action="store_true", help="validate and print the plan without computing")
        p.add_argument("--budget", type=int, help="maximum Monte Carlo samples")
        p.add_argument("--workers", type=int, help="thread count for ball families")
        p.add_argument("-D", "--define", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    changes: dict[str, Any] = {}
    known = {f.name: f for f in fields(RunConfig)}
    for item in args.define:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise ConfigError(f"--define {item!r}: expected KEY=VALUE with a known key")
        try:
            changes[key] = _parse_value(raw, known[key].metadata["kind"])
        except ValueError as exc:
            raise ConfigError(f"--define {key}: {exc}") from None
    for flag in ("seed", "out", "format", "budget", "workers"):
        value = getattr(args, flag)
        if value is not None:
            changes[flag] = value
    try:
        return cfg.replace(**changes) if changes else cfg
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _validate_for(command: str, cfg: RunConfig) -> None:
    if command in NEEDS_SET and cfg.set is None:
        raise ConfigError("missing required key 'set' in section [problem]")
    if command in ("hs-test", "counterexample", "mix-check", "admissible"):
        cfg.exponents
    if command == "riesz" and cfg.function == "shell" and cfg.set is None:
        raise ConfigError("missing required key 'set' in section [problem] (needed by function = shell)")


def write_outputs(command: str, cfg: RunConfig, outcome: Outcome, wall: float, started: str) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    report = {"command": command, "status": outcome.status, **outcome.report}
    if cfg.format in ("json", "both"):
        (out / "report.json").write_text(json_text(report), encoding="utf-8")
        written.append("report.json")
    if cfg.format in ("csv", "both"):
        (out / "report.csv").write_text(csv_text(outcome.header, outcome.rows), encoding="utf-8")
        written.append("report.csv")
    for name, writer in outcome.extra_files.items():
        writer(out / name)
        written.append(name)
    config_text = cfg.emit()
    manifest = {
        "command": command,
        "exit_status": outcome.status,
        "config": cfg.to_dict(),
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "seed": cfg.seed,
        "versions": {
            "apweights": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "started_utc": started,
        "wall_time_s": wall,
        "outputs": written,
    }
    (out / "manifest.json").write_text(json_text(manifest), encoding="utf-8")
    return manifest


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg = resolve_config(args)
        _validate_for(command, cfg)
        steps = plan(command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        print(cfg.emit(), end="")
        print(json_text({"plan": steps}), end="")
        return EXIT_OK
    if cfg.budget is not None and steps["estimated_samples"] > cfg.budget:
        print(f"budget exceeded: plan needs about {steps['estimated_samples']} samples, budget is {cfg.budget}", file=sys.stderr)
        return EXIT_BUDGET
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    t0 = time.perf_counter()
    try:
        outcome = HANDLERS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    write_outputs(command, cfg, outcome, time.perf_counter() - t0, started)
    summary = {k: outcome.report[k] for k in ("agreement", "estimate", "bracket", "ratio", "admissible", "potential", "quotient") if k in outcome.report}
    print(json.dumps({"command": command, "status": outcome.status, **_jsonable(summary)}, sort_keys=True))
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
