"""Config-driven experiments: sweeps, single solves and model validation.

A config is one JSON document; every output is a pure function of it (plus
any seed override), so repeated runs write identical bytes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .comm import Scenario, ScenarioParams, generate_scenario
from .errors import ConfigError, DomainError
from .numerics import q
from .optimizer import AllocationPlan, parse_scheme, solve, solve_at_fs
from .sensing import (AlphaModel, ClassSet, SensingParams, class_arrays, default_class_set,
                      load_json)
from .signal_sim import SIM_METHODS, matched_spec, simulate_powers

SWEEP_AXES = ("f_edge", "n_devices", "p_static", "t_sense_max", "threshold_ratio", "f_s")
SWEEP_HEADER = "# iscc-sweep v1"
SWEEP_COLUMNS = ("axis", "value", "seed", "scheme", "feasible", "accuracy", "sensing_delay",
                 "f_sense", "f_s", "eta")
VALIDATE_HEADER = "# iscc-validate v1"
VALIDATE_COLUMNS = ("class", "f_s", "quantity", "eta", "predicted", "empirical", "stderr",
                    "tolerance", "pass")


@dataclass(frozen=True)
class ValidateSettings:
    f_s: tuple[float, ...] = (50.0, 100.0, 200.0, 400.0, 800.0)
    eta_points: int = 5
    trials: int = 100_000
    rate_floor: float = 0.01  # smallest rate tolerance, on top of 3 standard errors
    classes: Optional[tuple[int, ...]] = None  # class indices; None means all
    sigma_d2_scale: float = 1.0  # perturbs the simulated classes only
    method: str = "band"  # "full" synthesises whole windows (slow at high rates)
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    n_devices: int = 15
    scenario_file: Optional[str] = None
    sensing: SensingParams = field(default_factory=SensingParams)
    class_set: ClassSet = field(default_factory=default_class_set)
    alpha: AlphaModel = field(default_factory=AlphaModel)
    schemes: tuple[str, ...] = ("proposed", "conventional")
    sweep_axis: str = "f_edge"
    sweep_grid: tuple[float, ...] = (40e9,)
    seeds: tuple[int, ...] = (0,)
    output: str = "sweep.csv"
    step: int = 1
    m_segments: int = 8
    workers: int = 1
    validate: ValidateSettings = field(default_factory=ValidateSettings)

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: expected one of {', '.join(SWEEP_AXES)}, "
                              f"got {self.sweep_axis!r}")
        if not self.sweep_grid:
            raise ConfigError("sweep.grid: must not be empty")
        if not self.seeds:
            raise ConfigError("seeds: must not be empty")
        if not self.schemes:
            raise ConfigError("schemes: must not be empty")
        for s in self.schemes:
            name, ratio = _scheme_for_axis(s, self.sweep_axis)
            if name == "fixed_threshold" and ratio is None and self.sweep_axis != "threshold_ratio":
                raise ConfigError(f"schemes: {s!r} needs a ratio unless sweeping threshold_ratio")
        if self.step < 1:
            raise ConfigError(f"step: must be >= 1, got {self.step!r}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {self.workers!r}")
        if self.n_devices < 1:
            raise ConfigError(f"scenario.n_devices: must be >= 1, got {self.n_devices!r}")


def _scheme_for_axis(label: str, axis: str):
    if label.strip() == "fixed_threshold" and axis == "threshold_ratio":
        return "fixed_threshold", None
    return parse_scheme(label)


def _section(doc: dict, key: str, cls, where: str):
    raw = doc.get(key)
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    try:
        return cls.from_dict(raw) if hasattr(cls, "from_dict") else cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path, seed: Optional[int] = None, step: Optional[int] = None) -> ExperimentConfig:
    """Parse a config file; ``seed``/``step`` override the file's values.

    Every problem raises :class:`ConfigError` naming the field (or the JSON
    line and column for syntax errors).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(doc, base=path.parent, seed=seed, step=step)


def _resolve(base: Optional[Path], name: str, where: str) -> Path:
    p = Path(name)
    if base is not None and not p.is_absolute():
        p = base / p
    if not p.exists():
        raise ConfigError(f"{where}: file {str(p)!r} does not exist")
    return p


def config_from_dict(doc: dict, base: Optional[Path] = None, seed: Optional[int] = None,
                     step: Optional[int] = None) -> ExperimentConfig:
    known = {"scenario", "sensing", "class_set", "class_set_file", "alpha", "schemes", "sweep",
             "seeds", "output", "step", "m_segments", "workers", "validate"}
    extra = sorted(set(doc) - known)
    if extra:
        raise ConfigError(f"unknown field(s): {', '.join(extra)}")

    scen = dict(doc.get("scenario") or {})
    n_devices = int(scen.pop("n_devices", 15))
    scenario_file = scen.pop("file", None)
    if scenario_file is not None:
        scenario_file = str(_resolve(base, scenario_file, "scenario.file"))
    try:
        scenario = ScenarioParams.from_dict(scen)
    except TypeError as exc:
        raise ConfigError(f"scenario: {exc}") from None

    sensing = _section(doc, "sensing", SensingParams, "sensing")
    if "class_set" in doc and "class_set_file" in doc:
        raise ConfigError("give either class_set or class_set_file, not both")
    if "class_set_file" in doc:
        p = _resolve(base, doc["class_set_file"], "class_set_file")
        try:
            class_set, _ = load_json(p)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"class_set_file: {exc}") from None
    elif "class_set" in doc:
        try:
            class_set = ClassSet.from_dict(doc["class_set"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"class_set: {exc}") from None
    else:
        class_set = default_class_set()
    alpha = _section(doc, "alpha", AlphaModel, "alpha")

    sweep = doc.get("sweep") or {}
    axis = sweep.get("axis", "f_edge")
    grid = tuple(float(v) for v in sweep.get("grid", [scenario.f_edge_hz]))
    seeds = tuple(int(s) for s in doc.get("seeds", [0]))
    if seed is not None:
        seeds = (int(seed),)

    vdoc = dict(doc.get("validate") or {})
    for k in ("f_s", "classes"):
        if k in vdoc and vdoc[k] is not None:
            vdoc[k] = tuple(vdoc[k])
    try:
        validate = ValidateSettings(**vdoc)
    except TypeError as exc:
        raise ConfigError(f"validate: {exc}") from None
    if validate.method not in SIM_METHODS:
        raise ConfigError(f"validate.method: expected one of {', '.join(SIM_METHODS)}, "
                          f"got {validate.method!r}")
    if validate.trials < 100:
        raise ConfigError(f"validate.trials: need at least 100, got {validate.trials!r}")

    return ExperimentConfig(
        scenario=scenario,
        n_devices=n_devices,
        scenario_file=scenario_file,
        sensing=sensing,
        class_set=class_set,
        alpha=alpha,
        schemes=tuple(doc.get("schemes", ("proposed", "conventional"))),
        sweep_axis=axis,
        sweep_grid=grid,
        seeds=seeds,
        output=str(doc.get("output", "sweep.csv")),
        step=int(step if step is not None else doc.get("step", 1)),
        m_segments=int(doc.get("m_segments", 8)),
        workers=int(doc.get("workers", 1)),
        validate=validate,
    )


# --- sweeps -----------------------------------------------------------------------------


def base_scenario(cfg: ExperimentConfig, seed: int, n_devices: Optional[int] = None) -> Scenario:
    if cfg.scenario_file is not None:
        s = Scenario.load(cfg.scenario_file)
        return s if n_devices is None else s.with_devices(n_devices)
    return generate_scenario(n_devices or cfg.n_devices, params=cfg.scenario, seed=seed)


def _format(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def run_point(cfg: ExperimentConfig, value: float, seed: int) -> list[tuple]:
    """All schemes at one sweep point and seed, in config order."""
    axis = cfg.sweep_axis
    sp, cs = cfg.sensing, cfg.class_set
    n = int(value) if axis == "n_devices" else None
    s = base_scenario(cfg, seed, n)
    if axis == "f_edge":
        s = s.with_edge(value)
    elif axis == "p_static":
        cs = cs.with_static_prior(value)
    elif axis == "t_sense_max":
        sp = replace(sp, t_sense_max=value)
    rows = []
    for label in cfg.schemes:
        name, ratio = _scheme_for_axis(label, axis)
        if name == "fixed_threshold" and ratio is None:
            label = f"fixed_threshold:{value!r}"
        if axis == "f_s":
            plan = solve_at_fs(label, s, sp, cs, cfg.alpha, int(value), cfg.m_segments)
        else:
            plan = solve(label, s, sp, cs, cfg.alpha, cfg.step, cfg.m_segments)
        rows.append((axis, value, seed, label, plan.feasible, plan.accuracy, plan.sensing_delay,
                     plan.f_sense, plan.f_s, plan.eta))
    return rows


def _run_point_args(args):
    return run_point(*args)


def run_sweep(cfg: ExperimentConfig) -> list[tuple]:
    """Rows in (sweep point, seed, scheme) order regardless of worker count."""
    jobs = [(cfg, v, sd) for v in cfg.sweep_grid for sd in cfg.seeds]
    if cfg.workers == 1 or len(jobs) == 1:
        parts = [run_point(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            parts = list(pool.map(_run_point_args, jobs))
    return [row for part in parts for row in part]


def write_sweep_csv(path, rows: list[tuple], cfg: ExperimentConfig):
    with open(path, "w", newline="") as fh:
        fh.write(f"{SWEEP_HEADER} axis={cfg.sweep_axis}\n")
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join([r[0], _format(r[1]), str(r[2]), r[3]] + [_format(v) for v in r[4:]])
                     + "\n")


def read_sweep_csv(path) -> list[dict]:
    """Parse a sweep CSV, enforcing the versioned header and column schema."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(SWEEP_HEADER + " "):
        raise ConfigError(f"{path}: line 1: expected {SWEEP_HEADER!r} header")
    if tuple(lines[1].split(",")) != SWEEP_COLUMNS:
        raise ConfigError(f"{path}: line 2: unexpected columns")
    out = []
    for lineno, line in enumerate(lines[2:], start=3):
        vals = line.split(",")
        if len(vals) != len(SWEEP_COLUMNS):
            raise ConfigError(f"{path}: line {lineno}: expected {len(SWEEP_COLUMNS)} fields")
        row = dict(zip(SWEEP_COLUMNS, vals))
        row["value"] = float(row["value"])
        row["seed"] = int(row["seed"])
        row["feasible"] = row["feasible"] == "1"
        for k in ("accuracy", "sensing_delay", "f_sense", "f_s", "eta"):
            row[k] = float(row[k]) if row[k] else None
        out.append(row)
    return out


def solve_all(cfg: ExperimentConfig) -> list[AllocationPlan]:
    """Every configured scheme on the first seed's scenario."""
    s = base_scenario(cfg, cfg.seeds[0])
    return [solve(label, s, cfg.sensing, cfg.class_set, cfg.alpha, cfg.step, cfg.m_segments)
            for label in cfg.schemes]


# --- validation -------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationCell:
    label: str
    f_s: float
    quantity: str
    eta: Optional[float]
    predicted: float
    empirical: float
    stderr: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.empirical - self.predicted) <= self.tolerance


def validate_model(cfg: ExperimentConfig) -> list[ValidationCell]:
    """Simulate each class and compare rates and moments with the model.

    Rates use tolerance ``max(3 * stderr, rate_floor)``; moments use
    ``3 * stderr``. Thresholds span ``[0.2 * static mean, eta_u]`` at each rate.
    """
    v = cfg.validate
    cs, sp = cfg.class_set, cfg.sensing
    idx = range(len(cs)) if v.classes is None else v.classes
    cells = []
    for i in idx:
        if not 0 <= i < len(cs):
            raise ConfigError(f"validate.classes: index {i} out of range")
        c = cs.classes[i]
        sim = replace(c, sigma_d2_i=c.sigma_d2_i * v.sigma_d2_scale)
        spec = matched_spec(sim, sp, static=(i == 0))
        label = "static" if i == 0 else f"action{i}"
        for f_s in v.f_s:
            mu, sig = class_arrays(cs, sp, f_s)
            powers = simulate_powers(spec, sp, f_s, v.trials, v.seed + 1000 * i, method=v.method)
            n = powers.size
            m = powers.mean()
            var = powers.var(ddof=1)
            m4 = np.mean((powers - m) ** 4)
            cells.append(ValidationCell(label, f_s, "mean", None, mu[i], m, math.sqrt(var / n),
                                        3 * math.sqrt(var / n)))
            se_var = math.sqrt(max(m4 - var**2, 0.0) / n)
            cells.append(ValidationCell(label, f_s, "var", None, sig[i] ** 2, var, se_var,
                                        3 * se_var))
            etas = np.linspace(0.2 * mu[0], mu[1:].min(), v.eta_points)
            srt = np.sort(powers)
            for eta in etas:
                above = (n - np.searchsorted(srt, eta, side="right")) / n
                if i == 0:
                    quantity, emp, pred = "fp_rate", above, q((eta - mu[0]) / sig[0])
                else:
                    quantity, emp, pred = "miss_rate", 1.0 - above, q((mu[i] - eta) / sig[i])
                se = math.sqrt(emp * (1 - emp) / n)
                cells.append(ValidationCell(label, f_s, quantity, float(eta), pred, emp, se,
                                            max(3 * se, v.rate_floor)))
    return cells


def write_validation_csv(path, cells: list[ValidationCell]):
    with open(path, "w", newline="") as fh:
        fh.write(VALIDATE_HEADER + "\n")
        fh.write(",".join(VALIDATE_COLUMNS) + "\n")
        for c in cells:
            fh.write(",".join([c.label, _format(c.f_s), c.quantity, _format(c.eta),
                               _format(c.predicted), _format(c.empirical), _format(c.stderr),
                               _format(c.tolerance), _format(c.passed)]) + "\n")
