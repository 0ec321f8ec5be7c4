"""Scenario documents, the preset registry and the run pipeline behind the CLI."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Any, Optional

import numpy as np

from .baselines import (
    design_discrete_observer,
    simulate_continuous,
    simulate_discrete_observer,
    simulate_zoh,
)
from .design import design_highgain, design_linear
from .errors import ConfigError, IncompatibleScenarios
from .metrics import Metrics, compute_metrics
from .plants import LINEAR, get_plant
from .simulate import (
    NoiseSignal,
    PerturbationSource,
    default_step,
    generate_schedule,
    simulate_sampled_data,
)

SAMPLED = "sampled-data"
ZOH = "zoh"
CONTINUOUS = "continuous"
DISCRETE = "discrete"
KINDS = (CONTINUOUS, SAMPLED, ZOH, DISCRETE)

CONVERGENCE_FACTOR = 1e-3


def number(v, name="value"):
    """Accept JSON numbers and rational strings such as ``"64/3"``."""
    if isinstance(v, bool):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{name}: expected a number, got {v!r}")


def _numbers(seq, name):
    if not isinstance(seq, (list, tuple)):
        raise ConfigError(f"{name}: expected a list")
    return [number(v, name) for v in seq]


def _matrix(rows, name):
    if not isinstance(rows, (list, tuple)):
        raise ConfigError(f"{name}: expected a list of rows")
    return [_numbers(r, name) for r in rows]


def _poles(seq, name):
    out = []
    for v in seq:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            out.append(complex(number(v[0], name), number(v[1], name)))
        else:
            out.append(number(v, name))
    return out


@dataclass
class Scenario:
    name: str
    raw: dict

    @property
    def kind(self):
        return self.raw["observer"]["kind"]

    @property
    def plant_key(self):
        return self.raw["plant"]

    def get(self, key, default=None):
        return self.raw.get(key, default)


DEFAULTS = {
    "x0": [0, 2],
    "z0": [1, 1],
    "w0": 0,
    "step": None,
    "t_end": 30,
    "stride": 1,
    "window": 0.25,
    "tolerance": 1e-3,
    "noise": {"kind": "zero"},
    "schedule": {"r": 0.081, "d": {"kind": "zero"}},
}


def parse_scenario(raw: dict, name: Optional[str] = None) -> Scenario:
    """Validate a scenario mapping and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a mapping")
    sc = copy.deepcopy(DEFAULTS)
    sc.update(copy.deepcopy(raw))
    sc["name"] = name or raw.get("name") or "scenario"
    if "plant" not in sc:
        raise ConfigError(f"{sc['name']}: missing 'plant'")
    obs = sc.get("observer")
    if not isinstance(obs, dict) or obs.get("kind") not in KINDS:
        raise ConfigError(f"{sc['name']}: observer.kind must be one of {KINDS}")
    try:
        get_plant(sc["plant"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{sc['name']}: {exc}") from exc
    sched = sc["schedule"]
    if not isinstance(sched, dict) or number(sched.get("r", 0), "schedule.r") <= 0:
        raise ConfigError(f"{sc['name']}: schedule.r must be positive")
    if sc["step"] is not None and number(sc["step"], "step") <= 0:
        raise ConfigError(f"{sc['name']}: step must be positive")
    if number(sc["t_end"], "t_end") <= 0:
        raise ConfigError(f"{sc['name']}: t_end must be positive")
    w = number(sc["window"], "window")
    if not 0 < w < 1:
        raise ConfigError(f"{sc['name']}: window fraction must lie in (0, 1)")
    _numbers(sc["x0"], "x0")
    _numbers(sc["z0"], "z0")
    if obs["kind"] != DISCRETE and "design" not in obs:
        raise ConfigError(f"{sc['name']}: observer.design is required for {obs['kind']}")
    if obs["kind"] == DISCRETE and ("T" not in obs or "targets" not in obs):
        raise ConfigError(f"{sc['name']}: discrete observer needs T and targets")
    return Scenario(name=sc["name"], raw=sc)


def load_presets():
    text = resources.files("sdobs").joinpath("presets.json").read_text()
    return json.loads(text)


def load_document(path):
    """Read a config document. ``"builtin"`` returns the shipped presets."""
    if path in (None, "builtin"):
        return load_presets()
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    return doc


def resolve(doc, preset=None) -> Scenario:
    """Pick a scenario from a document: a named preset or the document itself."""
    presets = dict(load_presets()["presets"])
    presets.update(doc.get("presets", {}))
    if preset is not None:
        if preset not in presets:
            raise ConfigError(f"unknown preset {preset!r}; known: {sorted(presets)}")
        return parse_scenario(presets[preset], preset)
    if "plant" in doc:
        return parse_scenario(doc)
    if "default" in doc:
        return resolve(doc, doc["default"])
    raise ConfigError("config holds presets only; choose one with --preset")


def apply_overrides(sc: Scenario, seed=None, step=None, t_end=None, r=None) -> Scenario:
    raw = copy.deepcopy(sc.raw)
    if seed is not None:
        raw.setdefault("schedule", {}).setdefault("d", {"kind": "zero"})["seed"] = int(seed)
        raw.setdefault("noise", {"kind": "zero"})["seed"] = int(seed)
    if step is not None:
        raw["step"] = step
    if t_end is not None:
        raw["t_end"] = t_end
    if r is not None:
        raw["schedule"]["r"] = r
    return parse_scenario(raw, sc.name)


def build_design(sc: Scenario):
    """Construct the observer design named by a scenario."""
    plant = get_plant(sc.plant_key)
    obs = sc.raw["observer"]
    if obs["kind"] == DISCRETE:
        if plant.kind != LINEAR:
            raise ConfigError("discrete observer requires a linear plant")
        return plant, design_discrete_observer(
            plant.a, plant.c, number(obs["T"], "T"), _poles(obs["targets"], "targets")
        )
    cfg = obs["design"]
    dtype = cfg.get("type")
    if dtype == "linear":
        P = cfg.get("P")
        return plant, design_linear(
            plant,
            _numbers(cfg["k"], "k"),
            mu=None if cfg.get("mu") is None else number(cfg["mu"], "mu"),
            gamma=None if cfg.get("gamma") is None else number(cfg["gamma"], "gamma"),
            P=None if P is None else _matrix(P, "P"),
            Q=None if cfg.get("Q") is None else _matrix(cfg["Q"], "Q"),
        )
    if dtype == "highgain":
        theta = cfg.get("theta")
        return plant, design_highgain(
            plant,
            _poles(cfg["poles"], "poles"),
            number(cfg.get("mu", 1.0), "mu"),
            theta_override=None if theta is None else number(theta, "theta"),
        )
    raise ConfigError(f"unknown design type {dtype!r}")


def build_schedule(sc: Scenario, t_end=None):
    s = sc.raw["schedule"]
    d = s.get("d", {"kind": "zero"})
    src = PerturbationSource(
        kind=d.get("kind", "zero"),
        value=number(d.get("value", 0.0), "d.value"),
        d_max=number(d.get("d_max", 0.0), "d.d_max"),
        seed=int(d.get("seed", 0)),
    )
    return generate_schedule(
        number(s["r"], "schedule.r"), src, t_end or number(sc.raw["t_end"], "t_end")
    )


def build_noise(sc: Scenario):
    n = sc.raw.get("noise") or {"kind": "zero"}
    return NoiseSignal(
        kind=n.get("kind", "zero"),
        level=number(n.get("level", 0.0), "noise.level"),
        bound=number(n.get("bound", 0.0), "noise.bound"),
        seed=int(n.get("seed", 0)),
        samples=tuple(_numbers(n.get("samples", []), "noise.samples")),
        hold=number(n.get("hold", 0.01), "noise.hold"),
    )


@dataclass
class RunResult:
    scenario: Scenario
    design: Any
    trajectory: Any  # HybridTrajectory or SampledErrorSeries
    metrics: Metrics
    r: Optional[float]
    r_max: Optional[float]
    certified: Optional[bool]
    converged: bool
    failed: Optional[str] = None

    def row(self):
        row = {
            "name": self.scenario.name,
            "observer": self.scenario.kind,
            "r": "" if self.r is None else self.r,
            "r_max": "" if self.r_max is None else ("unbounded" if math.isinf(self.r_max) else self.r_max),
            "certified": "n/a" if self.certified is None else str(self.certified).lower(),
            "converged": str(self.converged).lower(),
        }
        row.update(self.metrics.as_row())
        return row


def run_scenario(sc: Scenario, exact_init=False) -> RunResult:
    """Design and simulate one scenario and compute its metrics.

    ``exact_init`` starts the observer on the true state (``z0 = x0``,
    ``w0 = h(x0)``) with no measurement noise.
    """
    plant, design = build_design(sc)
    raw = sc.raw
    kind = sc.kind
    x0 = np.array(_numbers(raw["x0"], "x0"))
    z0 = np.array(_numbers(raw["z0"], "z0"))
    w0 = number(raw["w0"], "w0")
    noise = build_noise(sc)
    if exact_init:
        z0 = x0.copy()
        w0 = plant.h(x0)
        noise = NoiseSignal()
    t_end = number(raw["t_end"], "t_end")
    window = number(raw["window"], "window")
    tol = number(raw["tolerance"], "tolerance")
    r = number(raw["schedule"]["r"], "schedule.r")
    step = None if raw["step"] is None else number(raw["step"], "step")

    r_max = None
    certified = None
    if kind == CONTINUOUS:
        traj = simulate_continuous(
            plant, design.observer, noise, x0, z0, step or 1e-3, t_end
        )
        times, err = traj.times, traj.error
        r = None
    elif kind in (SAMPLED, ZOH):
        sched = build_schedule(sc, t_end)
        step = step or default_step(r)
        if kind == SAMPLED:
            traj = simulate_sampled_data(
                plant,
                design.observer,
                sched,
                noise,
                x0,
                z0,
                w0,
                step=step,
                t_end=t_end,
                stale_reset=bool(raw["observer"].get("stale_reset", False)),
            )
            r_max = design.r_max
            certified = bool(r < r_max)
        else:
            traj = simulate_zoh(plant, design.observer, sched, noise, x0, z0, step, t_end)
        times, err = traj.times, traj.error
    else:
        sched = build_schedule(sc, t_end)
        traj = simulate_discrete_observer(plant, design, sched, x0, z0, t_end=t_end)
        times, err = traj.tau, traj.e
    metrics = compute_metrics(times, err, window, tol)
    scale = float(np.linalg.norm(x0) + np.linalg.norm(z0))
    converged = metrics.tail_sup <= CONVERGENCE_FACTOR * max(scale, 1e-12)
    return RunResult(
        scenario=sc,
        design=design,
        trajectory=traj,
        metrics=metrics,
        r=r,
        r_max=r_max,
        certified=certified,
        converged=bool(converged),
    )


def check_compatible(scenarios):
    if not scenarios:
        return
    ref = scenarios[0]
    for sc in scenarios[1:]:
        if sc.plant_key != ref.plant_key:
            raise IncompatibleScenarios(f"{sc.name} uses a different plant than {ref.name}")
        for key in ("x0", "z0"):
            if not np.allclose(_numbers(sc.raw[key], key), _numbers(ref.raw[key], key)):
                raise IncompatibleScenarios(f"{sc.name} has different {key} than {ref.name}")
