"""Scenario configuration: YAML schema, defaults and overrides.

A scenario file is a YAML mapping; every key below is optional and
defaults to the reference three-vehicle spiral scenario::

    name: reference-spiral
    dt: 0.01                  # integrator step (s)
    t_end: 150.0              # simulated time (s)
    seed: 0                   # randomized-initial-condition seed
    current: [0.0, 0.25, 0.05]
    vehicles:
      count: 3
      params_file: null       # null -> bundled surrogate coefficients
      initial:
        placement: inverted-formation   # | formation | explicit
        positions: null                 # used by explicit placement
        attitude: path-tangent          # | level
        randomize: 0.0                  # uniform position jitter (m)
    path:
      type: spiral            # | line | spline
      a: 40.0
      b: 20.0
      omega: 0.031415926535897934   # pi / 100
      origin: [0.0, -40.0, 0.0]     # shifts the spiral start to p0 = 0
      xi0: 0.0
    formation:
      offsets: [[0,10,5], [0,-10,5], [0,0,-10]]
    gains: {}                 # AutopilotGains fields
    nsb:
      lambda1: 1.0
      lambda2: 0.05
      d_colav: 10.0
      d_min: 5.0
      hysteresis: 0.5
    los:
      delta0: 5.0
      u_los: 1.0
    k_xi: 1.0
    reference_filter: {omega: 2.0}
    options:
      control_update: continuous    # | zoh (hold forces over each step)
      u_d_floor: 0.05
      theta_d_max_deg: 80.0
      delta0_check: warn            # | error | off

Override strings use dotted paths: ``los.delta0=6``, ``dt=0.005``.
"""

from __future__ import annotations

import copy
import importlib.resources as resources
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .autopilots import AutopilotGains
from .guidance import DecomposeOptions, FormationSpec, NsbConfig
from .params import VehicleParams
from .paths import PathSpec, make_path
from .vehicle import OceanCurrent


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "name": "reference-spiral",
    "dt": 0.01,
    "t_end": 150.0,
    "seed": 0,
    "current": [0.0, 0.25, 0.05],
    "vehicles": {
        "count": 3,
        "params_file": None,
        "initial": {
            "placement": "inverted-formation",
            "positions": None,
            "attitude": "path-tangent",
            "pitch": None,
            "nu": None,
            "randomize": 0.0,
            "offset": [0.0, 0.0, 0.0],
        },
    },
    "path": {
        "type": "spiral",
        "a": 40.0,
        "b": 20.0,
        "omega": math.pi / 100.0,
        "origin": [0.0, -40.0, 0.0],
        "xi0": 0.0,
    },
    "formation": {
        "offsets": [[0.0, 10.0, 5.0], [0.0, -10.0, 5.0], [0.0, 0.0, -10.0]],
    },
    "gains": {
        "k_u": 0.05,
        "k_c": 0.1,
        "c_u": 5.0,
        "k_theta": 0.0625,
        "k_q": 0.25,
        "k_d": 0.1,
        "lambda_q": 0.75,
        "c_q": 1.0,
        "k_psi": 0.0625,
        "k_r": 0.25,
        "lambda_r": 0.75,
        "c_r": 1.0,
        "smoothing_eps": 0.01,
        "observer_cap": 0.0,
    },
    "nsb": {
        "lambda1": 1.0,
        "lambda2": 0.05,
        "d_colav": 10.0,
        "d_min": 5.0,
        "hysteresis": 0.5,
    },
    "los": {"delta0": 5.0, "u_los": 1.0},
    "k_xi": 1.0,
    "reference_filter": {"omega": 2.0},
    "options": {
        "control_update": "continuous",
        "u_d_floor": 0.05,
        "theta_d_max_deg": 80.0,
        "delta0_check": "warn",
    },
}


# subtrees whose keys depend on a type selector (validated by their
# consumers instead of the schema walk)
_OPEN_BLOCKS = {"path"}


def _merge(base: dict, update: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            if path in _OPEN_BLOCKS:
                out[key] = copy.deepcopy(value)
                continue
            raise ConfigError(f"unknown scenario key {here!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings onto a scenario mapping."""
    out = copy.deepcopy(data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = out
        parts = key.strip().split(".")
        ref = DEFAULTS
        open_block = False
        for part in parts[:-1]:
            if not isinstance(ref, dict) or (part not in ref and not open_block):
                raise ConfigError(f"override targets unknown key {key!r}")
            open_block = open_block or part in _OPEN_BLOCKS
            ref = ref.get(part, {}) if isinstance(ref, dict) else {}
            node = node.setdefault(part, {})
        leaf = parts[-1]
        if not open_block and (not isinstance(ref, dict) or leaf not in ref):
            raise ConfigError(f"override targets unknown key {key!r}")
        node[leaf] = value
    return out


@dataclass
class Scenario:
    """Fully resolved simulation setup."""

    name: str
    dt: float
    t_end: float
    seed: int
    params: VehicleParams
    n: int
    current: OceanCurrent
    formation: FormationSpec
    path: PathSpec
    xi0: float
    gains: AutopilotGains
    nsb: NsbConfig
    delta0: float
    u_los: float
    k_xi: float
    filter_omega: float
    control_update: str
    decompose: DecomposeOptions
    delta0_check: str
    initial: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_end <= self.dt:
            raise ConfigError("t_end must exceed dt")
        if not (self.nsb.d_colav > self.nsb.d_min > 0):
            raise ConfigError("required: d_colav > d_min > 0")
        if self.control_update not in ("continuous", "zoh"):
            raise ConfigError("options.control_update must be continuous or zoh")

    @property
    def steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))


def _bundled(name: str) -> Path:
    return Path(str(resources.files("auvformation").joinpath("data", name)))


def load_params(path_or_none) -> VehicleParams:
    if path_or_none is None:
        return VehicleParams.load(_bundled("lauv_surrogate.yaml"))
    return VehicleParams.load(path_or_none)


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> Scenario:
    merged = _merge(DEFAULTS, data or {})
    vcfg = merged["vehicles"]
    params_file = vcfg.get("params_file")
    if params_file is not None and base_dir is not None:
        p = Path(params_file)
        params_file = p if p.is_absolute() else base_dir / p
    params = load_params(params_file)

    offsets = np.asarray(merged["formation"]["offsets"], dtype=float)
    n = int(vcfg["count"])
    if offsets.shape[0] != n:
        raise ConfigError(
            f"vehicle count {n} does not match {offsets.shape[0]} formation offsets"
        )
    try:
        formation = FormationSpec(offsets)
        gains = AutopilotGains(**merged["gains"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    nsb_cfg = merged["nsb"]
    nsb = NsbConfig(
        lambda1=nsb_cfg["lambda1"],
        lambda2=nsb_cfg["lambda2"],
        d_colav=float(nsb_cfg["d_colav"]),
        d_min=float(nsb_cfg["d_min"]),
        hysteresis=float(nsb_cfg["hysteresis"]),
    )
    opts = merged["options"]
    decompose = DecomposeOptions(
        u_d_floor=float(opts["u_d_floor"]),
        theta_d_max=math.radians(float(opts["theta_d_max_deg"])),
    )
    return Scenario(
        name=str(merged["name"]),
        dt=float(merged["dt"]),
        t_end=float(merged["t_end"]),
        seed=int(merged["seed"]),
        params=params,
        n=n,
        current=OceanCurrent(np.asarray(merged["current"], dtype=float)),
        formation=formation,
        path=make_path(merged["path"]),
        xi0=float(merged["path"]["xi0"]),
        gains=gains,
        nsb=nsb,
        delta0=float(merged["los"]["delta0"]),
        u_los=float(merged["los"]["u_los"]),
        k_xi=float(merged["k_xi"]),
        filter_omega=float(merged["reference_filter"]["omega"]),
        control_update=str(opts["control_update"]),
        decompose=decompose,
        delta0_check=str(opts["delta0_check"]),
        initial=copy.deepcopy(vcfg["initial"]),
        raw=merged,
    )


def load_scenario(path: str | Path | None = None, overrides=None) -> Scenario:
    """Load a scenario file (None -> built-in defaults) plus overrides."""
    if path is None:
        data: dict = {}
        base = None
    else:
        path = Path(path)
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: scenario file must be a mapping")
        base = path.parent
    data = apply_overrides(data, overrides)
    return scenario_from_dict(data, base_dir=base)
