"""Pipeline configuration: a versioned YAML document.

Every key is optional except ``seed`` (which may also come from the command
line); missing keys take the desk-profile defaults below. Unknown keys are
rejected so that typos do not silently fall back to defaults.

.. code-block:: yaml

    version: 1
    seed: 12345
    workers: 1
    out: runs/desk
    system:     {alpha_db_per_km: 0.2, eta: 0.55, xi_ch_a: 0.05, xi_rec: 0.18}
    code:       {protograph: builtin, lifting: 500, lift_seed: 1, ext_degree: 2}
    simulation:
      rates: [0.2, 0.1, 0.05, 0.02, 0.01]
      max_frames: 400
      target_errors: 40
      max_iterations: 200
      llr_clip: 30.0
      allow_incomplete: false
      ladder: {beta_bounds: [0.5, 0.99], fer_window: [0.005, 0.9], step_db: 0.25, max_points: 14}
    surface:    {degree: 3, transform: logit, abscissa: normalized, interpolation: linear}
    search:     {v_a_range: [0.5, 10], beta_range: [0.5, 0.99], v_a_points: 96, beta_points: 99, refine: true}
    optimize:   {d_km: 20.0}
    sweep:      {distances: [5, 10, 20, 30, 40, 60, 80], beta0: 0.95}
    validate:   {max_frames: 400, target_errors: 40}
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .channel import ConfigurationError, SystemParams
from .optimizer import SearchSpace
from .protograph import ProtographError, default_protograph_path, load_protograph
from .sim import LadderPolicy, SimConfig

__all__ = ["CONFIG_VERSION", "DEFAULTS", "PipelineConfig", "load_config", "config_from_dict"]

CONFIG_VERSION = 1

DEFAULTS = {
    "version": CONFIG_VERSION,
    "seed": None,
    "workers": 1,
    "out": "out",
    "system": {"alpha_db_per_km": 0.2, "eta": 0.55, "xi_ch_a": 0.05, "xi_rec": 0.18},
    "code": {"protograph": "builtin", "lifting": 500, "lift_seed": 1, "ext_degree": 2},
    "simulation": {
        "rates": [0.2, 0.1, 0.05, 0.02, 0.01],
        "max_frames": 400,
        "target_errors": 40,
        "max_iterations": 200,
        "llr_clip": 30.0,
        "allow_incomplete": False,
        "ladder": {
            "beta_bounds": [0.5, 0.99],
            "fer_window": [0.005, 0.9],
            "step_db": 0.25,
            "max_points": 14,
            "forced": None,
        },
    },
    "surface": {"degree": 3, "transform": "logit", "abscissa": "normalized", "interpolation": "linear"},
    "search": {"v_a_range": [0.5, 10.0], "beta_range": [0.5, 0.99], "v_a_points": 96, "beta_points": 99, "refine": True},
    "optimize": {"d_km": 20.0},
    "sweep": {"distances": [5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0], "beta0": 0.95},
    "validate": {"max_frames": 400, "target_errors": 40},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown config key '{where}'")
        if isinstance(base[key], dict) and base[key] and key != "forced":
            if not isinstance(val, dict):
                raise ConfigurationError(f"config key '{where}' must be a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    raw: dict
    base_dir: Path

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def workers(self) -> int:
        return int(self.raw["workers"])

    @property
    def out_dir(self) -> Path:
        return (self.base_dir / self.raw["out"]).resolve()

    @property
    def system(self) -> SystemParams:
        return SystemParams(**{k: float(v) for k, v in self.raw["system"].items()})

    @property
    def protograph_path(self) -> Path:
        p = self.raw["code"]["protograph"]
        return default_protograph_path() if p == "builtin" else (self.base_dir / p).resolve()

    def protograph(self):
        path = self.protograph_path
        if not path.is_file():
            raise ConfigurationError(f"protograph file not found: {path}")
        try:
            return load_protograph(path)
        except ProtographError as e:
            raise ConfigurationError(f"{path}: {e}") from None

    @property
    def rates(self) -> list[float]:
        return [float(r) for r in self.raw["simulation"]["rates"]]

    def sim_config(self, stage: str = "simulation") -> SimConfig:
        sim = self.raw["simulation"]
        budget = self.raw[stage] if stage != "simulation" else sim
        return SimConfig(
            seed=stage_seed(self.seed, stage),
            max_frames=int(budget["max_frames"]),
            target_errors=int(budget["target_errors"]),
            max_iterations=int(sim["max_iterations"]),
            llr_clip=float(sim["llr_clip"]),
            workers=self.workers,
        )

    @property
    def ladder(self) -> LadderPolicy:
        lad = self.raw["simulation"]["ladder"]
        forced = lad["forced"]
        if isinstance(forced, dict):
            forced = {float(k): [float(s) for s in v] for k, v in forced.items()}
        elif forced is not None:
            forced = [float(s) for s in forced]
        return LadderPolicy(
            beta_bounds=tuple(float(x) for x in lad["beta_bounds"]),
            fer_window=tuple(float(x) for x in lad["fer_window"]),
            step_db=float(lad["step_db"]),
            max_points=int(lad["max_points"]),
            forced=forced,
        )

    @property
    def search(self) -> SearchSpace:
        s = self.raw["search"]
        return SearchSpace(
            v_a_range=tuple(float(x) for x in s["v_a_range"]),
            beta_range=tuple(float(x) for x in s["beta_range"]),
            v_a_points=int(s["v_a_points"]),
            beta_points=int(s["beta_points"]),
            refine=bool(s["refine"]),
        )

    @property
    def distances(self) -> list[float]:
        return [float(d) for d in self.raw["sweep"]["distances"]]

    @property
    def config_hash(self) -> str:
        """SHA-256 of the resolved configuration, output location excluded."""
        doc = {k: v for k, v in self.raw.items() if k != "out"}
        doc["code"] = dict(doc["code"], protograph=self.protograph_path.read_text() if self.protograph_path.is_file() else None)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def stage_seed(seed: int, stage: str) -> int:
    # distinct, reproducible streams per stage
    if stage == "simulation":
        return int(seed)
    h = hashlib.sha256(f"{int(seed)}:{stage}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def _validate(cfg: PipelineConfig) -> None:
    raw = cfg.raw
    if raw["version"] != CONFIG_VERSION:
        raise ConfigurationError(f"unsupported config version {raw['version']!r} (expected {CONFIG_VERSION})")
    if raw["seed"] is None:
        raise ConfigurationError("a seed is mandatory (config 'seed' or --seed)")
    try:
        seed = int(raw["seed"])
    except (TypeError, ValueError):
        raise ConfigurationError(f"seed must be an integer, got {raw['seed']!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    if int(raw["workers"]) < 1:
        raise ConfigurationError("workers must be >= 1")
    try:
        cfg.system
        cfg.search
        cfg.ladder
        cfg.sim_config()
        cfg.sim_config("validate")
    except (TypeError, ValueError) as e:
        raise ConfigurationError(str(e)) from None
    rates = cfg.rates
    if len(set(rates)) != len(rates):
        raise ConfigurationError("simulation.rates contains duplicates")
    code = raw["code"]
    if int(code["lifting"]) < 2 or int(code["ext_degree"]) < 2:
        raise ConfigurationError("code.lifting and code.ext_degree must be >= 2")
    d = cfg.distances
    if not d or any(b <= a for a, b in zip(d, d[1:])) or d[0] < 0:
        raise ConfigurationError("sweep.distances must be non-empty, non-negative and strictly ascending")
    cfg.search.beta_index(float(raw["sweep"]["beta0"]))


def config_from_dict(doc: dict | None, base_dir=".", *, seed=None, workers=None, out=None) -> PipelineConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a mapping")
    raw = _merge(DEFAULTS, doc)
    if seed is not None:
        raw["seed"] = seed
    if workers is not None:
        raw["workers"] = workers
    if out is not None:
        raw["out"] = str(Path(out).resolve())
    cfg = PipelineConfig(raw, Path(base_dir).resolve())
    _validate(cfg)
    return cfg


def load_config(path=None, **overrides) -> PipelineConfig:
    if path is None:
        return config_from_dict({}, ".", **overrides)
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path}: invalid YAML: {e}") from None
    return config_from_dict(doc, path.parent, **overrides)
