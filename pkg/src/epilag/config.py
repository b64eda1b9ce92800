"""Run configuration: presets, INI overrides, and the run manifest.

A run is described by one nested settings mapping with sections mirroring
the pipeline stages. Named presets cover the paper-scale experiments and a
desk-scale variant; an INI file and CLI flags override individual values.
The resolved settings are content-hashed and the hash is stamped into every
output file header for provenance.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .datagen import SensorConfig, SimConfig
from .exceptions import ConfigError, InputError
from .filters import FilterConfig
from .model import RegimeMatrix, Theta
from .smc2 import PriorSpec, Smc2Config

PAPER_REGIME_MATRIX = [0.999, 0.001, 0.011, 0.989]

PRESETS = {
    # Two-year, two-stream state-estimation study: known parameters,
    # randomly placed outbreaks, lags compared at 0/3/7.
    "paper-state-estimation": {
        "simulate": {
            "n_pop": 10000, "horizon": 730, "burn_in": 430,
            "theta_true": [0.2, 0.4, 0.2, 0.1, 1.0 / 180.0],
            "outbreaks": "random(1)", "e0": 0, "i0": None, "r0": 0,
            "sensors": [(1, 0), (3, 3)],
        },
        "filter": {
            "n_particles": 512, "lags": [0, 3, 7],
            "regime_matrix": PAPER_REGIME_MATRIX, "proposal_matrix": None,
            "ess_threshold": 0.5, "lambda_floor": 1e-3, "theta": None,
        },
        "smc2": {
            "n_samples": 1024, "n_iterations": 50, "n_particles": 1024, "lag": 0,
            "stepsizes": [1e-4, 1e-4, 1e-4, 1e-4, 1e-6],
            "prior_low": [0, 0, 0, 0, 0], "prior_high": [0.5, 1.0, 0.5, 0.5, 0.05],
        },
        "evaluate": {"eval_start": 430},
    },
    # Two-year parameter-estimation study: fixed outbreak days 240-480,
    # full-size sampler.
    "paper-parameter-estimation": {
        "simulate": {
            "n_pop": 10000, "horizon": 730, "burn_in": 200,
            "theta_true": [0.1, 0.3, 0.05, 0.08, 0.005],
            "outbreaks": [(240, 480)], "e0": 0, "i0": None, "r0": 0,
            "sensors": [(1, 0), (3, 3)],
        },
        "filter": {
            "n_particles": 1024, "lags": [0, 3, 7],
            "regime_matrix": PAPER_REGIME_MATRIX, "proposal_matrix": None,
            "ess_threshold": 0.5, "lambda_floor": 1e-3, "theta": None,
        },
        "smc2": {
            "n_samples": 1024, "n_iterations": 50, "n_particles": 1024, "lag": 0,
            "stepsizes": [1e-4, 1e-4, 1e-4, 1e-4, 1e-6],
            "prior_low": [0, 0, 0, 0, 0], "prior_high": [0.5, 1.0, 0.5, 0.5, 0.05],
        },
        "evaluate": {"eval_start": 430},
    },
    # Laptop-scale variant: one year, one fixed outbreak, small sampler.
    "desk": {
        "simulate": {
            "n_pop": 10000, "horizon": 365, "burn_in": 150,
            "theta_true": [0.1, 0.3, 0.05, 0.08, 0.005],
            "outbreaks": [(180, 280)], "e0": 0, "i0": None, "r0": 0,
            "sensors": [(1, 0), (3, 3)],
        },
        "filter": {
            "n_particles": 256, "lags": [0, 3],
            "regime_matrix": PAPER_REGIME_MATRIX, "proposal_matrix": None,
            "ess_threshold": 0.5, "lambda_floor": 1e-3, "theta": None,
        },
        "smc2": {
            "n_samples": 64, "n_iterations": 10, "n_particles": 256, "lag": 0,
            "stepsizes": [0.01, 0.02, 0.005, 0.008, 0.0005],
            "prior_low": [0, 0, 0, 0, 0], "prior_high": [0.5, 1.0, 0.5, 0.5, 0.05],
        },
        "evaluate": {"eval_start": 150},
    },
}


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _parse_outbreaks(text: str):
    text = text.strip()
    if text in ("", "none", "[]"):
        return []
    if text.startswith("random"):
        return text
    out = []
    for chunk in text.split(","):
        start, _, end = chunk.strip().partition("-")
        out.append((int(start), int(end)))
    return out


def _parse_sensors(text: str) -> list[tuple[int, int]]:
    out = []
    for chunk in text.replace(",", " ").split():
        period, _, delay = chunk.partition(":")
        out.append((int(period), int(delay)))
    return out


# section -> key -> parser applied to the raw INI string
_INI_PARSERS = {
    "simulate": {
        "n_pop": int, "horizon": int, "burn_in": int,
        "theta_true": _parse_floats, "outbreaks": _parse_outbreaks,
        "e0": int, "i0": lambda v: None if v.strip() == "" else int(v), "r0": int,
        "sensors": _parse_sensors,
    },
    "filter": {
        "n_particles": int, "lags": lambda v: [int(x) for x in v.split()],
        "regime_matrix": _parse_floats,
        "proposal_matrix": lambda v: None if v.strip() == "" else _parse_floats(v),
        "ess_threshold": float, "lambda_floor": float,
        "theta": lambda v: None if v.strip() == "" else _parse_floats(v),
    },
    "smc2": {
        "n_samples": int, "n_iterations": int, "n_particles": int, "lag": int,
        "stepsizes": _parse_floats, "prior_low": _parse_floats,
        "prior_high": _parse_floats,
    },
    "evaluate": {"eval_start": int},
}


def load_settings(preset: str = "desk", config_path=None) -> dict:
    """Resolve a settings mapping from a preset plus optional INI overrides."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    settings = copy.deepcopy(PRESETS[preset])
    if config_path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(config_path) as fh:
                parser.read_file(fh)
        except OSError:
            raise
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {config_path}: {exc}") from exc
        for section in parser.sections():
            if section not in _INI_PARSERS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _INI_PARSERS[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                try:
                    settings[section][key] = _INI_PARSERS[section][key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return settings


def settings_hash(settings: dict, seeds) -> str:
    """Content hash of the resolved configuration and seed list."""
    payload = json.dumps({"settings": settings, "seeds": list(seeds)},
                         sort_keys=True, default=str).encode()
    return hashlib.sha1(payload).hexdigest()


def build_sim_config(settings: dict, seed: int) -> SimConfig:
    sim = settings["simulate"]
    return SimConfig(
        n_pop=sim["n_pop"], horizon=sim["horizon"], burn_in=sim["burn_in"],
        theta_true=Theta.from_array(sim["theta_true"]),
        regime_schedule=sim["outbreaks"], seed=seed,
        e0=sim["e0"], i0=sim["i0"], r0=sim["r0"])


def build_sensors(settings: dict) -> tuple[SensorConfig, ...]:
    return tuple(SensorConfig(idx + 1, period, delay)
                 for idx, (period, delay) in enumerate(settings["simulate"]["sensors"]))


def _matrix(values) -> RegimeMatrix:
    return RegimeMatrix([[values[0], values[1]], [values[2], values[3]]])


def build_filter_config(settings: dict, lag: int, seed: int,
                        n_particles: int | None = None) -> FilterConfig:
    filt = settings["filter"]
    theta = filt["theta"] if filt["theta"] is not None else settings["simulate"]["theta_true"]
    proposal = filt["proposal_matrix"]
    return FilterConfig(
        n_particles=n_particles or filt["n_particles"], lag=lag,
        n_pop=settings["simulate"]["n_pop"], theta=Theta.from_array(theta),
        regime_matrix=_matrix(filt["regime_matrix"]),
        proposal_matrix=None if proposal is None else _matrix(proposal),
        ess_threshold_fraction=filt["ess_threshold"],
        lambda_floor=filt["lambda_floor"], seed=seed)


def build_smc2_config(settings: dict, seed: int, lag: int | None = None) -> Smc2Config:
    smc2 = settings["smc2"]
    inner = build_filter_config(settings, smc2["lag"] if lag is None else lag,
                                seed=0, n_particles=smc2["n_particles"])
    return Smc2Config(
        n_samples=smc2["n_samples"], n_iterations=smc2["n_iterations"],
        prior=PriorSpec(smc2["prior_low"], smc2["prior_high"]),
        stepsizes=smc2["stepsizes"], filter_config=inner, seed=seed)


def parse_seed_range(text: str) -> list[int]:
    """Parse "N..M" (inclusive) or a comma/space list of seeds."""
    text = text.strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        seeds = list(range(int(lo), int(hi) + 1))
    else:
        seeds = [int(v) for v in text.replace(",", " ").split()]
    if not seeds:
        raise ConfigError(f"empty seed specification {text!r}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds must be non-negative")
    return seeds


@dataclass
class RunManifest:
    """Resolved configuration of one output directory, for provenance and
    so later pipeline stages agree with the data they consume."""

    preset: str
    config_path: str | None
    settings: dict
    seeds: list[int]
    out_dir: str
    config_hash: str = field(default="")

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("manifest seeds must be distinct")
        if not self.config_hash:
            self.config_hash = settings_hash(self.settings, self.seeds)

    def save(self) -> Path:
        path = Path(self.out_dir) / "manifest.json"
        payload = {
            "preset": self.preset, "config_path": self.config_path,
            "settings": self.settings, "seeds": self.seeds,
            "out_dir": str(self.out_dir), "config_hash": self.config_hash,
        }
        path.write_text(json.dumps(payload, indent=2, default=str) + "\n")
        return path

    @staticmethod
    def load(out_dir) -> "RunManifest":
        path = Path(out_dir) / "manifest.json"
        if not path.exists():
            raise InputError(f"{path} not found; run `simulate` first")
        payload = json.loads(path.read_text())
        # JSON round-trip turns interval tuples into lists; normalise back.
        sim = payload["settings"]["simulate"]
        if isinstance(sim["outbreaks"], list):
            sim["outbreaks"] = [tuple(iv) for iv in sim["outbreaks"]]
        sim["sensors"] = [tuple(sc) for sc in sim["sensors"]]
        return RunManifest(
            preset=payload["preset"], config_path=payload["config_path"],
            settings=payload["settings"], seeds=payload["seeds"],
            out_dir=payload["out_dir"], config_hash=payload["config_hash"])
