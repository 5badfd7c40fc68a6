"""Experiment configuration loaded from TOML.

Every section and key has a default, so an empty file is a valid
configuration.  Unknown sections or keys are rejected: a mistyped key
would otherwise silently fall back to its default.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channels import PauliChannel, parse_channel_literal


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit code 2."""


DEFAULTS: dict[str, dict[str, Any]] = {
    "circuit": {"lx": 2, "ly": 2, "layers": 4, "seed": 0, "t": 1.0, "u": 1.0},
    "noise": {"models": ["depolarizing", "detectable"], "custom": {}},
    "probes": {"mu": [0.5, 1.0, 1.5, 2.0]},
    "fit": {"k_max": 2, "tol": 1e-4, "outlier_factor": 10.0},
    "methods": {"names": ["Q", "QE", "QH"], "mu": [1.0, 2.0], "lam": 2.0, "model": "depolarizing"},
    "mc": {
        "trajectories": 100000,
        "lx": 1,
        "ly": 2,
        "layers": 12,
        "mu_eps": 0.5,
        "mu_d": 0.5,
        "observable": "",
        "batch": 20000,
    },
    "costs": {"gammas": [0.0, 0.5, 1.0], "mu_min": 0.05, "mu_max": 5.0, "steps": 100, "lam": 2.0},
    "output": {"dir": "results", "plots": True},
}

_NUMBER = (int, float)


@dataclass(frozen=True)
class ExperimentConfig:
    data: Mapping[str, Mapping[str, Any]]

    def __getitem__(self, section: str) -> Mapping[str, Any]:
        return self.data[section]

    @property
    def seed(self) -> int:
        return int(self.data["circuit"]["seed"])

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        if seed is None:
            return self
        d = copy.deepcopy(dict(self.data))
        d["circuit"] = dict(d["circuit"], seed=int(seed))
        return ExperimentConfig(d)

    def custom_channels(self) -> dict[str, PauliChannel]:
        return {name: parse_channel_literal(spec) for name, spec in self.data["noise"]["custom"].items()}

    def digest(self) -> str:
        """Short stable hash of the resolved configuration (output settings excluded)."""
        payload = {k: v for k, v in self.data.items() if k != "output"}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _merge(raw: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    out = copy.deepcopy(DEFAULTS)
    for section, body in raw.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, Mapping):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            default = DEFAULTS[section][key]
            if isinstance(default, bool) and not isinstance(value, bool):
                raise ConfigError(f"[{section}] {key} must be a boolean")
            if isinstance(default, _NUMBER) and not isinstance(default, bool):
                if isinstance(value, bool) or not isinstance(value, _NUMBER):
                    raise ConfigError(f"[{section}] {key} must be a number")
                if isinstance(default, int) and not isinstance(value, int):
                    raise ConfigError(f"[{section}] {key} must be an integer")
            if isinstance(default, list) and not isinstance(value, list):
                raise ConfigError(f"[{section}] {key} must be a list")
            if isinstance(default, str) and not isinstance(value, str):
                raise ConfigError(f"[{section}] {key} must be a string")
            out[section][key] = value
    return out


def _validate(d: dict[str, dict[str, Any]]) -> None:
    mus = d["probes"]["mu"]
    if not mus:
        raise ConfigError("[probes] mu must not be empty")
    if any(not isinstance(m, _NUMBER) or m <= 0 for m in mus):
        raise ConfigError("[probes] mu values must be positive numbers")
    if len(set(mus)) != len(mus):
        raise ConfigError("[probes] mu values must be distinct")
    if d["mc"]["trajectories"] < 0:
        raise ConfigError("[mc] trajectories must be non-negative")
    if d["fit"]["k_max"] < 1:
        raise ConfigError("[fit] k_max must be at least 1")
    for m in d["methods"]["names"]:
        if m not in ("Q", "QE", "QH"):
            raise ConfigError(f"[methods] unknown method {m!r}")
    if d["methods"]["lam"] <= 1:
        raise ConfigError("[methods] lam must exceed 1")
    if any(m < 0 for m in d["methods"]["mu"]):
        raise ConfigError("[methods] mu values must be non-negative")
    custom = d["noise"]["custom"]
    if not isinstance(custom, Mapping):
        raise ConfigError("[noise] custom must be a table of channel literals")
    for name, spec in custom.items():
        try:
            ch = parse_channel_literal(spec)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"[noise.custom.{name}] {exc}") from exc
        if ch.n_qubits != 2 or not ch.is_physical:
            raise ConfigError(f"[noise.custom.{name}] must be a physical two-qubit channel")
    for m in d["noise"]["models"]:
        if m not in ("depolarizing", "detectable") and m not in custom:
            raise ConfigError(f"[noise] unknown model {m!r}")
    c = d["circuit"]
    if c["lx"] < 1 or c["ly"] < 1 or c["layers"] < 0:
        raise ConfigError("[circuit] dimensions must be positive")
    if 2 * c["lx"] * c["ly"] > 12:
        raise ConfigError("[circuit] lattice exceeds the 12-qubit simulator limit")


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Parse ``path`` (or use defaults when ``None``)."""
    raw: Mapping[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(raw)


def config_from_mapping(raw: Mapping[str, Any]) -> ExperimentConfig:
    d = _merge(raw)
    _validate(d)
    return ExperimentConfig(d)
