"""Run configuration: ``[alpha]``, ``[mixing]`` and ``[run]`` sections.

Example::

    [alpha]
    family = liebscher_clayton
    gamma = 6
    ; csv = my_alpha.csv     (a lattice file replaces family/params/m/n)

    [mixing]
    family = gamma_mixing
    a = 5
    b = 100

    [run]
    m = 1, 5, 10
    n = 2
    kappa = 0.95, 0.99
    eps_tail = 1e-12
    mc_paths = 1000000
    seed = 20240601
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .alpha import FAMILIES
from .counts import EPS_TAIL

__all__ = ["RunConfig", "ConfigError", "load_config", "parse_list"]


class ConfigError(ValueError):
    """Malformed or out-of-range configuration (a usage error)."""


def parse_list(text, kind=float):
    try:
        return [kind(item) for item in str(text).replace(";", ",").split(",") if item.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    alpha: str = "independence"
    alpha_params: dict = field(default_factory=dict)
    alpha_csv: str | None = None
    m: tuple = (5,)
    n: int = 2
    mixing: str = "gamma_mixing"
    mixing_params: dict = field(default_factory=lambda: {"a": 5.0, "b": 100.0})
    kappa: tuple = (0.95,)
    eps_tail: float = EPS_TAIL
    mc_paths: int = 1_000_000
    seed: int = 0
    out: str | None = None

    def validate(self):
        if self.alpha_csv is None and self.alpha not in FAMILIES:
            raise ConfigError(f"unknown alpha family {self.alpha!r}; choose from {sorted(FAMILIES)}")
        if not self.m or any(m < 1 for m in self.m):
            raise ConfigError(f"orders must be >= 1, got {list(self.m)}")
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.mixing not in ("gamma_mixing", "gamma_claims"):
            raise ConfigError(f"unknown mixing family {self.mixing!r}")
        if not self.kappa or any(not 0 < k < 1 for k in self.kappa):
            raise ConfigError(f"levels must lie in (0, 1), got {list(self.kappa)}")
        if not self.eps_tail > 0:
            raise ConfigError("eps_tail must be positive")
        if self.mc_paths < 1:
            raise ConfigError("mc_paths must be >= 1")
        return self

    def with_overrides(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes).validate()


def _number(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def load_config(path):
    """Read a config file into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    unknown = set(parser.sections()) - {"alpha", "mixing", "run"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    values = {}
    if parser.has_section("alpha"):
        sec = dict(parser["alpha"])
        if "family" in sec:
            values["alpha"] = sec.pop("family")
        if "csv" in sec:
            values["alpha_csv"] = sec.pop("csv")
        values["alpha_params"] = {k: _number(v) for k, v in sec.items()}
    if parser.has_section("mixing"):
        sec = dict(parser["mixing"])
        if "family" in sec:
            values["mixing"] = sec.pop("family")
        if sec:
            values["mixing_params"] = {k: _number(v) for k, v in sec.items()}
    if parser.has_section("run"):
        sec = dict(parser["run"])
        try:
            if "m" in sec:
                values["m"] = tuple(parse_list(sec.pop("m"), int))
            if "n" in sec:
                values["n"] = int(sec.pop("n"))
            if "kappa" in sec:
                values["kappa"] = tuple(parse_list(sec.pop("kappa")))
            if "eps_tail" in sec:
                values["eps_tail"] = float(sec.pop("eps_tail"))
            if "mc_paths" in sec:
                values["mc_paths"] = int(float(sec.pop("mc_paths")))
            if "seed" in sec:
                values["seed"] = int(sec.pop("seed"))
            if "out" in sec:
                values["out"] = sec.pop("out")
        except ValueError as exc:
            raise ConfigError(f"bad value in [run]: {exc}") from None
        if sec:
            raise ConfigError(f"unknown [run] keys: {sorted(sec)}")
    return RunConfig(**values).validate()
