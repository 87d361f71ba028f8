"""Run configuration shared by all commands.

Values resolve in three layers: dataclass defaults, then a JSON config file,
then explicit flag overrides.  Every random choice in a pipeline flows from
the single seed here, and reports embed a hash of the resolved config so two
runs can be compared byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence, Tuple

from .errors import LogifoldError
from .voting import DEFAULT_ALPHA_GRID


class ConfigError(LogifoldError):
    """Raised when a run configuration violates its invariants."""


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    chamber_cap: int = 2 ** 16    # sign-vector chambers during compilation
    region_cap: int = 10 ** 5     # linear regions during tree descent
    path_cap: int = 10 ** 6       # path-sum expansion
    piece_cap: int = 4096         # semilinear pieces per conversion
    budget_cap: int = 4096        # rectangles per approximation
    alpha_grid: Tuple[float, ...] = DEFAULT_ALPHA_GRID
    tie_margin: float = 0.0       # logit margin treated as a tie in reports
    uncertain_weight: float = 0.0

    def validate(self) -> "RunConfig":
        for name in ("chamber_cap", "region_cap", "path_cap", "piece_cap",
                     "budget_cap"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for a in self.alpha_grid:
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"threshold {a} outside [0, 1]")
        if self.tie_margin < 0 or self.uncertain_weight < 0:
            raise ConfigError("margins and weights must be nonnegative")
        return self


def config_to_dict(cfg: RunConfig) -> dict:
    doc = asdict(cfg)
    doc["alpha_grid"] = list(cfg.alpha_grid)
    return doc


def config_from_dict(doc: dict) -> RunConfig:
    known = {f for f in RunConfig.__dataclass_fields__}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    if "alpha_grid" in doc:
        doc = dict(doc, alpha_grid=tuple(doc["alpha_grid"]))
    return RunConfig(**doc).validate()


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def apply_overrides(cfg: RunConfig, *, seed: Optional[int] = None,
                    chamber_cap: Optional[int] = None,
                    region_cap: Optional[int] = None,
                    path_cap: Optional[int] = None,
                    grid: Optional[Sequence[float]] = None,
                    tie_margin: Optional[float] = None) -> RunConfig:
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if chamber_cap is not None:
        updates["chamber_cap"] = chamber_cap
    if region_cap is not None:
        updates["region_cap"] = region_cap
    if path_cap is not None:
        updates["path_cap"] = path_cap
    if grid is not None:
        updates["alpha_grid"] = tuple(grid)
    if tie_margin is not None:
        updates["tie_margin"] = tie_margin
    return replace(cfg, **updates).validate()


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
