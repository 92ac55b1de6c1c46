"""Pipeline configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from fieldmap.errors import ConfigError


@dataclass(frozen=True)
class PipelineConfig:
    """Thresholds and tolerances consumed by the delineation pipeline.

    Areas and distances are in CRS map units (square metres and metres for
    the usual projected grids). The defaults assume 10 m pixels.
    """

    t_boundary: float = 0.8
    t_field: float = 0.2
    min_field_area: float = 1000.0
    rdp_epsilon: float = 10.0
    wheat_overlap_threshold: float = 0.5
    connectivity: int = 4

    def __post_init__(self):
        for name in ("t_boundary", "t_field"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.wheat_overlap_threshold < 1.0:
            raise ConfigError(f"wheat_overlap_threshold must lie in (0, 1), got {self.wheat_overlap_threshold}")
        if self.min_field_area < 0:
            raise ConfigError(f"min_field_area must be >= 0, got {self.min_field_area}")
        if self.rdp_epsilon < 0:
            raise ConfigError(f"rdp_epsilon must be >= 0, got {self.rdp_epsilon}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> PipelineConfig:
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(d)

    def override(self, **kwargs) -> PipelineConfig:
        """Return a copy with every non-None keyword applied."""
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})
