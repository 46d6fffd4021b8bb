"""Model and decoding configuration."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

from .errors import ConfigurationError


class VariantKind(str, enum.Enum):
    SOFT = "soft"
    HARD0 = "hard0"
    MONO0 = "mono0"
    MONO1 = "mono1"

    @property
    def is_hard(self) -> bool:
        return self is not VariantKind.SOFT

    @property
    def is_first_order(self) -> bool:
        return self in (VariantKind.MONO0, VariantKind.MONO1)


@dataclass
class ModelConfig:
    """Hyperparameters; defaults are the full-scale model sizes."""

    variant: VariantKind = VariantKind.MONO0
    d_hidden: int = 400
    d_tag: int = 40
    d_char: int = 200
    encoder_layers: int = 2
    dropout: float = 0.4
    window: int = 4
    seed: int = 0
    # None means max(32, 2 * |x| + 8)
    max_decode_length: int | None = None

    def __post_init__(self):
        self.variant = VariantKind(self.variant)
        for field in ("d_hidden", "d_tag", "d_char", "encoder_layers"):
            if getattr(self, field) <= 0:
                raise ConfigurationError(f"{field} must be positive")
        if self.window < 0:
            raise ConfigurationError("window must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if self.max_decode_length is not None and self.max_decode_length < 1:
            raise ConfigurationError("max_decode_length must be >= 1")

    def decode_limit(self, source_length: int) -> int:
        if self.max_decode_length is not None:
            return self.max_decode_length
        return max(32, 2 * source_length + 8)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["variant"] = self.variant.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)
