"""Per-session runtime configuration: retrieval depth, decay scale, threshold.

theta's shipped default is a placeholder with no experimental authority; it
must be recalibrated with `cap sweep` against dialogs from the target domain
before any deployment decision.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .alignment import HISTORY_EMBED_MODES, ROUND
from .weighting import RECIPROCAL, WEIGHT_FORMS


@dataclass(frozen=True)
class SessionConfig:
    k: int = 6
    tau_seconds: float = 300.0
    theta: float = 0.35
    weight_form: str = RECIPROCAL
    history_embed: str = ROUND
    offline_mode: bool = False

    def validate(self) -> "SessionConfig":
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if not isinstance(self.tau_seconds, (int, float)) or isinstance(self.tau_seconds, bool):
            raise ValueError(f"tau_seconds must be a number, got {self.tau_seconds!r}")
        if not math.isfinite(self.tau_seconds) or self.tau_seconds <= 0:
            raise ValueError(f"tau_seconds must be > 0, got {self.tau_seconds!r}")
        if not isinstance(self.theta, (int, float)) or isinstance(self.theta, bool):
            raise ValueError(f"theta must be a number, got {self.theta!r}")
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [-1, 1], got {self.theta!r}")
        if self.weight_form not in WEIGHT_FORMS:
            raise ValueError(f"weight_form must be one of {WEIGHT_FORMS}, got {self.weight_form!r}")
        if self.history_embed not in HISTORY_EMBED_MODES:
            raise ValueError(
                f"history_embed must be one of {HISTORY_EMBED_MODES}, got {self.history_embed!r}"
            )
        if not isinstance(self.offline_mode, bool):
            raise ValueError(f"offline_mode must be a boolean, got {self.offline_mode!r}")
        return self

    def merged(self, updates: dict) -> "SessionConfig":
        """New validated config with `updates` applied; rejects atomically."""
        known = set(asdict(self))
        unknown = set(updates) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return replace(self, **updates).validate()

    def to_dict(self) -> dict:
        return asdict(self)
