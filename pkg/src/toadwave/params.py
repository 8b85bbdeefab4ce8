"""Model parameters shared by every solver."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    r: float = 1.0
    theta_min: float = 1.0
    theta_max: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.r >= 0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if not self.theta_min > 0:
            raise ValueError(f"theta_min must be > 0, got {self.theta_min}")
        if not self.theta_max > self.theta_min:
            raise ValueError("theta_min must be < theta_max")

    @property
    def kpp_speed(self) -> float:
        """Classical Fisher-KPP speed with diffusivity theta_min."""
        return 2.0 * (self.r * self.theta_min) ** 0.5

    def as_dict(self) -> dict:
        return asdict(self)


def max_workers() -> int:
    """Worker cap from TOADWAVE_THREADS (default 1)."""
    raw = os.environ.get("TOADWAVE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
