"""Run configuration shared by the CLI stages."""
import os
from dataclasses import asdict, dataclass
from typing import Optional

from .errors import ConfigurationError
from .polarft import EPS_MAX, EPS_MIN


@dataclass(frozen=True)
class RunConfig:
    """Pipeline settings; ``c`` and ``R`` are estimated from the data when left as None."""

    c: Optional[float] = None
    R: Optional[int] = None
    eps: float = 1e-10
    shrinkage: str = "spiked"
    fraction: float = 0.999
    block_size: int = 1024
    seed: int = 0
    threads: Optional[int] = None

    def __post_init__(self):
        if self.c is not None and not 0 < self.c <= 0.5:
            raise ConfigurationError(f"band limit c must lie in (0, 1/2], got {self.c}")
        if self.R is not None and (int(self.R) != self.R or self.R < 2):
            raise ConfigurationError(f"support radius R must be an integer >= 2, got {self.R}")
        if not EPS_MIN <= self.eps <= EPS_MAX:
            raise ConfigurationError(f"eps must lie in [{EPS_MIN:g}, {EPS_MAX:g}], got {self.eps}")
        if self.shrinkage not in ("spiked", "soft"):
            raise ConfigurationError(f"unknown shrinkage mode {self.shrinkage!r}")
        if not 0 < self.fraction <= 1:
            raise ConfigurationError(f"selection fraction must lie in (0, 1], got {self.fraction}")
        if self.block_size < 1:
            raise ConfigurationError("block size must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigurationError("thread count must be positive")

    @property
    def workers(self):
        return self.threads or os.cpu_count() or 1

    def to_dict(self):
        return asdict(self)
