"""Run configuration shared by the service and the CLI.

Every report embeds the full configuration verbatim plus a format-version
string, and all randomness descends from the single seed through
SeedSequence spawning, so identical (input, config) pairs produce
byte-identical reports.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .fixedpoints import PipelineParams

FORMAT_VERSION = "torusorbits-report-1"

# lanes for deterministic per-subtask random streams
LANE_BATTERY = 0
LANE_ROTATION = 1
LANE_SAMPLING = 2


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    newton_tol: float = Field(default=1e-12, gt=0)
    rot_tol: float = Field(default=1e-3, gt=0)
    orbit_tol: float = Field(default=1e-9, gt=0)
    birkhoff_n: int = Field(default=100_000, gt=0)
    burn_in: int = Field(default=1_000, ge=0)
    grid_n: int = Field(default=64, gt=0)
    measure_grid: int = Field(default=128, gt=0)
    word_cap: int = Field(default=12, gt=0)
    element_cap: int = Field(default=10_000, gt=0)
    m_cap: Optional[int] = Field(default=None, gt=0)  # None: 4 * L(psi)^2
    orbit_cap: int = Field(default=4096, gt=0)

    def stream_seed(self, lane: int) -> int:
        return int(np.random.SeedSequence([self.seed, lane]).generate_state(1)[0])

    def pipeline_params(self) -> PipelineParams:
        return PipelineParams(
            grid_n=self.grid_n,
            newton_tol=self.newton_tol,
            rot_tol=self.rot_tol,
            orbit_tol=self.orbit_tol,
            m_cap=self.m_cap,
            orbit_cap=self.orbit_cap,
            word_cap=self.word_cap,
            element_cap=self.element_cap,
            measure_grid=self.measure_grid,
            battery_horizon=self.birkhoff_n,
            battery_burn_in=self.burn_in,
            seed=self.stream_seed(LANE_BATTERY),
        )
