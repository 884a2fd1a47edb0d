"""Request and response models for the analysis service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..config import FORMAT_VERSION, RunConfig


class ClassifyRequest(BaseModel):
    matrices: list[list[list[int]]]
    config: RunConfig = Field(default_factory=RunConfig)


class LefschetzRequest(BaseModel):
    matrix: list[list[int]]
    config: RunConfig = Field(default_factory=RunConfig)


class MapRequest(BaseModel):
    """A lift in the JSON tree format, plus the run configuration."""

    map: dict
    config: RunConfig = Field(default_factory=RunConfig)


class GroupRequest(BaseModel):
    group: dict
    config: RunConfig = Field(default_factory=RunConfig)


class CircleRequest(BaseModel):
    lift: dict
    op: Literal["rotation-number", "fixed-points"]
    x0: float = 0.0
    n: Optional[int] = None
    config: RunConfig = Field(default_factory=RunConfig)


class AnnulusRequest(BaseModel):
    annulus: dict
    config: RunConfig = Field(default_factory=RunConfig)


class KleinRequest(BaseModel):
    map: dict
    declared_lefschetz: Optional[int] = None
    config: RunConfig = Field(default_factory=RunConfig)


class MobiusRequest(BaseModel):
    annulus: dict
    config: RunConfig = Field(default_factory=RunConfig)


class Report(BaseModel):
    """Envelope every endpoint returns: result plus full provenance."""

    model_config = ConfigDict(extra="forbid")

    format_version: str = FORMAT_VERSION
    config: RunConfig
    result: dict


def envelope(config: RunConfig, result: dict) -> Report:
    return Report(format_version=FORMAT_VERSION, config=config, result=result)
