"""Run configuration: one JSON document, validated strictly."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .view_graph import ImportanceParams, PairingProblem
from .wavelet import FILTERS, BandLossSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RangeValues(_Strict):
    local: float
    medium: float
    long: float


class GapsConfig(_Strict):
    offsets: Optional[list[int]] = None  # None: powers of two up to n/2
    tau: float = Field(2.0, gt=0)
    alpha: RangeValues = RangeValues(local=1.0, medium=0.7, long=0.4)
    beta: RangeValues = RangeValues(local=0.0, medium=0.0, long=0.0)
    local_max: int = Field(2, ge=1)
    medium_max: Optional[int] = Field(None, ge=2)  # None: max(ceil(n/4), local_max + 1)
    w_min: float = Field(0.0, ge=0)
    b: int = Field(4, ge=1)
    keep_ring: bool = True

    @model_validator(mode="after")
    def _bounds(self):
        if self.medium_max is not None and self.medium_max <= self.local_max:
            raise ValueError("gaps.medium_max must exceed gaps.local_max")
        if self.offsets is not None and any(k < 1 for k in self.offsets):
            raise ValueError("gaps.offsets must be positive")
        return self

    def problem(self, n: int) -> PairingProblem:
        params = ImportanceParams.for_views(
            n,
            tau=self.tau,
            alpha=self.alpha.model_dump(),
            beta=self.beta.model_dump(),
            w_min=self.w_min,
            local_max=self.local_max,
            medium_max=self.medium_max,
        )
        return PairingProblem(n, tuple(self.offsets or ()), params, self.b, self.keep_ring)


class BandWeights(_Strict):
    LL: float = Field(1.0, ge=0)
    LH: float = Field(0.5, ge=0)
    HL: float = Field(0.5, ge=0)
    HH: float = Field(0.25, ge=0)


class WaveletConfig(_Strict):
    filter: str = "haar"
    levels: int = Field(2, ge=1)
    lambdas: BandWeights = BandWeights()
    photometric_weight: float = Field(1.0, ge=0)
    wavelet_weight: float = Field(1.0, ge=0)

    @model_validator(mode="after")
    def _known_filter(self):
        if self.filter.lower() not in FILTERS:
            raise ValueError(f"wavelet.filter must be one of {sorted(FILTERS)}")
        return self

    def spec(self) -> BandLossSpec:
        return BandLossSpec(self.lambdas.model_dump(), self.levels, self.filter)


class CosineConfig(_Strict):
    k_nearest: int = Field(2, ge=1)
    sim_min: float = Field(0.0, ge=-1, le=1)


class CostConfig(_Strict):
    per_pair_mb: float = Field(100.0, gt=0)
    base_mb: float = Field(2000.0, ge=0)


class RunConfig(_Strict):
    strategy: Literal["gaps", "complete", "oneref", "cosine", "window"] = "gaps"
    mode: Literal["both", "forward"] = "both"
    count: Literal["directed", "undirected"] = "directed"
    gaps: GapsConfig = GapsConfig()
    wavelet: WaveletConfig = WaveletConfig()
    cosine: CosineConfig = CosineConfig()
    cost: CostConfig = CostConfig()
    window: int = Field(1, ge=1)
    oneref_ref: Optional[int] = Field(None, ge=0)  # None: n // 2
    views_dir: Optional[str] = None
    out: Optional[str] = None

    def dump(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    text = Path(path).read_text()
    return RunConfig.model_validate_json(text)
