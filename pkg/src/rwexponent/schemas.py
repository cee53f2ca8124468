"""JSON input and output schemas for the command-line front end."""

from __future__ import annotations

from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .markov import GENERATORS, SnrProfile, TransitionMatrix, make_alternating_snr, validate


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeneratorGraph(_Strict):
    generator: Literal["ring", "chain", "star"]
    n: int = Field(ge=1)


class MatrixGraph(_Strict):
    matrix: list[list[float]]


class AlternatingSnr(_Strict):
    beta1: float
    beta2: float
    pattern: Literal["alternating"] = "alternating"


class McSpec(_Strict):
    horizon: int = Field(default=100_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    replicas: int = Field(default=4, ge=1)


class SweepSpec(_Strict):
    beta2_start: float = 0.0
    beta2_stop: float = 20.0
    beta2_step: float = Field(default=0.5, gt=0)
    include_mc: bool = False
    mc: McSpec = Field(default_factory=McSpec)

    @model_validator(mode="after")
    def _ordered(self):
        if self.beta2_start > self.beta2_stop:
            raise ValueError("beta2_start must not exceed beta2_stop")
        return self

    def grid(self) -> list[float]:
        # integer stepping avoids drift; a step past the stop gives one point
        count = int(np.floor((self.beta2_stop - self.beta2_start) / self.beta2_step + 1e-9)) + 1
        return [float(np.round(self.beta2_start + i * self.beta2_step, 12)) for i in range(count)]


class ProblemSpec(_Strict):
    graph: Union[GeneratorGraph, MatrixGraph]
    snr: Union[list[float], AlternatingSnr]
    sweep: Optional[SweepSpec] = None

    @property
    def topology(self) -> str:
        return self.graph.generator if isinstance(self.graph, GeneratorGraph) else "ring"

    def build_chain(self) -> TransitionMatrix:
        if isinstance(self.graph, GeneratorGraph):
            return GENERATORS[self.graph.generator](self.graph.n)
        return validate(np.array(self.graph.matrix, dtype=float))

    def build_snr(self, chain: TransitionMatrix, beta2: float | None = None) -> SnrProfile:
        if isinstance(self.snr, AlternatingSnr):
            b2 = self.snr.beta2 if beta2 is None else beta2
            return make_alternating_snr(chain.n, self.snr.beta1, b2, self.topology)
        if beta2 is not None:
            raise ValueError("a beta2 sweep needs an alternating SNR spec, not an explicit array")
        if len(self.snr) != chain.n:
            raise ValueError(f"snr has {len(self.snr)} entries but the graph has {chain.n} nodes")
        return SnrProfile(np.array(self.snr, dtype=float))


class QStarSummary(BaseModel):
    min_diagonal: float
    max_diagonal: float
    interior_node: int
    interior_row: list[tuple[int, float]]


class BoundsOutput(BaseModel):
    lower: float
    upper: float
    detectable: bool
    alpha_star: Optional[float]
    gap: float
    iters: int
    q_star_summary: QStarSummary
    converged: bool = True


class MonteCarloOutput(BaseModel):
    zeta_hat: float
    stderr: float
    per_replica: list[float]
    seed: int
    horizon: int
    replicas: int


class DiagnoseOutput(BaseModel):
    n: int
    t: int
    walk_count_enumerated: int
    walk_count_formula: int
    walk_counts_agree: bool
    type_classes: int
    whittle_all_pass: bool
    whittle_failures: list[list[list[int]]]
    llr_draws: int
    llr_max_rel_err: float
