"""Expectation backends with one batched interface.

Every backend maps (ParamCircuit, parameter rows X, Observable) to one real
value per row. ``ShotBackend`` with ``shots=0`` falls back to exact values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import ParamCircuit, bind_parameters
from .simulator import (
    NOISELESS,
    Observable,
    PauliNoiseSpec,
    estimate_from_shots,
    expectation,
    observable_expectations,
    run_noisy_exact,
    run_pure_batch,
)


class Backend:
    name = "base"

    def expectations(self, c: ParamCircuit, X: np.ndarray, obs: Observable) -> np.ndarray:
        raise NotImplementedError

    def shots_per_eval(self) -> int:
        return 0


@dataclass
class PureBackend(Backend):
    name = "pure"
    block: int = 4096

    def expectations(self, c, X, obs):
        X = np.atleast_2d(X)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], self.block):
            out[s : s + self.block] = observable_expectations(run_pure_batch(c, X[s : s + self.block]), obs)
        return out


@dataclass
class DensityBackend(Backend):
    """Exact noisy expectations (N <= 8)."""

    noise: PauliNoiseSpec = NOISELESS
    name = "exact"

    def expectations(self, c, X, obs):
        if self.noise.is_noiseless:
            return PureBackend().expectations(c, X, obs)
        X = np.atleast_2d(X)
        return np.array([expectation(run_noisy_exact(bind_parameters(c, x), self.noise), obs) for x in X])


@dataclass
class ShotBackend(Backend):
    """Shot-averaged trajectory estimates; ``shots=0`` means exact."""

    noise: PauliNoiseSpec = NOISELESS
    shots: int = 1000
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    name = "trajectory"

    def expectations(self, c, X, obs):
        if self.shots == 0:
            return DensityBackend(self.noise).expectations(c, X, obs)
        return estimate_from_shots(c, X, obs, self.noise, self.shots, self.rng)

    def shots_per_eval(self) -> int:
        return self.shots
