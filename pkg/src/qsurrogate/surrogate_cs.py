"""Shadow-kernel predictor h_cs.

h_cs(x', O) = (1/n) sum_i kappa_Lambda(x', x_i) g(x_i, O), where g is the
classical-shadow estimate of <O> on the i-th training state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import ParamCircuit
from .features import kernel_gradients, kernel_matrix
from .shadows import collect_shadow_rows, estimate_observable_rows
from .simulator import Observable, PauliNoiseSpec


@dataclass(frozen=True)
class TrainingDatasetCS:
    X: np.ndarray  # (n, d)
    bases: np.ndarray  # (n, T, N)
    outcomes: np.ndarray  # (n, T, N)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape[0] < 1:
            raise ValueError("empty dataset")
        if self.bases.shape != self.outcomes.shape or self.bases.shape[0] != X.shape[0]:
            raise ValueError("inconsistent dataset arrays")
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def T(self) -> int:
        return self.bases.shape[1]

    @property
    def num_qubits(self) -> int:
        return self.bases.shape[2]

    def in_theorem_regime(self) -> bool:
        return bool(np.all(np.abs(self.X) <= math.pi))

    def head(self, n: int) -> "TrainingDatasetCS":
        """First n examples (nested subsets for learning curves)."""
        return TrainingDatasetCS(self.X[:n], self.bases[:n], self.outcomes[:n], {**self.meta, "n": n})


def generate_dataset_cs(
    c: ParamCircuit,
    noise: PauliNoiseSpec,
    n: int,
    T: int,
    rng: np.random.Generator,
    low: float = -math.pi,
    high: float = math.pi,
) -> TrainingDatasetCS:
    """n uniform draws from [low, high]^d, each labelled by T shadow snapshots."""
    X = rng.uniform(low, high, size=(n, c.num_slots))
    bases, outcomes = collect_shadow_rows(c, noise, T, rng, X)
    meta = {
        "circuit_hash": c.content_hash(),
        "noise": noise.to_dict(),
        "sampling": f"uniform[{low},{high}]",
        "in_theorem_regime": bool(low >= -math.pi and high <= math.pi),
    }
    return TrainingDatasetCS(X, bases, outcomes, meta)


class SurrogateCS:
    """Immutable apart from the write-once per-observable label cache."""

    def __init__(self, dataset: TrainingDatasetCS, lam: int):
        if lam < 0 or lam > dataset.d:
            raise ValueError(f"Lambda must lie in [0, d={dataset.d}]")
        self.dataset = dataset
        self.lam = int(lam)
        self._cache: dict[str, np.ndarray] = {}

    @property
    def d(self) -> int:
        return self.dataset.d

    def labels(self, obs: Observable) -> np.ndarray:
        key = obs.key()
        g = self._cache.get(key)
        if g is None:
            g = estimate_observable_rows(self.dataset.bases, self.dataset.outcomes, obs)
            g.setflags(write=False)
            self._cache[key] = g
        return g

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} parameters, got {X.shape[1]}")
        return X

    def predict(self, X: np.ndarray, obs: Observable, block: int = 512) -> np.ndarray:
        X = self._check(X)
        g = self.labels(obs)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], block):
            K = kernel_matrix(X[s : s + block], self.dataset.X, self.lam)
            out[s : s + block] = K @ g / self.dataset.n
        return out

    def gradient(self, x: np.ndarray, obs: Observable) -> np.ndarray:
        x = self._check(x)[0]
        G = kernel_gradients(x, self.dataset.X, self.lam)
        return G.T @ self.labels(obs) / self.dataset.n


def fit_cs(dataset: TrainingDatasetCS, lam: int) -> SurrogateCS:
    return SurrogateCS(dataset, lam)


def predict_cs(m: SurrogateCS, x, obs: Observable) -> float:
    return float(m.predict(np.asarray(x, dtype=float)[None, :], obs)[0])


def predict_cs_gradient(m: SurrogateCS, x, obs: Observable) -> np.ndarray:
    return m.gradient(x, obs)


def empirical_risk(m: SurrogateCS, X_test: np.ndarray, f_ref: np.ndarray, obs: Observable) -> float:
    f_ref = np.asarray(f_ref, dtype=float)
    if f_ref.size == 0:
        raise ValueError("empty test set")
    pred = m.predict(X_test, obs)
    return float(np.mean((pred - f_ref) ** 2))
