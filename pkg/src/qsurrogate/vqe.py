"""TFIM ground-state search: surrogate pre-training and noisy fine-tuning."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .backends import Backend, DensityBackend, PureBackend, ShotBackend
from .circuits import ParamCircuit
from .gradients import parameter_shift
from .simulator import NOISELESS, Observable, PauliNoiseSpec
from .surrogate_cs import SurrogateCS


@dataclass(frozen=True)
class TfimSpec:
    N: int
    J: float
    h: float

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("TFIM needs N >= 2")
        if not (math.isfinite(self.J) and math.isfinite(self.h)):
            raise ValueError("J and h must be finite")


def tfim_observable(spec: TfimSpec) -> Observable:
    """-J sum Z_i Z_{i+1} - h sum X_i with open boundaries; ZZ terms first.

    Zero-coefficient families are dropped unless both vanish.
    """
    n = spec.N
    terms = []
    for i in range(n - 1):
        terms.append((-spec.J, "I" * i + "ZZ" + "I" * (n - i - 2)))
    for i in range(n):
        terms.append((-spec.h, "I" * i + "X" + "I" * (n - i - 1)))
    kept = [t for t in terms if t[0] != 0]
    return Observable(tuple(kept or terms))


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 0.1
    iters: int = 100
    gamma: float = 0.9
    eps: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop: bool = True

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if not 0 < self.gamma < 1:
            raise ValueError("EMA decay must lie in (0, 1)")
        if self.iters < 0:
            raise ValueError("iters must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimizationResult:
    x_best: np.ndarray
    f_best: float
    trace: list[float] = field(default_factory=list)  # objective at each iterate
    iterations: int = 0
    stopped_early: bool = False


def adam_minimize(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    cfg: OptimizerConfig,
) -> OptimizationResult:
    """ADAM with an EMA-of-objective stopping rule; returns the best iterate seen."""
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    fx = float(f(x))
    if not math.isfinite(fx):
        raise FloatingPointError("objective is not finite at the start point")
    res = OptimizationResult(x.copy(), fx, [fx])
    ema = fx
    for t in range(1, cfg.iters + 1):
        g = np.asarray(grad(x), dtype=float)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        mh = m / (1 - cfg.beta1**t)
        vh = v / (1 - cfg.beta2**t)
        x = x - cfg.lr * mh / (np.sqrt(vh) + cfg.adam_eps)
        fx = float(f(x))
        if not math.isfinite(fx):
            raise FloatingPointError(f"objective became non-finite at iteration {t}")
        res.trace.append(fx)
        res.iterations = t
        if fx < res.f_best:
            res.f_best = fx
            res.x_best = x.copy()
        new_ema = cfg.gamma * ema + (1 - cfg.gamma) * fx
        if cfg.early_stop and t > 1 and ema - new_ema < cfg.eps:
            res.stopped_early = True
            break
        ema = new_ema
    return res


def pretrain(model: SurrogateCS, H: Observable, x0, cfg: OptimizerConfig) -> OptimizationResult:
    """Minimize h_cs(x, H) classically."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.d,):
        raise ValueError(f"model has d={model.d}, start point has shape {x0.shape}")
    return adam_minimize(
        lambda x: float(model.predict(x[None, :], H)[0]),
        lambda x: model.gradient(x, H),
        x0,
        cfg,
    )


def parameter_shift_gradient(
    c: ParamCircuit, x, H: Observable, backend: Backend | None = None, shots: int = 0, seed=None,
    noise: PauliNoiseSpec = NOISELESS,
) -> np.ndarray:
    """Parameter-shift gradient of <H>. ``shots=0`` evaluates exactly."""
    if backend is None:
        if shots:
            backend = ShotBackend(noise, shots, np.random.default_rng(seed))
        else:
            backend = DensityBackend(noise) if not noise.is_noiseless else PureBackend()
    return parameter_shift(c, x, lambda circ, rows: backend.expectations(circ, rows, H))


@dataclass
class FinetuneResult(OptimizationResult):
    shots_used: int = 0


def finetune(
    c: ParamCircuit,
    H: Observable,
    x_hat,
    noise: PauliNoiseSpec,
    cfg: OptimizerConfig,
    shots: int,
    seed,
) -> FinetuneResult:
    """ADAM on parameter-shift gradients measured on the noisy backend.

    The objective reported per iterate is the measured energy (exact when
    shots=0). Shot accounting counts 2 evaluations per slot occurrence per
    gradient plus one evaluation per iterate.
    """
    rng = np.random.default_rng(seed)
    if shots:
        backend: Backend = ShotBackend(noise, shots, rng)
    else:
        backend = PureBackend() if noise.is_noiseless else DensityBackend(noise)
    used = {"shots": 0}
    n_occ = sum(1 for g in c.gates if g.slot is not None)
    n_terms = len(H.terms)

    def f(x):
        used["shots"] += shots * n_terms
        return float(backend.expectations(c, x[None, :], H)[0])

    def grad(x):
        used["shots"] += 2 * n_occ * shots * n_terms
        return parameter_shift(c, x, lambda circ, rows: backend.expectations(circ, rows, H))

    res = adam_minimize(f, grad, np.asarray(x_hat, dtype=float), cfg)
    return FinetuneResult(res.x_best, res.f_best, res.trace, res.iterations, res.stopped_early, used["shots"])


def normalized_deviation(f_val, E0: float, Emax: float):
    if not Emax > E0:
        raise ValueError("degenerate spectrum: Emax must exceed E0")
    return np.abs(np.asarray(f_val, dtype=float) - E0) / (Emax - E0)


@dataclass(frozen=True)
class ShotLedger:
    dataset_shots: int
    finetune_shots: int
    baseline_shots: int

    @property
    def total(self) -> int:
        return self.dataset_shots + self.finetune_shots

    @property
    def ratio(self) -> float:
        return self.total / self.baseline_shots

    def to_dict(self) -> dict:
        return {
            "dataset_shots": self.dataset_shots,
            "finetune_shots": self.finetune_shots,
            "total_shots": self.total,
            "baseline_shots": self.baseline_shots,
            "ratio": self.ratio,
            "ratio_percent": 100 * self.ratio,
        }


def shot_ledger(n: int, T: int, d: int, baseline_iters: int, shots_per_eval: int, finetune_iters: int = 0) -> ShotLedger:
    """Dataset cost n*T, fine-tuning cost iters*2d*shots, and the conventional
    VQE baseline of baseline_iters*2d*shots."""
    return ShotLedger(
        dataset_shots=n * T,
        finetune_shots=finetune_iters * 2 * d * shots_per_eval,
        baseline_shots=baseline_iters * 2 * d * shots_per_eval,
    )
