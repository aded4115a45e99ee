"""Ridge regression over truncated trigonometric features (h_qs).

Objective: (1/n) sum_i (y_i - <Phi(x_i), w>)^2 + lam * ||w||^2.
Features are evaluated at the rotation angles theta = a * x + b of each base
coordinate, so circuits with affine angle maps (pi - 2 delta, -2 J) are
represented exactly by low-order monomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from .circuits import ParamCircuit
from .errors import GuardError
from .features import (
    CoefficientTable,
    CollapsedFeatureSet,
    FrequencySet,
    collapsed_feature_matrix,
    enumerate_frequency_set,
    extract_coefficients,
    feature_matrix,
)

FeatureSpec = FrequencySet | CollapsedFeatureSet


@dataclass(frozen=True)
class TrainingDatasetQS:
    X: np.ndarray  # (n, d_base)
    y: np.ndarray  # (n,)
    shots: int = 0  # 0 means exact labels
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0] or y.shape[0] < 1:
            raise ValueError("X and y must be non-empty and equally long")
        if not np.all(np.isfinite(y)):
            raise ValueError("labels must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]


def features_of(spec: FeatureSpec, theta: np.ndarray) -> np.ndarray:
    if isinstance(spec, CollapsedFeatureSet):
        return collapsed_feature_matrix(spec.powers, theta)
    return feature_matrix(spec.members, theta)


def _spec_dim(spec: FeatureSpec) -> int:
    return spec.d


@dataclass(frozen=True)
class SurrogateQS:
    features: FeatureSpec
    w: np.ndarray
    reg: float
    angle_a: np.ndarray
    angle_b: np.ndarray

    def __post_init__(self):
        if len(self.w) != len(self.features):
            raise ValueError("weight vector length differs from the feature count")
        if not self.reg > 0:
            raise ValueError("regularization must be > 0")

    @property
    def collapsed(self) -> bool:
        return isinstance(self.features, CollapsedFeatureSet)

    @property
    def d(self) -> int:
        return _spec_dim(self.features)

    def theta(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} base coordinates, got {X.shape[1]}")
        return self.angle_a * X + self.angle_b

    def predict(self, X) -> np.ndarray:
        return features_of(self.features, self.theta(X)) @ self.w

    def to_dict(self) -> dict:
        return {
            "freqset": self.features.descriptor(),
            "w": self.w.tolist(),
            "lambda": self.reg,
            "collapsed": self.collapsed,
            "L": list(self.features.mult) if self.collapsed else None,
            "angle_map": {"a": self.angle_a.tolist(), "b": self.angle_b.tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateQS":
        desc = d["freqset"]
        spec = CollapsedFeatureSet.from_descriptor(desc) if desc["mode"] == "collapsed" else FrequencySet.from_descriptor(desc)
        am = d.get("angle_map") or {"a": [1.0] * spec.d, "b": [0.0] * spec.d}
        return cls(spec, np.asarray(d["w"], float), float(d["lambda"]), np.asarray(am["a"], float), np.asarray(am["b"], float))


def _cho_solve_jitter(A: np.ndarray, rhs: np.ndarray, base_shift: float) -> np.ndarray:
    scale = np.trace(A) / A.shape[0]
    shift = 0.0
    for attempt in range(6):
        try:
            fac = cho_factor(A + shift * np.eye(A.shape[0]), lower=True, check_finite=True)
            return cho_solve(fac, rhs)
        except LinAlgError:
            shift = max(shift * 100, 1e-12 * scale) if shift else 1e-12 * scale
    raise LinAlgError(
        f"ridge system is numerically singular (lambda shift {base_shift:g}); "
        "increase lambda or remove duplicate training rows"
    )


def solve_ridge(Phi: np.ndarray, y: np.ndarray, reg: float, solver: str = "auto") -> np.ndarray:
    n, M = Phi.shape
    if solver == "auto":
        solver = "primal" if M <= n else "dual"
    if solver == "primal":
        A = Phi.T @ Phi / n
        A[np.diag_indices(M)] += reg
        return _cho_solve_jitter(A, Phi.T @ y / n, reg)
    if solver == "dual":
        K = Phi @ Phi.T
        K[np.diag_indices(n)] += n * reg
        beta = _cho_solve_jitter(K, y, n * reg)
        return Phi.T @ beta
    raise ValueError(f"unknown solver {solver!r}")


def fit_qs(
    dataset: TrainingDatasetQS,
    features: FeatureSpec,
    reg: float,
    angle_a=None,
    angle_b=None,
    solver: str = "auto",
) -> SurrogateQS:
    if not reg > 0:
        raise ValueError("regularization must be > 0")
    d = _spec_dim(features)
    if dataset.X.shape[1] != d:
        raise ValueError(f"dataset has {dataset.X.shape[1]} coordinates, feature set expects {d}")
    a = np.ones(d) if angle_a is None else np.asarray(angle_a, float)
    b = np.zeros(d) if angle_b is None else np.asarray(angle_b, float)
    Phi = features_of(features, a * dataset.X + b)
    w = solve_ridge(Phi, dataset.y, reg, solver)
    return SurrogateQS(features, w, float(reg), a, b)


def objective_gradient(m: SurrogateQS, dataset: TrainingDatasetQS) -> np.ndarray:
    Phi = features_of(m.features, m.theta(dataset.X))
    return 2 * Phi.T @ (Phi @ m.w - dataset.y) / dataset.n + 2 * m.reg * m.w


def fit_qs_iterative(
    dataset: TrainingDatasetQS,
    features: FeatureSpec,
    reg: float,
    iters: int,
    X_val: np.ndarray,
    y_val: np.ndarray,
    angle_a=None,
    angle_b=None,
) -> tuple[SurrogateQS, list[float]]:
    """Conjugate gradients on the primal normal equations, recording the
    validation MSE after every iteration."""
    d = _spec_dim(features)
    a = np.ones(d) if angle_a is None else np.asarray(angle_a, float)
    b = np.zeros(d) if angle_b is None else np.asarray(angle_b, float)
    Phi = features_of(features, a * dataset.X + b)
    Phi_val = features_of(features, a * np.atleast_2d(X_val) + b)
    n, M = Phi.shape
    op = LinearOperator((M, M), matvec=lambda v: Phi.T @ (Phi @ v) / n + reg * v, dtype=float)
    curve: list[float] = []

    def record(wk):
        curve.append(float(np.mean((Phi_val @ wk - y_val) ** 2)))

    w, _ = cg(op, Phi.T @ dataset.y / n, maxiter=iters, callback=record, rtol=1e-14, atol=0.0)
    return SurrogateQS(features, w, float(reg), a, b), curve


def predict_qs(m: SurrogateQS, x) -> float:
    return float(m.predict(np.asarray(x, dtype=float)[None, :])[0])


# ---------------------------------------------------------------------------
# Worst-case truncation
# ---------------------------------------------------------------------------


def truncation_bound(B: float, d: int, q: float, R: float, lam: int, mode: str) -> float:
    if mode == "C":
        base = math.e * d * q * (1 + R) / (lam + 1)
    elif mode == "S":
        base = math.e * d * q * R / (lam + 1)
    else:
        raise ValueError(mode)
    return B * base ** (lam + 1)


def truncation_mask(members: np.ndarray, lam: int, mode: str) -> np.ndarray:
    if mode == "C":
        return (members != 0).sum(axis=1) <= lam
    if mode == "S":
        return (members == -1).sum(axis=1) <= lam
    raise ValueError(mode)


@dataclass(frozen=True)
class TruncationReport:
    mode: str
    lam: int
    R: float
    feature_count: int
    measured: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound + 1e-9


def budget_mask(members: np.ndarray, m: int, mode: str) -> np.ndarray:
    """Keep the first ``m`` members ordered by Hamming weight (C) or sine
    count (S); ties keep canonical order."""
    if mode == "C":
        key = (members != 0).sum(axis=1)
    elif mode == "S":
        key = (members == -1).sum(axis=1)
    else:
        raise ValueError(mode)
    if not 0 <= m <= len(members):
        raise ValueError(f"budget {m} outside [0, {len(members)}]")
    keep = np.zeros(len(members), bool)
    keep[np.argsort(key, kind="stable")[:m]] = True
    return keep


def worst_case_tail(coeffs: CoefficientTable, keep: np.ndarray, R: float, rng: np.random.Generator,
                    samples: int = 2000) -> float:
    """max over sampled x in [-R, R]^d (plus the corners and origin) of the dropped tail."""
    d = coeffs.members.shape[1]
    drop = ~np.asarray(keep, bool)
    if not drop.any():
        return 0.0
    X = rng.uniform(-R, R, size=(samples, d))
    corners = np.array(np.meshgrid(*[[-R, R]] * d)).reshape(d, -1).T
    X = np.vstack([X, corners, np.zeros((1, d))])
    tail = feature_matrix(coeffs.members[drop], X) @ coeffs.alpha[drop]
    return float(np.max(np.abs(tail)))


def worst_case_truncation(
    coeffs: CoefficientTable,
    lam: int,
    mode: str,
    R: float,
    rng: np.random.Generator,
    samples: int = 2000,
) -> tuple[float, int]:
    keep = truncation_mask(coeffs.members, lam, mode)
    return worst_case_tail(coeffs, keep, R, rng, samples), int(keep.sum())


def worst_case_truncation_check(
    c: ParamCircuit,
    evaluate,
    B: float,
    q: float,
    lam: int,
    mode: str,
    R: float,
    seed: int = 0,
    samples: int = 2000,
) -> TruncationReport:
    """``evaluate`` maps (k, d) parameter rows to exact expectations."""
    if c.num_slots > 8:
        raise GuardError("worst-case truncation check limited to d <= 8")
    coeffs = extract_coefficients(evaluate, c.num_slots)
    measured, count = worst_case_truncation(coeffs, lam, mode, R, np.random.default_rng(seed), samples)
    bound = truncation_bound(B, c.num_slots, q, R, lam, mode)
    return TruncationReport(mode, lam, R, count, measured, bound)
