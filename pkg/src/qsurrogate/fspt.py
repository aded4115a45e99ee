"""Floquet SPT workflow: magnetization traces, spectra and the variance scan.

Base parameters are x = (delta, J_2, ..., J_{N-1}). Traces are recorded after
every half-period block (k = 1..n_k). The frequency axis is normalized so the
drive period (two half periods) maps to 1 and period doubling maps to 0.5:
DFT bin f of an n_k-sample series sits at 2 f / n_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import GateOp, fspt_blocks
from .errors import GuardError
from .features import CollapsedFeatureSet
from .simulator import (
    MAX_DENSITY_QUBITS,
    PauliNoiseSpec,
    apply_matrix,
    evolve,
    initial_states,
    _ChannelSampler,
    _apply_channel_dm,
    gate_matrix,
    pauli_expectations,
    density_pauli_expectation,
)
from .surrogate_qs import SurrogateQS, features_of, solve_ridge

SUBHARMONIC = 0.5


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_delta(rng: np.random.Generator, size, a: float = 0.9, b: float = 2.0, scale: float = 1.0):
    """delta ~ scale * Beta(a, b)."""
    return scale * rng.beta(a, b, size=size)


def sample_disorder(rng: np.random.Generator, size: int, N: int, low: float = 0.0, high: float = 2.0):
    """J_2..J_{N-1} ~ Unif[low, high], one row per draw."""
    return rng.uniform(low, high, size=(size, N - 2))


def block_multiplicities(N: int, k: int) -> tuple[int, ...]:
    """Occurrences of (delta, J_2, ..) in the first k half-period blocks."""
    drives = (k + 1) // 2
    couplings = k // 2
    return (N * drives,) + (couplings,) * (N - 2)


def angle_map(N: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.full(N - 1, -2.0)
    b = np.zeros(N - 1)
    b[0] = math.pi
    return a, b


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def _block_angles(block: list[GateOp], X: np.ndarray) -> list:
    return [None if g.slot is None else g.a * X[:, g.slot] + g.b for g in block]


def _z_strings(N: int) -> list[str]:
    return ["I" * i + "Z" + "I" * (N - 1 - i) for i in range(N)]


def magnetizations(
    N: int,
    X: np.ndarray,
    n_k: int,
    noise: PauliNoiseSpec | None = None,
    shots: int = 0,
    rng: np.random.Generator | None = None,
    mode: str = "auto",
) -> np.ndarray:
    """<Z_i> after each of the n_k half-period blocks; shape (B, N, n_k).

    Noiseless runs are exact statevector evolutions. With noise, ``mode``
    "exact" evolves density matrices (N <= 8); "trajectory" averages
    ``shots`` trajectories, each contributing one +-1 readout per (i, k)
    with readout flips. ``shots=0`` with noise selects the exact mode.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != N - 1:
        raise ValueError(f"expected {N - 1} base parameters, got {X.shape[1]}")
    if N < 3:
        raise ValueError("FSPT needs N >= 3")
    B = X.shape[0]
    blocks = fspt_blocks(N, n_k)
    zs = _z_strings(N)
    noisy = noise is not None and not noise.is_noiseless
    if mode == "auto":
        mode = "trajectory" if (noisy and shots) else ("exact" if noisy else "pure")
    out = np.empty((B, N, n_k))
    if mode == "pure":
        psi = initial_states(N, "zero", B)
        for k, blk in enumerate(blocks):
            psi = evolve(psi, blk, _block_angles(blk, X), N)
            for i, z in enumerate(zs):
                out[:, i, k] = pauli_expectations(psi, z)
        return out
    if mode == "exact":
        if N > MAX_DENSITY_QUBITS:
            raise GuardError(f"density-matrix simulation limited to N <= {MAX_DENSITY_QUBITS}")
        for r in range(B):
            out[r] = _density_trace(N, X[r], blocks, noise)
        if noisy and noise.p_e:
            out *= 1 - 2 * noise.p_e
        return out
    if mode != "trajectory":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None or shots < 1:
        raise ValueError("trajectory mode needs an rng and shots >= 1")
    Xr = np.repeat(X, shots, axis=0)
    psi = initial_states(N, "zero", B * shots)
    sampler = _ChannelSampler(noise) if noisy else None
    p_e = noise.p_e if noise is not None else 0.0
    for k, blk in enumerate(blocks):
        psi = evolve(psi, blk, _block_angles(blk, Xr), N, noise if noisy else None, rng, sampler)
        for i, z in enumerate(zs):
            ev = np.clip(pauli_expectations(psi, z), -1, 1)
            bit = rng.random(ev.shape) < (1 - ev) / 2
            if p_e:
                bit ^= rng.random(ev.shape) < p_e
            out[:, i, k] = (1 - 2 * bit).reshape(B, shots).mean(axis=1)
    return out


def _density_trace(N: int, x: np.ndarray, blocks, noise: PauliNoiseSpec) -> np.ndarray:
    psi0 = initial_states(N, "zero", 1)[0]
    rho = np.outer(psi0, psi0.conj()).reshape(1, -1)
    rot = noise.rotation_channel()
    out = np.empty((N, len(blocks)))
    zs = _z_strings(N)
    for k, blk in enumerate(blocks):
        for g in blk:
            ang = None if g.slot is None else g.a * x[g.slot] + g.b
            m = gate_matrix(g, ang)
            rho = apply_matrix(rho, m, g.qubits, 2 * N)
            rho = apply_matrix(rho, m.conj(), [q + N for q in g.qubits], 2 * N)
            if g.is_rotation:
                for q in g.qubits:
                    rho = _apply_channel_dm(rho, rot, (q,), N)
            else:
                rho = _apply_channel_dm(rho, noise.clifford_channel(g.kind), g.qubits, N)
        mat = rho.reshape(2**N, 2**N)
        for i, z in enumerate(zs):
            out[i, k] = density_pauli_expectation(mat, z)
    return out


def magnetization_trace(N: int, delta: float, J, n_k: int, noise=None, shots: int = 0, seed=None) -> np.ndarray:
    """Single-realization trace (N, n_k)."""
    x = np.concatenate([[delta], np.asarray(J, dtype=float)])
    rng = np.random.default_rng(seed)
    return magnetizations(N, x[None, :], n_k, noise, shots, rng)[0]


def disorder_average(traces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean over the leading (disorder) axis and its standard error."""
    traces = np.asarray(traces, dtype=float)
    if traces.shape[0] < 1:
        raise ValueError("need at least one trace")
    S = traces.shape[0]
    mean = traces.mean(axis=0)
    sem = traces.std(axis=0, ddof=1) / math.sqrt(S) if S > 1 else np.zeros_like(mean)
    return mean, sem


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------


def fourier_spectrum(trace) -> tuple[np.ndarray, np.ndarray]:
    """(omega / omega_0, |DFT| / n_k) over the single-sided bins 0..n_k//2.

    Parseval under this convention: A_0^2 + 2 * sum(interior A^2) + A_{n/2}^2
    (the last term only for even n_k) equals the mean square of the series.
    """
    x = np.asarray(trace, dtype=float)
    n = x.shape[-1]
    if n < 4:
        raise ValueError("need at least 4 samples for a spectrum")
    amp = np.abs(np.fft.rfft(x, axis=-1)) / n
    freq = 2.0 * np.arange(amp.shape[-1]) / n
    return freq, amp


def parseval_weights(n: int) -> np.ndarray:
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def subharmonic_peak(trace) -> tuple[np.ndarray | float, float]:
    """Amplitude at the bin nearest omega/omega_0 = 0.5 and that bin's offset."""
    freq, amp = fourier_spectrum(trace)
    f = int(np.argmin(np.abs(freq - SUBHARMONIC)))
    peak = amp[..., f]
    return (float(peak) if np.ndim(peak) == 0 else peak), float(freq[f] - SUBHARMONIC)


# ---------------------------------------------------------------------------
# Surrogate bank
# ---------------------------------------------------------------------------


@dataclass
class SurrogateBank:
    """h_qs models for every (qubit i, half period k); qubits at one k share features."""

    N: int
    n_k: int
    models: dict[tuple[int, int], SurrogateQS] = field(default_factory=dict)

    def check_complete(self):
        missing = [(i, k) for i in range(self.N) for k in range(self.n_k) if (i, k) not in self.models]
        if missing:
            raise ValueError(f"bank is missing models, e.g. {missing[:3]}")

    def predict(self, X: np.ndarray, qubits=None) -> np.ndarray:
        """Predicted traces (B, len(qubits), n_k)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        qubits = list(range(self.N)) if qubits is None else list(qubits)
        out = np.empty((X.shape[0], len(qubits), self.n_k))
        for k in range(self.n_k):
            m0 = self.models[(qubits[0], k)]
            Phi = features_of(m0.features, m0.theta(X))
            W = np.stack([self.models[(i, k)].w for i in qubits], axis=1)
            out[:, :, k] = Phi @ W
        return out

    def manifest(self) -> list[dict]:
        return [{"qubit": i, "k": k + 1, "file": f"model_q{i}_k{k + 1}.json"} for (i, k) in sorted(self.models)]


def fit_bank(
    N: int,
    n_k: int,
    X: np.ndarray,
    Y: np.ndarray,
    lam: int,
    reg: float,
    m_features: int | None,
    seed: int,
) -> SurrogateBank:
    """Fit every (i, k) model from traces Y (n, N, n_k) at inputs X (n, N-1)."""
    a, b = angle_map(N)
    theta = a * X + b
    bank = SurrogateBank(N, n_k)
    for k in range(n_k):
        mult = block_multiplicities(N, k + 1)
        spec = CollapsedFeatureSet(mult, lam, m_features, seed + k if m_features else None)
        Phi = features_of(spec, theta)
        W = solve_ridge_multi(Phi, Y[:, :, k], reg)
        for i in range(N):
            bank.models[(i, k)] = SurrogateQS(spec, W[:, i].copy(), float(reg), a, b)
    return bank


def solve_ridge_multi(Phi: np.ndarray, Y: np.ndarray, reg: float) -> np.ndarray:
    """Ridge solution for several label columns sharing one design matrix."""
    return np.asarray(solve_ridge(Phi, Y, reg))


def train_surrogate_bank(
    N: int,
    n_k: int,
    n: int,
    rng: np.random.Generator,
    lam: int = 7,
    reg: float = 1.0,
    m_features: int | None = 1000,
    noise: PauliNoiseSpec | None = None,
    shots: int = 0,
    J_range=(0.0, 2.0),
) -> tuple[SurrogateBank, np.ndarray, np.ndarray]:
    """Sample n inputs, label all (i, k) from the same runs, fit the bank.

    Returns (bank, X, Y) so callers can reuse the training data.
    """
    X = np.column_stack([sample_delta(rng, n), sample_disorder(rng, n, N, *J_range)])
    Y = magnetizations(N, X, n_k, noise, shots, rng)
    seed = int(rng.integers(2**31))
    return fit_bank(N, n_k, X, Y, lam, reg, m_features, seed), X, Y


# ---------------------------------------------------------------------------
# Variance scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FsptScanConfig:
    N: int = 6
    n_k: int = 40
    deltas: tuple[float, ...] = tuple(np.linspace(0.01, 0.8, 40))
    S: int = 20
    J_low: float = 0.0
    J_high: float = 2.0
    backend: str = "exact"  # exact | trajectory | bank
    shots: int = 0
    fraction: float = 0.9
    qubit: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n_k < 4:
            raise ValueError("n_k must be >= 4")
        if self.S < 2:
            raise ValueError("S must be >= 2")
        if len(self.deltas) < 3:
            raise ValueError("delta grid needs at least 3 points")
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")
        if self.backend not in ("exact", "trajectory", "bank"):
            raise ValueError(f"unknown backend {self.backend!r}")
        object.__setattr__(self, "deltas", tuple(float(v) for v in self.deltas))


@dataclass
class ScanReport:
    deltas: np.ndarray
    peaks: np.ndarray  # (n_delta, S)
    variance: np.ndarray
    delta_star: float
    interval: tuple[float, float]
    neighbor_interval: tuple[float, float]
    bin_offset: float

    def to_dict(self) -> dict:
        return {
            "delta_star": self.delta_star,
            "interval": list(self.interval),
            "neighbor_interval": list(self.neighbor_interval),
            "bin_offset": self.bin_offset,
            "deltas": self.deltas.tolist(),
            "variance": self.variance.tolist(),
        }


def critical_region(deltas: np.ndarray, variance: np.ndarray, fraction: float):
    """argmax, the contiguous run around it with variance >= fraction * max,
    and the neighbor-point interval."""
    l = int(np.argmax(variance))
    thr = fraction * variance[l]
    lo = l
    while lo > 0 and variance[lo - 1] >= thr:
        lo -= 1
    hi = l
    while hi < len(variance) - 1 and variance[hi + 1] >= thr:
        hi += 1
    nb = (float(deltas[max(l - 1, 0)]), float(deltas[min(l + 1, len(deltas) - 1)]))
    return float(deltas[l]), (float(deltas[lo]), float(deltas[hi])), nb


def variance_scan(cfg: FsptScanConfig, bank: SurrogateBank | None = None, noise: PauliNoiseSpec | None = None) -> ScanReport:
    rng = np.random.default_rng(cfg.seed)
    deltas = np.asarray(cfg.deltas)
    peaks = np.empty((len(deltas), cfg.S))
    offset = 0.0
    for l, delta in enumerate(deltas):
        J = sample_disorder(rng, cfg.S, cfg.N, cfg.J_low, cfg.J_high)
        X = np.column_stack([np.full(cfg.S, delta), J])
        if cfg.backend == "bank":
            if bank is None:
                raise ValueError("bank backend needs a trained SurrogateBank")
            tr = bank.predict(X, qubits=[cfg.qubit])[:, 0, :]
        else:
            shots = cfg.shots if cfg.backend == "trajectory" else 0
            tr = magnetizations(cfg.N, X, cfg.n_k, noise, shots, rng)[:, cfg.qubit, :]
        pk, offset = subharmonic_peak(tr)
        peaks[l] = pk
    var = peaks.var(axis=1, ddof=1)
    ds, interval, nb = critical_region(deltas, var, cfg.fraction)
    return ScanReport(deltas, peaks, var, ds, interval, nb, offset)
