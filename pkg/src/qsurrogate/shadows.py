"""Pauli-basis classical shadows: collection and local-observable estimation.

Bases are coded 0=X, 1=Y, 2=Z and outcomes as bits. A single set is stored as
two uint8 arrays of shape (T, N); a dataset of n sets as (n, T, N).
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .circuits import ConcreteCircuit, ParamCircuit
from .simulator import BASIS_CODES, Observable, PauliNoiseSpec, measure_rows, run_trajectories

_LETTERS = "XYZ"


@dataclass(frozen=True)
class ShadowSnapshot:
    bases: str
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if len(self.bases) != len(self.outcomes):
            raise ValueError("bases and outcomes differ in length")


@dataclass(frozen=True)
class ShadowSet:
    bases: np.ndarray  # (T, N) uint8
    outcomes: np.ndarray  # (T, N) uint8

    def __post_init__(self):
        b = np.asarray(self.bases, dtype=np.uint8)
        o = np.asarray(self.outcomes, dtype=np.uint8)
        if b.ndim != 2 or b.shape != o.shape:
            raise ValueError("bases/outcomes must be equal (T, N) arrays")
        if b.shape[0] < 1:
            raise ValueError("a shadow set needs T >= 1")
        if b.max(initial=0) > 2 or o.max(initial=0) > 1:
            raise ValueError("basis codes must be 0..2 and outcomes bits")
        object.__setattr__(self, "bases", b)
        object.__setattr__(self, "outcomes", o)

    @property
    def T(self) -> int:
        return self.bases.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.bases.shape[1]

    def snapshots(self) -> Iterator[ShadowSnapshot]:
        for b, o in zip(self.bases, self.outcomes):
            yield ShadowSnapshot("".join(_LETTERS[v] for v in b), tuple(int(v) for v in o))

    @classmethod
    def from_snapshots(cls, snaps: Iterable[ShadowSnapshot]) -> "ShadowSet":
        snaps = list(snaps)
        bases = [[BASIS_CODES[ch] for ch in s.bases] for s in snaps]
        return cls(np.array(bases, dtype=np.uint8), np.array([s.outcomes for s in snaps], dtype=np.uint8))


def collect_shadow_rows(
    c: ParamCircuit | ConcreteCircuit,
    noise: PauliNoiseSpec,
    T: int,
    rng: np.random.Generator,
    X: np.ndarray | None = None,
    chunk: int = 20000,
) -> tuple[np.ndarray, np.ndarray]:
    """Shadows for every parameter row of X (or the single concrete circuit).

    Returns (bases, outcomes), each (n, T, N). Every snapshot runs its own
    noisy trajectory and one readout with flips p_e.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    n_q = c.num_qubits
    if isinstance(c, ParamCircuit):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = X.shape[0]
    else:
        n = 1
    bases = rng.integers(0, 3, size=(n, T, n_q), dtype=np.uint8)
    outcomes = np.empty((n, T, n_q), dtype=np.uint8)
    flat_b = bases.reshape(n * T, n_q)
    flat_o = outcomes.reshape(n * T, n_q)
    rows_per = max(1, chunk // T)
    for start in range(0, n, rows_per):
        stop = min(n, start + rows_per)
        if isinstance(c, ParamCircuit):
            psi = run_trajectories(c, noise, rng, X[start:stop], repeats=T)
        else:
            psi = run_trajectories(c, noise, rng, repeats=T)
        sl = slice(start * T, stop * T)
        flat_o[sl] = measure_rows(psi, flat_b[sl].astype(int), noise.p_e, rng)
    return bases, outcomes


def collect_shadows(c: ConcreteCircuit, noise: PauliNoiseSpec, T: int, seed) -> ShadowSet:
    rng = np.random.default_rng(seed)
    b, o = collect_shadow_rows(c, noise, T, rng)
    return ShadowSet(b[0], o[0])


def pauli_snapshot_values(bases: np.ndarray, outcomes: np.ndarray, pauli: str) -> np.ndarray:
    """Single-snapshot estimates of a Pauli string; shape bases.shape[:-1]."""
    if bases.shape[-1] != len(pauli):
        raise ValueError("Pauli width does not match shadow width")
    support = [q for q, ch in enumerate(pauli) if ch != "I"]
    if not support:
        return np.ones(bases.shape[:-1])
    want = np.array([BASIS_CODES[pauli[q]] for q in support], dtype=np.uint8)
    hit = np.all(bases[..., support] == want, axis=-1)
    sign = 1 - 2 * (outcomes[..., support].sum(axis=-1) % 2).astype(float)
    return np.where(hit, sign * 3.0 ** len(support), 0.0)


def estimate_pauli(s: ShadowSet, pauli: str) -> float:
    return float(pauli_snapshot_values(s.bases, s.outcomes, pauli).mean())


def estimate_observable(s: ShadowSet, obs: Observable) -> float:
    if obs.num_qubits != s.num_qubits:
        raise ValueError("observable width does not match shadow width")
    total = 0.0
    for c, p in obs.terms:
        total += c * estimate_pauli(s, p)
    return total


def estimate_observable_rows(bases: np.ndarray, outcomes: np.ndarray, obs: Observable) -> np.ndarray:
    """Per-set shadow estimates for a dataset (n, T, N); shape (n,).

    Terms are accumulated in the observable's order, matching
    :func:`estimate_observable` bit for bit.
    """
    if obs.num_qubits != bases.shape[-1]:
        raise ValueError("observable width does not match shadow width")
    out = np.zeros(bases.shape[0])
    for c, p in obs.terms:
        out = out + c * pauli_snapshot_values(bases, outcomes, p).mean(axis=-1)
    return out


# ---------------------------------------------------------------------------
# Packed JSONL
# ---------------------------------------------------------------------------


def _pack(bits: np.ndarray) -> str:
    return base64.b64encode(np.packbits(bits.astype(np.uint8)).tobytes()).decode()


def _unpack(text: str, count: int) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(text), dtype=np.uint8)
    return np.unpackbits(raw)[:count]


def encode_snapshot(bases: np.ndarray, outcomes: np.ndarray) -> dict:
    b2 = np.stack([bases >> 1, bases & 1], axis=-1).reshape(-1)
    return {"b": _pack(b2), "o": _pack(outcomes)}


def decode_snapshot(rec: dict, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    b2 = _unpack(rec["b"], 2 * n_qubits).reshape(n_qubits, 2)
    bases = (b2[:, 0] << 1 | b2[:, 1]).astype(np.uint8)
    return bases, _unpack(rec["o"], n_qubits).astype(np.uint8)


def write_shadow_jsonl(path, header: dict, X: np.ndarray, bases: np.ndarray, outcomes: np.ndarray):
    """Header line, then per example one line {i, x} followed by its T snapshot lines."""
    n, T, N = bases.shape
    with open(path, "w") as fh:
        fh.write(json.dumps({**header, "n": n, "T": T, "N": N}) + "\n")
        for i in range(n):
            fh.write(json.dumps({"i": i, "x": [float(v) for v in X[i]]}) + "\n")
            for t in range(T):
                fh.write(json.dumps(encode_snapshot(bases[i, t], outcomes[i, t])) + "\n")


def read_shadow_jsonl(path) -> tuple[dict, np.ndarray, np.ndarray, np.ndarray]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        n, T, N = header["n"], header["T"], header["N"]
        X = []
        bases = np.empty((n, T, N), dtype=np.uint8)
        outcomes = np.empty((n, T, N), dtype=np.uint8)
        for i in range(n):
            rec = json.loads(fh.readline())
            X.append(rec["x"])
            for t in range(T):
                bases[i, t], outcomes[i, t] = decode_snapshot(json.loads(fh.readline()), N)
    return header, np.array(X, dtype=float), bases, outcomes
