"""Statevector, density-matrix and Pauli-trajectory simulation.

Qubit 0 is the most significant bit of a basis index. All evolutions are
batched: a state array has shape (B, 2**N) and every gate may carry either a
shared matrix or one matrix per row. The density-matrix backend reuses the same
kernel by treating rho as a 2N-qubit tensor (G on the row qubits, conj(G) on
the column qubits).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .circuits import CLIFFORD_KINDS, ConcreteCircuit, GateOp, ParamCircuit
from .errors import GuardError, SimulationError

MAX_PURE_QUBITS = 24
MAX_DENSITY_QUBITS = 8
MAX_DENSE_QUBITS = 12

_SQ2 = 1.0 / math.sqrt(2.0)
PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.diag([1, 1j]).astype(complex),
    "SDG": np.diag([1, -1j]).astype(complex),
    "X": PAULI_MATRICES["X"],
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}
# basis rotation before a Z-basis readout: X -> H, Y -> H S^dagger
_BASIS_ROT = np.stack([_FIXED["H"], _FIXED["H"] @ _FIXED["SDG"], np.eye(2, dtype=complex)])
BASIS_CODES = {"X": 0, "Y": 1, "Z": 2}


# ---------------------------------------------------------------------------
# Noise model and observables
# ---------------------------------------------------------------------------


def pauli_string_matrix(s: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for ch in s:
        m = np.kron(m, PAULI_MATRICES[ch])
    return m


def depolarizing_channel(arity: int, total: float) -> tuple[tuple[str, float], ...]:
    labels = ["".join(p) for p in product("IXYZ", repeat=arity)][1:]
    return tuple((lab, total / len(labels)) for lab in labels)


def _check_dist(dist: Sequence[tuple[str, float]], arity: int, what: str):
    tot = 0.0
    for lab, p in dist:
        if len(lab) != arity or any(ch not in "IXYZ" for ch in lab):
            raise ValueError(f"{what}: bad Pauli label {lab!r} for arity {arity}")
        if not (p >= 0 and math.isfinite(p)):
            raise ValueError(f"{what}: probabilities must be finite and >= 0")
        tot += p
    if tot > 1 + 1e-12:
        raise ValueError(f"{what}: probabilities sum to {tot} > 1")


@dataclass(frozen=True)
class PauliNoiseSpec:
    """Pauli noise after rotations (p_x, p_y, p_z), after Cliffords (p_c or an
    explicit per-kind distribution) and readout bit flips (p_e)."""

    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0
    p_c: float = 0.0
    p_e: float = 0.0
    # Optional per-gate-kind override: kind -> ((pauli label, prob), ...)
    clifford_channels: Mapping[str, tuple[tuple[str, float], ...]] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p_x", "p_y", "p_z", "p_c", "p_e"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.p_x + self.p_y + self.p_z > 1 + 1e-12:
            raise ValueError("p_x + p_y + p_z must be <= 1")
        frozen = {}
        for kind, dist in dict(self.clifford_channels).items():
            if kind not in CLIFFORD_KINDS:
                raise ValueError(f"clifford channel given for non-Clifford kind {kind!r}")
            dist = tuple((str(lab), float(p)) for lab, p in dist)
            _check_dist(dist, 2 if kind in ("CNOT", "CZ") else 1, f"channel[{kind}]")
            frozen[kind] = dist
        object.__setattr__(self, "clifford_channels", frozen)

    @classmethod
    def uniform(cls, p: float, **kw) -> "PauliNoiseSpec":
        """Equal rotation error rates p_x = p_y = p_z = p (p_c, p_e default to p)."""
        kw.setdefault("p_c", p)
        return cls(p_x=p, p_y=p, p_z=p, **kw)

    @property
    def q(self) -> tuple[float, float, float]:
        return (
            1 - 2 * (self.p_z + self.p_y),
            1 - 2 * (self.p_z + self.p_x),
            1 - 2 * (self.p_x + self.p_y),
        )

    @property
    def is_noiseless(self) -> bool:
        return (
            self.p_x == self.p_y == self.p_z == self.p_c == 0.0
            and all(sum(p for _, p in d) == 0 for d in self.clifford_channels.values())
        )

    def rotation_channel(self) -> tuple[tuple[str, float], ...]:
        return (("X", self.p_x), ("Y", self.p_y), ("Z", self.p_z))

    def clifford_channel(self, kind: str) -> tuple[tuple[str, float], ...]:
        if kind in self.clifford_channels:
            return self.clifford_channels[kind]
        return depolarizing_channel(2 if kind in ("CNOT", "CZ") else 1, self.p_c)

    def to_dict(self) -> dict:
        d = {"p_x": self.p_x, "p_y": self.p_y, "p_z": self.p_z, "p_c": self.p_c, "p_e": self.p_e}
        if self.clifford_channels:
            d["clifford_channels"] = {k: [list(t) for t in v] for k, v in self.clifford_channels.items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PauliNoiseSpec":
        known = {"p_x", "p_y", "p_z", "p_c", "p_e", "clifford_channels", "p"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown noise keys {sorted(extra)}")
        if "p" in d:
            base = {"p_x": d["p"], "p_y": d["p"], "p_z": d["p"], "p_c": d["p"]}
        else:
            base = {}
        for k in ("p_x", "p_y", "p_z", "p_c", "p_e"):
            if k in d:
                base[k] = d[k]
        chans = {k: tuple((lab, p) for lab, p in v) for k, v in d.get("clifford_channels", {}).items()}
        return cls(**{k: float(v) for k, v in base.items()}, clifford_channels=chans)


NOISELESS = PauliNoiseSpec()


@dataclass(frozen=True)
class Observable:
    """Real linear combination of Pauli strings."""

    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        terms = tuple((float(c), str(p).upper()) for c, p in self.terms)
        if not terms:
            raise ValueError("observable needs at least one term")
        widths = {len(p) for _, p in terms}
        if len(widths) != 1:
            raise ValueError("all Pauli strings must have the same width")
        for c, p in terms:
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")
            if any(ch not in "IXYZ" for ch in p):
                raise ValueError(f"bad Pauli string {p!r}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, pauli: str, coeff: float = 1.0) -> "Observable":
        return cls(((coeff, pauli),))

    @classmethod
    def local(cls, n: int, ops: Mapping[int, str], coeff: float = 1.0) -> "Observable":
        s = ["I"] * n
        for q, ch in ops.items():
            s[q] = ch
        return cls(((coeff, "".join(s)),))

    @property
    def num_qubits(self) -> int:
        return len(self.terms[0][1])

    @property
    def locality(self) -> int:
        return max(sum(ch != "I" for ch in p) for _, p in self.terms)

    @property
    def norm_bound(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    def scaled(self, a: float) -> "Observable":
        return Observable(tuple((a * c, p) for c, p in self.terms))

    def __add__(self, other: "Observable") -> "Observable":
        return Observable(self.terms + other.terms)

    def dense(self) -> np.ndarray:
        if self.num_qubits > MAX_DENSE_QUBITS:
            raise GuardError(f"dense observable limited to N <= {MAX_DENSE_QUBITS}")
        dim = 2**self.num_qubits
        m = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            m += c * pauli_string_matrix(p)
        return m

    def to_list(self) -> list[dict]:
        return [{"coeff": c, "pauli_string": p} for c, p in self.terms]

    @classmethod
    def from_list(cls, items: Sequence[Mapping]) -> "Observable":
        return cls(tuple((it["coeff"], it["pauli_string"]) for it in items))

    def key(self) -> str:
        """Canonical hash (term order matters, as it fixes the summation order)."""
        return hashlib.sha256(json.dumps(self.to_list()).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    @property
    def num_qubits(self) -> int:
        return int(round(math.log2(self.amplitudes.shape[0])))


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    @property
    def num_qubits(self) -> int:
        return int(round(math.log2(self.matrix.shape[0])))

    def check(self, tol: float = 1e-10):
        m = self.matrix
        if abs(np.trace(m) - 1) > tol:
            raise SimulationError(f"trace drifted to {np.trace(m)}")
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise SimulationError("density matrix lost hermiticity")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise SimulationError("density matrix has a negative eigenvalue")


# ---------------------------------------------------------------------------
# Gate matrices and application kernel
# ---------------------------------------------------------------------------


def rotation_matrices(kind: str, theta) -> np.ndarray:
    """Rotation matrix for a scalar angle (k, k) or an angle array (B, k, k)."""
    th = np.asarray(theta, dtype=float)
    c = np.cos(th / 2).astype(complex)
    s = np.sin(th / 2).astype(complex)
    em = np.exp(-0.5j * th)
    ep = np.exp(0.5j * th)
    z = np.zeros_like(c)
    o = np.ones_like(c)
    if kind == "RX":
        rows = [[c, -1j * s], [-1j * s, c]]
    elif kind == "RY":
        rows = [[c, -s], [s, c]]
    elif kind == "RZ":
        rows = [[em, z], [z, ep]]
    elif kind == "RZZ":
        rows = [[em, z, z, z], [z, ep, z, z], [z, z, ep, z], [z, z, z, em]]
    elif kind == "CRZ":
        rows = [[o, z, z, z], [z, o, z, z], [z, z, em, z], [z, z, z, ep]]
    else:
        raise ValueError(f"not a rotation: {kind}")
    m = np.array(rows, dtype=complex)
    return np.moveaxis(m, (0, 1), (-2, -1)) if th.ndim else m


def gate_matrix(g: GateOp, angle=None) -> np.ndarray:
    if g.kind in _FIXED:
        return _FIXED[g.kind]
    return rotation_matrices(g.kind, g.angle if angle is None else angle)


def apply_matrix(psi: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply ``mat`` (shared (K,K) or per-row (B,K,K)) to ``qubits`` of ``psi`` (B, 2**n)."""
    b = psi.shape[0]
    k = len(qubits)
    t = psi.reshape((b,) + (2,) * n)
    axes = [1 + q for q in qubits]
    t = np.moveaxis(t, axes, list(range(1, 1 + k))).reshape(b, 2**k, -1)
    t = mat @ t
    t = t.reshape((b,) + (2,) * n)
    t = np.moveaxis(t, list(range(1, 1 + k)), axes)
    return t.reshape(b, 2**n)


def _kron_rows(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    b = a.shape[0]
    return np.einsum("bij,bkl->bikjl", a, c).reshape(b, 4, 4)


def initial_states(n: int, tag: str, batch: int) -> np.ndarray:
    dim = 2**n
    if tag == "zero":
        psi = np.zeros((batch, dim), dtype=complex)
        psi[:, 0] = 1.0
    elif tag == "plus":
        psi = np.full((batch, dim), 2.0 ** (-n / 2), dtype=complex)
    else:
        raise ValueError(f"unknown initial state {tag!r}")
    return psi


class _ChannelSampler:
    """Caches per-channel label probabilities and Pauli matrix stacks."""

    def __init__(self, noise: PauliNoiseSpec):
        self.noise = noise
        self._cache: dict = {}
        q = noise.rotation_channel()
        p = np.array([1 - sum(v for _, v in q)] + [v for _, v in q])
        self.rot_p = np.clip(p, 0, None)
        self.rot_stack = np.stack([PAULI_MATRICES[c] for c in "IXYZ"])
        self.rot_active = p[0] < 1.0

    def clifford(self, kind: str):
        if kind not in self._cache:
            dist = self.noise.clifford_channel(kind)
            arity = 2 if kind in ("CNOT", "CZ") else 1
            labels = ["I" * arity] + [lab for lab, _ in dist]
            p = np.array([1 - sum(v for _, v in dist)] + [v for _, v in dist])
            stack = np.stack([pauli_string_matrix(lab) for lab in labels])
            self._cache[kind] = (np.clip(p, 0, None), stack, p[0] < 1.0)
        return self._cache[kind]


def _draw(rng: np.random.Generator, p: np.ndarray, size: int) -> np.ndarray:
    return rng.choice(len(p), size=size, p=p / p.sum())


def evolve(
    psi: np.ndarray,
    gates: Sequence[GateOp],
    angles: Sequence | None,
    n: int,
    noise: PauliNoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    sampler: _ChannelSampler | None = None,
) -> np.ndarray:
    """Apply a gate list to a batch of states, optionally sampling Pauli errors.

    ``angles`` holds, per gate, ``None`` (use the gate's own angle), a float or a
    (B,) array. With ``noise`` given, one trajectory is drawn per row.
    """
    b = psi.shape[0]
    noisy = noise is not None and not noise.is_noiseless
    if noisy:
        if rng is None:
            raise ValueError("noisy evolution needs an rng")
        sampler = sampler or _ChannelSampler(noise)
    for idx, g in enumerate(gates):
        ang = None if angles is None else angles[idx]
        mat = gate_matrix(g, ang)
        if noisy:
            if g.kind in CLIFFORD_KINDS:
                p, stack, active = sampler.clifford(g.kind)
                if active:
                    mat = stack[_draw(rng, p, b)] @ mat
            elif sampler.rot_active:
                labs = [_draw(rng, sampler.rot_p, b) for _ in g.qubits]
                err = sampler.rot_stack[labs[0]]
                if len(labs) == 2:
                    err = _kron_rows(err, sampler.rot_stack[labs[1]])
                mat = err @ mat
        psi = apply_matrix(psi, mat, g.qubits, n)
    return psi


# ---------------------------------------------------------------------------
# Public backends
# ---------------------------------------------------------------------------


def _guard(n: int, limit: int, what: str):
    if n > limit:
        raise GuardError(f"{what} limited to N <= {limit}, got N = {n}")


def run_pure(c: ConcreteCircuit) -> StateVector:
    _guard(c.num_qubits, MAX_PURE_QUBITS, "statevector simulation")
    psi = initial_states(c.num_qubits, c.initial_state, 1)
    psi = evolve(psi, c.gates, None, c.num_qubits)
    return StateVector(psi[0])


def run_pure_batch(c: ParamCircuit, X: np.ndarray) -> np.ndarray:
    """Noiseless states for every parameter row; shape (B, 2**N)."""
    _guard(c.num_qubits, MAX_PURE_QUBITS, "statevector simulation")
    table = c.angle_table(X)
    b = np.atleast_2d(X).shape[0]
    psi = initial_states(c.num_qubits, c.initial_state, b)
    return evolve(psi, c.gates, table, c.num_qubits)


def run_trajectories(
    c: ParamCircuit | ConcreteCircuit,
    noise: PauliNoiseSpec,
    rng: np.random.Generator,
    X: np.ndarray | None = None,
    repeats: int = 1,
) -> np.ndarray:
    """One noisy trajectory per row. For a ParamCircuit the rows are the
    parameter rows of X, each repeated ``repeats`` times (row-major)."""
    _guard(c.num_qubits, MAX_PURE_QUBITS, "trajectory simulation")
    if isinstance(c, ParamCircuit):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if repeats > 1:
            X = np.repeat(X, repeats, axis=0)
        table = c.angle_table(X)
        b = X.shape[0]
    else:
        table = None
        b = repeats
    psi = initial_states(c.num_qubits, c.initial_state, b)
    return evolve(psi, c.gates, table, c.num_qubits, noise, rng)


def run_noisy_trajectory(c: ConcreteCircuit, noise: PauliNoiseSpec, seed) -> StateVector:
    rng = np.random.default_rng(seed)
    return StateVector(run_trajectories(c, noise, rng)[0])


def _apply_channel_dm(rho: np.ndarray, dist, qubits: Sequence[int], n: int) -> np.ndarray:
    p_id = 1 - sum(p for _, p in dist)
    out = p_id * rho
    cols = [q + n for q in qubits]
    for lab, p in dist:
        if p == 0:
            continue
        m = pauli_string_matrix(lab)
        term = apply_matrix(rho, m, qubits, 2 * n)
        term = apply_matrix(term, m.conj(), cols, 2 * n)
        out = out + p * term
    return out


def run_noisy_exact(c: ConcreteCircuit, noise: PauliNoiseSpec) -> DensityMatrix:
    """Exact channel composition: N_P after each rotation (on each of its
    qubits), the Clifford channel after each Clifford gate."""
    n = c.num_qubits
    _guard(n, MAX_DENSITY_QUBITS, "density-matrix simulation")
    psi0 = initial_states(n, c.initial_state, 1)[0]
    rho = np.outer(psi0, psi0.conj()).reshape(1, -1)
    rot = noise.rotation_channel()
    rot_on = any(p > 0 for _, p in rot)
    for g in c.gates:
        m = gate_matrix(g)
        rho = apply_matrix(rho, m, g.qubits, 2 * n)
        rho = apply_matrix(rho, m.conj(), [q + n for q in g.qubits], 2 * n)
        if g.kind in CLIFFORD_KINDS:
            dist = noise.clifford_channel(g.kind)
            if any(p > 0 for _, p in dist):
                rho = _apply_channel_dm(rho, dist, g.qubits, n)
        elif rot_on:
            for q in g.qubits:
                rho = _apply_channel_dm(rho, rot, (q,), n)
    return DensityMatrix(rho.reshape(2**n, 2**n))


def apply_pauli_channel(rho: DensityMatrix, noise: PauliNoiseSpec, qubit: int) -> DensityMatrix:
    """Apply the rotation channel N_P to one qubit of a density matrix."""
    n = rho.num_qubits
    out = _apply_channel_dm(rho.matrix.reshape(1, -1), noise.rotation_channel(), (qubit,), n)
    return DensityMatrix(out.reshape(2**n, 2**n))


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------


def _pauli_masks(p: str):
    n = len(p)
    flip = 0
    phase_mask = 0
    ny = 0
    for q, ch in enumerate(p):
        bit = 1 << (n - 1 - q)
        if ch in "XY":
            flip |= bit
        if ch in "YZ":
            phase_mask |= bit
        if ch == "Y":
            ny += 1
    return flip, phase_mask, ny


def _parity(idx: np.ndarray) -> np.ndarray:
    v = idx.copy()
    out = np.zeros_like(v)
    while np.any(v):
        out ^= v & 1
        v >>= 1
    return out


_PHASE_CACHE: dict = {}


def _pauli_action(p: str):
    """(flip mask, phase vector) such that (P psi)[i ^ flip] = phase[i] * psi[i]."""
    hit = _PHASE_CACHE.get(p)
    if hit is None:
        n = len(p)
        flip, pm, ny = _pauli_masks(p)
        idx = np.arange(2**n)
        phase = (1j**ny) * (1 - 2 * _parity(idx & pm))
        hit = (flip, phase.astype(complex), idx ^ flip)
        if len(_PHASE_CACHE) < 4096:
            _PHASE_CACHE[p] = hit
    return hit


def pauli_expectations(psi: np.ndarray, pauli: str) -> np.ndarray:
    """<psi_b|P|psi_b> for each row of psi (B, 2**N); returns real (B,)."""
    if psi.shape[-1] != 2 ** len(pauli):
        raise ValueError("Pauli width does not match state")
    if set(pauli) <= {"I"}:
        vals = np.sum(np.abs(psi) ** 2, axis=-1).astype(complex)
    else:
        _, phase, perm = _pauli_action(pauli)
        vals = np.sum(psi[..., perm].conj() * phase * psi, axis=-1)
    return _real(vals)


def _real(vals, tol: float = 1e-9):
    vals = np.asarray(vals)
    if np.iscomplexobj(vals):
        if np.max(np.abs(vals.imag), initial=0.0) > tol:
            raise SimulationError(f"expectation has imaginary residue {np.max(np.abs(vals.imag)):.3e}")
        vals = vals.real
    return vals


def observable_expectations(psi: np.ndarray, obs: Observable) -> np.ndarray:
    """Batched <O> over rows of psi, summed in term order."""
    out = np.zeros(psi.shape[0])
    for c, p in obs.terms:
        out = out + c * pauli_expectations(psi, p)
    return out


def density_pauli_expectation(rho: np.ndarray, pauli: str) -> float:
    _, phase, perm = _pauli_action(pauli)
    idx = np.arange(rho.shape[0])
    return float(_real(np.sum(rho[idx, perm] * phase)))


def expectation(state: StateVector | DensityMatrix, obs: Observable) -> float:
    if isinstance(state, StateVector):
        if state.num_qubits != obs.num_qubits:
            raise ValueError("observable width does not match state")
        return float(observable_expectations(state.amplitudes[None, :], obs)[0])
    if isinstance(state, DensityMatrix):
        if state.num_qubits != obs.num_qubits:
            raise ValueError("observable width does not match state")
        total = 0.0
        for c, p in obs.terms:
            total += c * density_pauli_expectation(state.matrix, p)
        return float(total)
    raise TypeError("expectation needs a StateVector or DensityMatrix")


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------


def measure_rows(psi: np.ndarray, bases: np.ndarray, p_e: float, rng: np.random.Generator) -> np.ndarray:
    """One measurement per row; ``bases`` is an int array (B, N) with 0=X, 1=Y, 2=Z.

    Returns outcome bits (B, N) as uint8 after readout flips.
    """
    b, dim = psi.shape
    n = bases.shape[1]
    for q in range(n):
        col = bases[:, q]
        if np.all(col == 2):
            continue
        psi = apply_matrix(psi, _BASIS_ROT[col], (q,), n)
    probs = np.abs(psi) ** 2
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(b)
    idx = np.minimum((cdf < u[:, None]).sum(axis=1), dim - 1)
    shifts = np.arange(n - 1, -1, -1)
    bits = ((idx[:, None] >> shifts) & 1).astype(np.uint8)
    if p_e > 0:
        bits ^= (rng.random(bits.shape) < p_e).astype(np.uint8)
    return bits


def sample_measurement(
    state: StateVector, bases: Sequence[str] | str, shots: int, p_e: float = 0.0, seed=None
) -> np.ndarray:
    """``shots`` outcome bit strings (shots, N) in the requested per-qubit bases."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = state.num_qubits
    if len(bases) != n:
        raise ValueError("need one basis per qubit")
    codes = np.array([BASIS_CODES[b] for b in bases])
    rng = np.random.default_rng(seed)
    psi = state.amplitudes[None, :]
    for q in range(n):
        if codes[q] != 2:
            psi = apply_matrix(psi, _BASIS_ROT[codes[q]], (q,), n)
    probs = np.abs(psi[0]) ** 2
    idx = rng.choice(2**n, size=shots, p=probs / probs.sum())
    bits = ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    if p_e > 0:
        bits ^= (rng.random(bits.shape) < p_e).astype(np.uint8)
    return bits


def estimate_from_shots(
    c: ParamCircuit,
    X: np.ndarray,
    obs: Observable,
    noise: PauliNoiseSpec,
    shots: int,
    rng: np.random.Generator,
    chunk: int = 200_000,
) -> np.ndarray:
    """Shot-averaged <O> per parameter row on the trajectory backend.

    Each Pauli term is measured in its own basis with ``shots`` fresh
    trajectories (one measurement each), readout flips included.
    """
    X = np.atleast_2d(X)
    b = X.shape[0]
    n = c.num_qubits
    out = np.zeros(b)
    rows_per = max(1, chunk // shots)
    for coeff, p in obs.terms:
        support = [q for q, ch in enumerate(p) if ch != "I"]
        if not support:
            out += coeff
            continue
        codes = np.full(n, 2)
        for q in support:
            codes[q] = BASIS_CODES[p[q]]
        for s in range(0, b, rows_per):
            xs = X[s : s + rows_per]
            psi = run_trajectories(c, noise, rng, xs, repeats=shots)
            bits = measure_rows(psi, np.tile(codes, (psi.shape[0], 1)), noise.p_e, rng)
            sign = 1 - 2 * (bits[:, support].sum(axis=1) % 2).astype(float)
            out[s : s + rows_per] += coeff * sign.reshape(xs.shape[0], shots).mean(axis=1)
    return out


def exact_spectrum(obs: Observable) -> tuple[float, float]:
    _guard(obs.num_qubits, MAX_DENSE_QUBITS, "dense diagonalization")
    ev = np.linalg.eigvalsh(obs.dense())
    return float(ev[0]), float(ev[-1])
