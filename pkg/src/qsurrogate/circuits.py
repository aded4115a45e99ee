"""Circuit IR, application circuit builders and parameter binding.

A :class:`ParamCircuit` is an ordered gate list whose rotation angles are
either fixed or read from a shared parameter vector through an affine map
``angle = a * x[slot] + b``. Binding resolves every slot and yields a
:class:`ConcreteCircuit`; gate order is always application (time) order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

CLIFFORD_KINDS = frozenset({"H", "S", "SDG", "X", "CNOT", "CZ"})
ROTATION_KINDS = frozenset({"RZ", "RX", "RY", "RZZ", "CRZ"})
# Rotations generated by a single Pauli operator (two-term shift rule applies).
PAULI_ROTATIONS = frozenset({"RZ", "RX", "RY", "RZZ"})
GATE_ARITY = {
    "H": 1, "S": 1, "SDG": 1, "X": 1, "CNOT": 2, "CZ": 2,
    "RZ": 1, "RX": 1, "RY": 1, "RZZ": 2, "CRZ": 2,
}
INITIAL_STATES = ("zero", "plus")


class CircuitError(ValueError):
    """Raised for malformed circuits or invalid binding inputs."""


@dataclass(frozen=True)
class GateOp:
    """One gate. Rotations carry either ``angle`` or ``slot`` (with ``a``, ``b``)."""

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    slot: int | None = None
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise CircuitError(f"{self.kind} acts on {GATE_ARITY[self.kind]} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"repeated qubit in {self.kind}{self.qubits}")
        if self.kind in CLIFFORD_KINDS:
            if self.angle is not None or self.slot is not None:
                raise CircuitError(f"Clifford gate {self.kind} takes no angle")
        else:
            if (self.angle is None) == (self.slot is None):
                raise CircuitError(f"rotation {self.kind} needs exactly one of angle/slot")
            if self.angle is not None and not math.isfinite(self.angle):
                raise CircuitError("fixed angle must be finite")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise CircuitError("affine coefficients must be finite")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATION_KINDS

    @property
    def is_parametric(self) -> bool:
        return self.slot is not None

    def dagger(self) -> "GateOp":
        """Inverse gate (fixed-angle rotations and Cliffords only)."""
        if self.is_parametric:
            raise CircuitError("cannot invert an unbound rotation")
        if self.kind == "S":
            return GateOp("SDG", self.qubits)
        if self.kind == "SDG":
            return GateOp("S", self.qubits)
        if self.is_rotation:
            return GateOp(self.kind, self.qubits, angle=-self.angle)
        return self

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.slot is not None:
            out.update(slot=self.slot, a=self.a, b=self.b)
        elif self.angle is not None:
            out["angle"] = self.angle
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "GateOp":
        return cls(
            kind=d["kind"],
            qubits=tuple(d["qubits"]),
            angle=d.get("angle"),
            slot=d.get("slot"),
            a=d.get("a", 1.0),
            b=d.get("b", 0.0),
        )


def _check_gates(num_qubits: int, gates: Sequence[GateOp]):
    if num_qubits < 1:
        raise CircuitError("num_qubits must be >= 1")
    for g in gates:
        if max(g.qubits) >= num_qubits:
            raise CircuitError(f"gate {g.kind}{g.qubits} exceeds {num_qubits} qubits")


@dataclass(frozen=True)
class ParamCircuit:
    num_qubits: int
    gates: tuple[GateOp, ...]
    num_slots: int
    initial_state: str = "zero"

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        _check_gates(self.num_qubits, self.gates)
        if self.initial_state not in INITIAL_STATES:
            raise CircuitError(f"initial_state must be one of {INITIAL_STATES}")
        used = set()
        for g in self.gates:
            if g.slot is not None:
                if not 0 <= g.slot < self.num_slots:
                    raise CircuitError(f"slot {g.slot} out of range for {self.num_slots} slots")
                used.add(g.slot)
        if len(used) != self.num_slots:
            missing = sorted(set(range(self.num_slots)) - used)
            raise CircuitError(f"slots {missing} are not referenced by any gate")

    @property
    def d(self) -> int:
        return self.num_slots

    def slot_occurrences(self) -> list[list[int]]:
        """Gate indices referencing each slot."""
        occ: list[list[int]] = [[] for _ in range(self.num_slots)]
        for i, g in enumerate(self.gates):
            if g.slot is not None:
                occ[g.slot].append(i)
        return occ

    def angle_table(self, X: np.ndarray) -> list[np.ndarray | float | None]:
        """Per-gate angles for a batch of parameter rows ``X`` of shape (B, d).

        Entries are ``None`` for Cliffords, floats for fixed rotations and
        (B,) arrays for slot rotations.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.num_slots:
            raise CircuitError(f"expected {self.num_slots} parameters, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise CircuitError("parameters must be finite")
        table: list = []
        for g in self.gates:
            if g.slot is not None:
                table.append(g.a * X[:, g.slot] + g.b)
            else:
                table.append(g.angle)
        return table

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "gates": [g.to_dict() for g in self.gates],
            "num_slots": self.num_slots,
            "initial_state": self.initial_state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamCircuit":
        return cls(
            num_qubits=d["num_qubits"],
            gates=tuple(GateOp.from_dict(g) for g in d["gates"]),
            num_slots=d.get("num_slots", 0),
            initial_state=d.get("initial_state", "zero"),
        )

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ConcreteCircuit:
    """Circuit with every rotation angle resolved to radians."""

    num_qubits: int
    gates: tuple[GateOp, ...]
    initial_state: str = "zero"
    # Index of the ParamCircuit gate each gate came from (for bookkeeping only).
    origin: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        _check_gates(self.num_qubits, self.gates)
        if self.initial_state not in INITIAL_STATES:
            raise CircuitError(f"initial_state must be one of {INITIAL_STATES}")
        if any(g.is_parametric for g in self.gates):
            raise CircuitError("ConcreteCircuit cannot contain unbound slots")

    def angles(self) -> list[float | None]:
        return [g.angle for g in self.gates]

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "gates": [g.to_dict() for g in self.gates],
            "num_slots": 0,
            "initial_state": self.initial_state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConcreteCircuit":
        return cls(
            num_qubits=d["num_qubits"],
            gates=tuple(GateOp.from_dict(g) for g in d["gates"]),
            initial_state=d.get("initial_state", "zero"),
        )


def circuit_from_json(text: str) -> ParamCircuit | ConcreteCircuit:
    d = json.loads(text)
    if d.get("num_slots", 0) == 0 and not any("slot" in g for g in d["gates"]):
        return ConcreteCircuit.from_dict(d)
    return ParamCircuit.from_dict(d)


def circuit_to_json(c: ParamCircuit | ConcreteCircuit) -> str:
    return json.dumps(c.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_vqe_ansatz(num_qubits: int, layers: int) -> ParamCircuit:
    """Trotter-style TFIM ansatz on ``|+>^N``.

    Each layer applies ``RX`` on every qubit followed by ``RZZ`` on every
    neighbouring pair; all ``L * (2N - 1)`` angles are independent slots.
    """
    if num_qubits < 2:
        raise CircuitError("VQE ansatz needs N >= 2")
    if layers < 1:
        raise CircuitError("VQE ansatz needs L >= 1")
    n = num_qubits
    per_layer = 2 * n - 1
    gates = []
    for layer in range(layers):
        base = layer * per_layer
        for i in range(n):
            gates.append(GateOp("RX", (i,), slot=base + i))
        for i in range(n - 1):
            gates.append(GateOp("RZZ", (i, i + 1), slot=base + n + i))
    return ParamCircuit(n, tuple(gates), layers * per_layer, initial_state="plus")


def fspt_drive_layer(num_qubits: int) -> list[GateOp]:
    """The X-drive half period: ``RX(pi - 2 delta)`` on every qubit (slot 0)."""
    return [GateOp("RX", (i,), slot=0, a=-2.0, b=math.pi) for i in range(num_qubits)]


def fspt_coupling_layer(num_qubits: int) -> list[GateOp]:
    """The disordered three-body coupling half period.

    Time order: ``CRZ(-pi)`` ladder, ``RY(-2 J_i)`` on bulk qubits, ``CRZ(pi)``
    ladder. ``CRZ`` qubits are (control, target) = (i+1, i).
    """
    n = num_qubits
    gates = [GateOp("CRZ", (i + 1, i), angle=-math.pi) for i in range(n - 1)]
    # bulk qubit q (0-based 1..n-2) carries J_{q+1}, stored at slot q
    gates += [GateOp("RY", (q,), slot=q, a=-2.0, b=0.0) for q in range(1, n - 1)]
    gates += [GateOp("CRZ", (i + 1, i), angle=math.pi) for i in range(n - 1)]
    return gates


def build_fspt_circuit(num_qubits: int, half_periods: int) -> ParamCircuit:
    """Floquet circuit after ``k`` half periods, starting from ``|0...0>``.

    Blocks alternate drive, coupling, drive, ... so odd ``k`` ends with a
    trailing drive layer. Slot 0 is ``delta``; slots 1..N-2 are ``J_2..J_{N-1}``.
    """
    if num_qubits < 3:
        raise CircuitError("FSPT circuit needs N >= 3")
    if half_periods < 1:
        raise CircuitError("FSPT circuit needs k >= 1")
    gates: list[GateOp] = []
    for block in range(half_periods):
        if block % 2 == 0:
            gates += fspt_drive_layer(num_qubits)
        else:
            gates += fspt_coupling_layer(num_qubits)
    num_slots = num_qubits - 1
    if half_periods == 1:
        # J slots unused before the first coupling layer; keep them referenced
        # by identity-angle placeholders so the slot layout is stable in k.
        gates += [GateOp("RY", (q,), slot=q, a=0.0, b=0.0) for q in range(1, num_qubits - 1)]
    return ParamCircuit(num_qubits, tuple(gates), num_slots, initial_state="zero")


def fspt_blocks(num_qubits: int, half_periods: int) -> list[list[GateOp]]:
    """Gate blocks of the Floquet circuit, one per half period, in time order."""
    drive = fspt_drive_layer(num_qubits)
    coupling = fspt_coupling_layer(num_qubits)
    return [drive if k % 2 == 0 else coupling for k in range(half_periods)]


# ---------------------------------------------------------------------------
# Passes
# ---------------------------------------------------------------------------


def bind_parameters(c: ParamCircuit, x: Sequence[float]) -> ConcreteCircuit:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != c.num_slots:
        raise CircuitError(f"expected {c.num_slots} parameters, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise CircuitError("parameters must be finite")
    gates = []
    for g in c.gates:
        if g.slot is not None:
            gates.append(GateOp(g.kind, g.qubits, angle=g.a * float(x[g.slot]) + g.b))
        else:
            gates.append(g)
    return ConcreteCircuit(c.num_qubits, tuple(gates), c.initial_state, origin=tuple(range(len(gates))))


def fold_gates(c: ConcreteCircuit, p: int) -> ConcreteCircuit:
    """Replace every gate ``G`` by ``G (G^dagger G)^p``."""
    if int(p) != p or p < 0:
        raise CircuitError("fold factor must be a non-negative integer")
    p = int(p)
    gates: list[GateOp] = []
    origin: list[int] = []
    for i, g in enumerate(c.gates):
        inv = g.dagger()
        gates.append(g)
        for _ in range(p):
            gates += [inv, g]
        origin += [i] * (2 * p + 1)
    return ConcreteCircuit(c.num_qubits, tuple(gates), c.initial_state, origin=tuple(origin))


def fold_param_gates(c: ParamCircuit, p: int) -> ParamCircuit:
    """Folding before binding: slot gates invert through (a, b) -> (-a, -b)."""
    if int(p) != p or p < 0:
        raise CircuitError("fold factor must be a non-negative integer")
    gates: list[GateOp] = []
    for g in c.gates:
        if g.slot is not None:
            inv = GateOp(g.kind, g.qubits, slot=g.slot, a=-g.a, b=-g.b)
        else:
            inv = g.dagger()
        gates.append(g)
        for _ in range(int(p)):
            gates += [inv, g]
    return ParamCircuit(c.num_qubits, tuple(gates), c.num_slots, c.initial_state)


def build_fold_benchmark() -> ParamCircuit:
    """Two-qubit check circuit: RX(x) on qubit 0, then two CRZ(pi) (control 0)."""
    gates = (
        GateOp("RX", (0,), slot=0),
        GateOp("CRZ", (0, 1), angle=math.pi),
        GateOp("CRZ", (0, 1), angle=math.pi),
    )
    return ParamCircuit(2, gates, 1, "zero")


def lower_two_qubit_rotations(c: ConcreteCircuit) -> ConcreteCircuit:
    """Rewrite ``RZZ`` as CNOT.RZ.CNOT and ``CRZ`` as RZ/CNOT pairs.

    ``CRZ(t)`` (control c, target t) becomes RZ_t(t/2), CNOT, RZ_t(-t/2), CNOT.
    """
    gates: list[GateOp] = []
    for g in c.gates:
        if g.kind == "RZZ":
            q0, q1 = g.qubits
            gates += [GateOp("CNOT", (q0, q1)), GateOp("RZ", (q1,), angle=g.angle), GateOp("CNOT", (q0, q1))]
        elif g.kind == "CRZ":
            ctrl, tgt = g.qubits
            gates += [
                GateOp("RZ", (tgt,), angle=g.angle / 2),
                GateOp("CNOT", (ctrl, tgt)),
                GateOp("RZ", (tgt,), angle=-g.angle / 2),
                GateOp("CNOT", (ctrl, tgt)),
            ]
        else:
            gates.append(g)
    return ConcreteCircuit(c.num_qubits, tuple(gates), c.initial_state)


def gate_counts(c: ParamCircuit | ConcreteCircuit) -> dict[str, int]:
    counts: dict[str, int] = {}
    for g in c.gates:
        counts[g.kind] = counts.get(g.kind, 0) + 1
    return counts


def random_circuit(
    num_qubits: int,
    num_slots: int,
    rng: np.random.Generator,
    clifford_depth: int = 2,
    kinds: Iterable[str] = ("RX", "RY", "RZ"),
    initial_state: str = "zero",
) -> ParamCircuit:
    """Random test circuit: each slot drives one Pauli rotation (a=1, b=0),
    interleaved with random Clifford gates."""
    kinds = tuple(kinds)
    gates: list[GateOp] = []
    for s in range(num_slots):
        for _ in range(clifford_depth):
            gates.append(_random_clifford(num_qubits, rng))
        kind = kinds[rng.integers(len(kinds))]
        two = GATE_ARITY[kind] == 2
        if two and num_qubits >= 2:
            q = rng.choice(num_qubits, 2, replace=False)
            gates.append(GateOp(kind, tuple(int(v) for v in q), slot=s))
        else:
            if two:
                kind = "RZ"
            gates.append(GateOp(kind, (int(rng.integers(num_qubits)),), slot=s))
    gates.append(_random_clifford(num_qubits, rng))
    return ParamCircuit(num_qubits, tuple(gates), num_slots, initial_state)


def _random_clifford(num_qubits: int, rng: np.random.Generator) -> GateOp:
    if num_qubits >= 2 and rng.random() < 0.5:
        kind = ("CNOT", "CZ")[rng.integers(2)]
        q = rng.choice(num_qubits, 2, replace=False)
        return GateOp(kind, tuple(int(v) for v in q))
    kind = ("H", "S", "X", "SDG")[rng.integers(4)]
    return GateOp(kind, (int(rng.integers(num_qubits)),))


def with_initial_state(c: ParamCircuit, initial_state: str) -> ParamCircuit:
    return replace(c, initial_state=initial_state)
