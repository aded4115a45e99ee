"""Parameter-shift gradients for slot-parametrized circuits.

Shared slots are differentiated per occurrence: every slot-bound gate gets
its own angle, is shifted alone, and contributes a * df/dtheta (chain rule
through theta = a x + b). Pauli rotations use the two-term +-pi/2 rule;
CRZ has generator eigenvalues {0, 0, -1/2, 1/2} and needs four terms.
"""

from __future__ import annotations

import math

import numpy as np

from .circuits import PAULI_ROTATIONS, GateOp, ParamCircuit

_C_PLUS = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C_MINUS = (math.sqrt(2) - 1) / (4 * math.sqrt(2))


def expand_occurrences(c: ParamCircuit):
    """Circuit with one unit-map slot per slot-bound gate, plus the chain data."""
    gates = []
    occ_slot, occ_a, occ_b, occ_kind = [], [], [], []
    for g in c.gates:
        if g.slot is None:
            gates.append(g)
            continue
        k = len(occ_slot)
        gates.append(GateOp(g.kind, g.qubits, slot=k))
        occ_slot.append(g.slot)
        occ_a.append(g.a)
        occ_b.append(g.b)
        occ_kind.append(g.kind)
    expanded = ParamCircuit(c.num_qubits, tuple(gates), len(occ_slot), c.initial_state)
    return expanded, np.array(occ_slot, int), np.array(occ_a), np.array(occ_b), occ_kind


def shift_rule_rows(theta: np.ndarray, kinds: list[str]):
    """Shifted angle rows and weights: df/dtheta_k = sum_r w_r f(rows_r)."""
    rows, weights, owner = [], [], []
    for k, kind in enumerate(kinds):
        if kind in PAULI_ROTATIONS:
            terms = ((math.pi / 2, 0.5), (-math.pi / 2, -0.5))
        elif kind == "CRZ":
            terms = (
                (math.pi / 2, _C_PLUS),
                (-math.pi / 2, -_C_PLUS),
                (3 * math.pi / 2, -_C_MINUS),
                (-3 * math.pi / 2, _C_MINUS),
            )
        else:
            raise ValueError(f"no shift rule for {kind}")
        for shift, w in terms:
            r = theta.copy()
            r[k] += shift
            rows.append(r)
            weights.append(w)
            owner.append(k)
    return np.array(rows), np.array(weights), np.array(owner, int)


def parameter_shift(c: ParamCircuit, x, evaluate) -> np.ndarray:
    """Gradient of f(x) = evaluate(c_expanded, rows) via shift rules.

    ``evaluate(circuit, rows)`` returns one value per row.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (c.num_slots,):
        raise ValueError(f"expected {c.num_slots} parameters")
    expanded, slot, a, b, kinds = expand_occurrences(c)
    theta = a * x[slot] + b
    rows, w, owner = shift_rule_rows(theta, kinds)
    vals = np.asarray(evaluate(expanded, rows), dtype=float)
    dtheta = np.bincount(owner, weights=w * vals, minlength=len(kinds))
    return np.bincount(slot, weights=a * dtheta, minlength=c.num_slots)


def finite_difference(f, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    eye = np.eye(x.shape[0])
    rows = np.vstack([x + h * eye, x - h * eye])
    vals = np.asarray(f(rows), dtype=float)
    return (vals[: x.shape[0]] - vals[x.shape[0] :]) / (2 * h)
