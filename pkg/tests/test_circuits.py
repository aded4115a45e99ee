import json
import math

import numpy as np
import pytest

from qsurrogate.circuits import (
    CircuitError,
    ConcreteCircuit,
    GateOp,
    ParamCircuit,
    bind_parameters,
    build_fold_benchmark,
    build_fspt_circuit,
    build_vqe_ansatz,
    circuit_from_json,
    circuit_to_json,
    fold_gates,
    fold_param_gates,
    gate_counts,
    lower_two_qubit_rotations,
    random_circuit,
)
from qsurrogate.simulator import run_pure


def test_vqe_ansatz_shapes():
    c = build_vqe_ansatz(2, 1)
    assert c.num_slots == 3
    assert [(g.kind, g.qubits, g.slot) for g in c.gates] == [("RX", (0,), 0), ("RX", (1,), 1), ("RZZ", (0, 1), 2)]
    assert c.initial_state == "plus"
    assert build_vqe_ansatz(6, 1).num_slots == 11
    assert build_vqe_ansatz(20, 1).num_slots == 39
    assert build_vqe_ansatz(4, 3).num_slots == 21


@pytest.mark.parametrize("n,l", [(1, 1), (3, 0)])
def test_vqe_ansatz_rejects(n, l):
    with pytest.raises(CircuitError):
        build_vqe_ansatz(n, l)


def test_fspt_single_half_period_is_drive_only():
    c = build_fspt_circuit(3, 1)
    active = [g for g in c.gates if not (g.slot is not None and g.a == 0 and g.b == 0)]
    assert [g.kind for g in active] == ["RX"] * 3
    assert c.num_slots == 2
    bound = bind_parameters(c, [0.0, 0.7])
    for g in bound.gates:
        if g.kind == "RX":
            assert g.angle == math.pi
        else:
            assert g.angle == 0.0


def test_fspt_layout():
    c = build_fspt_circuit(8, 2)
    assert c.num_slots == 7
    counts = gate_counts(c)
    assert counts["RX"] == 8 and counts["RY"] == 6 and counts["CRZ"] == 14
    c79 = build_fspt_circuit(8, 79)
    assert gate_counts(c79)["RX"] == 8 * 40
    assert gate_counts(c79)["RY"] == 6 * 39
    with pytest.raises(CircuitError):
        build_fspt_circuit(2, 3)


def test_fspt_binding_affine():
    c = build_fspt_circuit(4, 2)
    b = bind_parameters(c, [0.5, 1.0, 0.3])
    rx = [g.angle for g in b.gates if g.kind == "RX"]
    ry = {g.qubits[0]: g.angle for g in b.gates if g.kind == "RY"}
    assert all(a == math.pi - 1.0 for a in rx)
    assert ry == {1: -2.0, 2: -0.6}


def test_bind_zero_vector_and_errors():
    c = build_vqe_ansatz(3, 2)
    b = bind_parameters(c, np.zeros(c.num_slots))
    assert all(g.angle == 0.0 for g in b.gates)
    with pytest.raises(CircuitError):
        bind_parameters(c, np.zeros(c.num_slots + 1))
    with pytest.raises(CircuitError):
        bind_parameters(c, np.full(c.num_slots, np.nan))


def test_binding_reproduces_affine_maps_bitwise(rng):
    c = build_fspt_circuit(5, 3)
    for x in rng.uniform(-3, 3, size=(1000, c.num_slots)):
        b = bind_parameters(c, x)
        for g0, g1 in zip(c.gates, b.gates):
            if g0.slot is not None:
                assert g1.angle == g0.a * x[g0.slot] + g0.b


def test_gateop_validation():
    with pytest.raises(CircuitError):
        GateOp("H", (0,), angle=0.1)
    with pytest.raises(CircuitError):
        GateOp("RX", (0,))
    with pytest.raises(CircuitError):
        GateOp("RX", (0,), angle=0.1, slot=0)
    with pytest.raises(CircuitError):
        GateOp("CNOT", (1, 1))
    with pytest.raises(CircuitError):
        GateOp("RX", (0,), slot=0, a=math.inf)
    with pytest.raises(CircuitError):
        ParamCircuit(2, (GateOp("RX", (2,), slot=0),), 1)
    with pytest.raises(CircuitError):
        ParamCircuit(2, (GateOp("RX", (0,), slot=0),), 2)


def test_fold_examples():
    c = ConcreteCircuit(1, (GateOp("RX", (0,), angle=0.4),))
    assert fold_gates(c, 0).gates == c.gates
    assert [g.angle for g in fold_gates(c, 1).gates] == [0.4, -0.4, 0.4]
    bench = bind_parameters(build_fold_benchmark(), [0.3])
    assert len(fold_gates(bench, 16).gates) == 33 * len(bench.gates)
    with pytest.raises(CircuitError):
        fold_gates(c, -1)


def test_fold_unitarity(rng):
    for _ in range(5):
        pc = random_circuit(int(rng.integers(1, 7)), 3, rng, kinds=("RX", "RY", "RZ", "RZZ"))
        c = bind_parameters(pc, rng.uniform(-np.pi, np.pi, pc.num_slots))
        ref = run_pure(c).amplitudes
        for p in range(5):
            assert np.max(np.abs(run_pure(fold_gates(c, p)).amplitudes - ref)) < 1e-10


def test_fold_param_matches_fold_after_binding(rng):
    pc = build_fold_benchmark()
    for p in (1, 4):
        x = rng.uniform(-np.pi, np.pi, 1)
        a = bind_parameters(fold_param_gates(pc, p), x)
        b = fold_gates(bind_parameters(pc, x), p)
        assert [(g.kind, g.qubits) for g in a.gates] == [(g.kind, g.qubits) for g in b.gates]
        assert np.allclose([g.angle for g in a.gates], [g.angle for g in b.gates], atol=1e-15)


def test_rzz_lowering(rng):
    for theta in rng.uniform(-np.pi, np.pi, 100):
        c = ConcreteCircuit(3, (GateOp("H", (0,)), GateOp("H", (2,)), GateOp("RZZ", (0, 2), angle=theta)))
        low = lower_two_qubit_rotations(c)
        assert "RZZ" not in gate_counts(low)
        assert np.max(np.abs(run_pure(c).amplitudes - run_pure(low).amplitudes)) < 1e-12


def test_crz_lowering(rng):
    for theta in rng.uniform(-np.pi, np.pi, 20):
        c = ConcreteCircuit(2, (GateOp("H", (0,)), GateOp("H", (1,)), GateOp("CRZ", (0, 1), angle=theta)), "zero")
        low = lower_two_qubit_rotations(c)
        assert np.max(np.abs(run_pure(c).amplitudes - run_pure(low).amplitudes)) < 1e-12


def test_json_roundtrip():
    c = build_fspt_circuit(4, 3)
    back = circuit_from_json(circuit_to_json(c))
    assert back == c
    assert back.content_hash() == c.content_hash()
    d = json.loads(circuit_to_json(c))
    assert set(d) == {"num_qubits", "gates", "num_slots", "initial_state"}
    cc = bind_parameters(c, [0.1, 0.2, 0.3])
    assert circuit_from_json(circuit_to_json(cc)) == cc
