import math

import numpy as np
import pytest

from qsurrogate.circuits import ConcreteCircuit, GateOp, bind_parameters, build_fold_benchmark, random_circuit
from qsurrogate.errors import GuardError, SimulationError
from qsurrogate.simulator import (
    NOISELESS,
    DensityMatrix,
    Observable,
    PauliNoiseSpec,
    StateVector,
    apply_pauli_channel,
    density_pauli_expectation,
    exact_spectrum,
    expectation,
    pauli_string_matrix,
    run_noisy_exact,
    run_noisy_trajectory,
    run_pure,
    run_trajectories,
    sample_measurement,
)
from qsurrogate.vqe import TfimSpec, tfim_observable


def _circ(n, *gates, init="zero"):
    return ConcreteCircuit(n, tuple(gates), init)


def _random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def test_pure_examples():
    for x in np.linspace(-3, 3, 7):
        s = run_pure(_circ(1, GateOp("RX", (0,), angle=x)))
        assert abs(expectation(s, Observable.single("Z")) - math.cos(x)) < 1e-12
    s = run_pure(_circ(3))
    assert s.amplitudes[0] == 1 and np.count_nonzero(s.amplitudes) == 1
    h = run_pure(_circ(1, GateOp("H", (0,)))).amplitudes
    assert np.allclose(h, [1 / math.sqrt(2)] * 2, atol=1e-15)


def test_expectation_examples(rng):
    zero = StateVector(np.array([1, 0], complex))
    plus = StateVector(np.array([1, 1], complex) / math.sqrt(2))
    assert expectation(zero, Observable.single("Z")) == 1
    assert abs(expectation(plus, Observable.single("Z"))) < 1e-15
    H = tfim_observable(TfimSpec(4, -0.1, -0.5))
    psi = _random_state(rng, 4)
    dense = float(np.real(psi.conj() @ H.dense() @ psi))
    assert abs(expectation(StateVector(psi), H) - dense) < 1e-10
    rho = np.outer(psi, psi.conj())
    assert abs(expectation(DensityMatrix(rho), H) - dense) < 1e-10
    with pytest.raises(ValueError):
        expectation(zero, Observable.single("ZZ"))


def test_density_pauli_expectation_all_strings(rng):
    psi = _random_state(rng, 2)
    rho = np.outer(psi, psi.conj())
    for a in "IXYZ":
        for b in "IXYZ":
            p = a + b
            ref = np.real(np.trace(rho @ pauli_string_matrix(p)))
            assert abs(density_pauli_expectation(rho, p) - ref) < 1e-12


def test_noisy_exact_zero_noise_matches_pure(rng):
    for _ in range(5):
        pc = random_circuit(3, 4, rng, kinds=("RX", "RY", "RZ", "RZZ"))
        c = bind_parameters(pc, rng.uniform(-np.pi, np.pi, pc.num_slots))
        psi = run_pure(c).amplitudes
        rho = run_noisy_exact(c, NOISELESS).matrix
        assert np.linalg.norm(rho - np.outer(psi, psi.conj())) < 1e-10


def test_noisy_exact_single_rotation_closed_form():
    noise = PauliNoiseSpec(p_x=0.03, p_y=0.02, p_z=0.01)
    qz = noise.q[2]
    assert abs(expectation(run_noisy_exact(_circ(1, GateOp("RX", (0,), angle=0.0)), noise), Observable.single("Z")) - qz) < 1e-14
    for x in (0.3, 1.2, -2.0):
        rho = run_noisy_exact(_circ(1, GateOp("RX", (0,), angle=x)), noise)
        # after RX the Z and Y components are damped by q_Z and q_Y respectively
        assert abs(expectation(rho, Observable.single("Z")) - qz * math.cos(x)) < 1e-14
        assert abs(expectation(rho, Observable.single("Y")) + noise.q[1] * math.sin(x)) < 1e-14


def test_density_matrix_invariants(rng):
    noise = PauliNoiseSpec.uniform(0.05)
    pc = random_circuit(3, 5, rng, kinds=("RX", "RZZ"))
    DensityMatrix(run_noisy_exact(bind_parameters(pc, rng.uniform(-3, 3, 5)), noise).matrix).check()
    with pytest.raises(SimulationError):
        DensityMatrix(np.eye(2, dtype=complex)).check()


def test_channel_eigenvalues():
    noise = PauliNoiseSpec(p_x=0.07, p_y=0.02, p_z=0.05)
    for lab, q in zip("XYZ", noise.q):
        m = pauli_string_matrix(lab) / 2 + np.eye(2) / 2
        out = apply_pauli_channel(DensityMatrix(m.astype(complex)), noise, 0).matrix
        assert np.max(np.abs(out - (np.eye(2) / 2 + q * pauli_string_matrix(lab) / 2))) < 1e-12


def test_trajectory_zero_noise_equals_pure(rng):
    pc = random_circuit(3, 4, rng)
    c = bind_parameters(pc, rng.uniform(-3, 3, 4))
    for seed in range(3):
        assert np.allclose(run_noisy_trajectory(c, NOISELESS, seed).amplitudes, run_pure(c).amplitudes, atol=1e-14)


def test_trajectory_degenerate_flip():
    c = _circ(1, GateOp("RZ", (0,), angle=0.4), init="plus")
    s = run_noisy_trajectory(c, PauliNoiseSpec(p_x=1.0), 0)
    ideal = run_pure(c).amplitudes
    assert np.allclose(s.amplitudes, pauli_string_matrix("X") @ ideal)


def test_trajectory_benchmark_unbiased(rng):
    noise = PauliNoiseSpec.uniform(0.02)
    c = bind_parameters(build_fold_benchmark(), [0.9])
    obs = Observable.single("ZI")
    ref = expectation(run_noisy_exact(c, noise), obs)
    psi = run_trajectories(c, noise, rng, repeats=100_000)
    from qsurrogate.simulator import observable_expectations

    vals = observable_expectations(psi, obs)
    se = max(vals.std(ddof=1) / math.sqrt(vals.size), 1e-12)
    assert abs(vals.mean() - ref) < 5 * se


def test_trajectory_unbiased_random_circuits(rng):
    noise = PauliNoiseSpec(p_x=0.03, p_y=0.02, p_z=0.04, p_c=0.05)
    from qsurrogate.simulator import observable_expectations

    for _ in range(4):
        n = int(rng.integers(2, 5))
        pc = random_circuit(n, 3, rng, kinds=("RX", "RY", "RZZ"))
        c = bind_parameters(pc, rng.uniform(-3, 3, 3))
        obs = Observable.single("Z" + "X" + "I" * (n - 2), 0.7) + Observable.single("I" * (n - 1) + "Y")
        ref = expectation(run_noisy_exact(c, noise), obs)
        vals = observable_expectations(run_trajectories(c, noise, rng, repeats=100_000), obs)
        se = max(vals.std(ddof=1) / math.sqrt(vals.size), 1e-12)
        assert abs(vals.mean() - ref) < 5 * se


def test_norm_preserved_over_many_gates(rng):
    gates = []
    for _ in range(2500):
        gates += [
            GateOp("RX", (int(rng.integers(3)),), angle=float(rng.uniform(-3, 3))),
            GateOp("CNOT", (0, 2)),
            GateOp("RZZ", (1, 2), angle=float(rng.uniform(-3, 3))),
            GateOp("SDG", (1,)),
        ]
    c = _circ(3, *gates)
    psi = run_trajectories(c, PauliNoiseSpec.uniform(0.05), rng, repeats=4)
    assert np.max(np.abs(np.linalg.norm(psi, axis=1) - 1)) < 1e-10


def test_sample_measurement_examples(rng):
    zero = StateVector(np.array([1, 0], complex))
    assert not sample_measurement(zero, "Z", 1000, 0.0, 1).any()
    x = sample_measurement(zero, "X", 40000, 0.0, 2)
    assert abs(x.mean() - 0.5) < 5 * math.sqrt(0.25 / 40000)
    f = sample_measurement(zero, "Z", 40000, 0.1, 3)
    assert abs(f.mean() - 0.1) < 3 * math.sqrt(0.09 / 40000)
    with pytest.raises(ValueError):
        sample_measurement(zero, "Z", 0)


def test_basis_rotation_converges(rng):
    psi = _random_state(rng, 2)
    s = StateVector(psi)
    for bases, pauli in (("XZ", "XI"), ("ZY", "IY"), ("YX", "YX")):
        bits = sample_measurement(s, bases, 50000, 0.0, 4)
        support = [q for q, ch in enumerate(pauli) if ch != "I"]
        sign = 1 - 2 * (bits[:, support].astype(int).sum(axis=1) % 2)
        ref = expectation(s, Observable.single(pauli))
        p1 = (1 - ref) / 2
        assert abs(sign.mean() - ref) < 5 * 2 * math.sqrt(max(p1 * (1 - p1), 1e-12) / 50000) + 1e-12


def test_exact_spectrum_examples():
    assert exact_spectrum(Observable.single("Z")) == pytest.approx((-1, 1), abs=1e-12)
    assert exact_spectrum(tfim_observable(TfimSpec(2, 1.0, 0.0))) == pytest.approx((-1, 1), abs=1e-12)
    H = tfim_observable(TfimSpec(4, -0.1, -0.5))
    ev = np.linalg.eigvalsh(H.dense())
    assert exact_spectrum(H) == pytest.approx((ev[0], ev[-1]), abs=1e-12)
    with pytest.raises(GuardError):
        exact_spectrum(Observable.single("Z" * 13))


def test_density_guard():
    with pytest.raises(GuardError):
        run_noisy_exact(_circ(9), NOISELESS)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        PauliNoiseSpec(p_x=0.6, p_y=0.6)
    with pytest.raises(ValueError):
        PauliNoiseSpec(p_e=-0.1)
    n = PauliNoiseSpec.from_dict({"p": 0.01, "p_e": 0.02})
    assert (n.p_x, n.p_y, n.p_z, n.p_c, n.p_e) == (0.01, 0.01, 0.01, 0.01, 0.02)
    assert PauliNoiseSpec.from_dict(n.to_dict()) == n
    with pytest.raises(ValueError):
        PauliNoiseSpec.from_dict({"px": 0.1})
    chan = n.clifford_channel("CNOT")
    assert len(chan) == 15 and abs(sum(p for _, p in chan) - 0.01) < 1e-15


def test_observable_file_format():
    H = tfim_observable(TfimSpec(3, 1.0, 0.5))
    assert Observable.from_list(H.to_list()) == H
    assert H.locality == 2
    assert H.norm_bound == pytest.approx(2 * 1.0 + 3 * 0.5)
