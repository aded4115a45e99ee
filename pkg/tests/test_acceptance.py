"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``ACCEPTANCE <key>: PASS|FAIL | detail`` line and the
summary section repeats them at the end of the run.
"""

import math

import numpy as np
import pytest

from qsurrogate.backends import DensityBackend, PureBackend, ShotBackend
from qsurrogate.circuits import (
    GateOp,
    ParamCircuit,
    bind_parameters,
    build_fspt_circuit,
    build_vqe_ansatz,
    random_circuit,
)
from qsurrogate.features import cardinality, enumerate_frequency_set, extract_coefficients, feature_matrix, kernel
from qsurrogate.fspt import (
    FsptScanConfig,
    magnetizations,
    sample_delta,
    sample_disorder,
    subharmonic_peak,
    train_surrogate_bank,
    variance_scan,
)
from qsurrogate.gradients import finite_difference, parameter_shift
from qsurrogate.harness import fold_bench
from qsurrogate.shadows import collect_shadows, pauli_snapshot_values
from qsurrogate.simulator import NOISELESS, Observable, PauliNoiseSpec, exact_spectrum, expectation, run_noisy_exact
from qsurrogate.surrogate_cs import generate_dataset_cs, fit_cs
from qsurrogate.surrogate_qs import TrainingDatasetQS, budget_mask, fit_qs, solve_ridge, worst_case_tail
from qsurrogate.vqe import (
    OptimizerConfig,
    TfimSpec,
    finetune,
    normalized_deviation,
    parameter_shift_gradient,
    pretrain,
    shot_ledger,
    tfim_observable,
)

pytestmark = pytest.mark.slow

TFIM4 = TfimSpec(4, -0.1, -0.5)
DESK_NOISE = PauliNoiseSpec.uniform(0.005)


def _random_pauli(rng, n, max_weight=None):
    while True:
        p = "".join(rng.choice(list("IXYZ"), size=n))
        w = sum(ch != "I" for ch in p)
        if w and (max_weight is None or w <= max_weight):
            return p


def _brute_kernel(x, xp, lam):
    fs = enumerate_frequency_set(len(x), lam)
    w = 2.0 ** fs.hamming()
    return float(np.sum(w * feature_matrix(fs.members, x[None, :])[0] * feature_matrix(fs.members, xp[None, :])[0]))


def _fspt_like(N=3, delta=0.1):
    """d = N + 1 testbed with the FSPT gate layout and one occurrence per slot:
    RX(x_i) drive, CRZ(-pi) ladder, RY(x_N) on qubit 1, CRZ(pi) ladder, fixed drive."""
    g = [GateOp("RX", (i,), slot=i) for i in range(N)]
    g += [GateOp("CRZ", (i + 1, i), angle=-math.pi) for i in range(N - 1)]
    g += [GateOp("RY", (1,), slot=N)]
    g += [GateOp("CRZ", (i + 1, i), angle=math.pi) for i in range(N - 1)]
    g += [GateOp("RX", (i,), angle=math.pi - 2 * delta) for i in range(N)]
    return ParamCircuit(N, tuple(g), N + 1)


# ---------------------------------------------------------------------------


def test_01_expansion_exactness(acceptance):
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(10):
        N, d = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        c = random_circuit(N, d, rng, kinds=("RX", "RY", "RZ", "RZZ"))
        obs = Observable.single(_random_pauli(rng, N))
        be = PureBackend()
        table = extract_coefficients(lambda X: be.expectations(c, X, obs), d)
        X = rng.uniform(-math.pi, math.pi, size=(50, d))
        worst = max(worst, float(np.max(np.abs(table.evaluate(X) - be.expectations(c, X, obs)))))
    ok = worst <= 1e-9
    acceptance.record("1 expansion exactness", ok, f"max |error| = {worst:.2e} (tol 1e-9)")
    assert ok


def test_02_coefficient_contraction(acceptance):
    rng = np.random.default_rng(102)
    worst = -np.inf
    for p in (0.02, 0.05):
        # rotation channel only, as in the contraction statement
        noise = PauliNoiseSpec(p, p, p)
        factor = 1 - 2 * (min(noise.p_x, noise.p_y) + noise.p_z)
        for _ in range(10):
            N, d = int(rng.integers(1, 3)), int(rng.integers(1, 4))
            c = random_circuit(N, d, rng)
            obs = Observable.single(_random_pauli(rng, N))
            clean = extract_coefficients(lambda X: PureBackend().expectations(c, X, obs), d)
            noisy = extract_coefficients(lambda X: DensityBackend(noise).expectations(c, X, obs), d)
            h = (clean.members != 0).sum(axis=1)
            slack = np.abs(noisy.alpha) - factor**h * np.abs(clean.alpha)
            worst = max(worst, float(slack.max()))
    ok = worst <= 1e-9
    acceptance.record("2 coefficient contraction", ok, f"max(|a~| - q^|w| |a|) = {worst:.2e} (tol 1e-9)")
    assert ok


def test_03_truncation_bound(acceptance):
    rng = np.random.default_rng(103)
    noise = PauliNoiseSpec(0.05, 0.05, 0.05)
    M = 4000
    c = _fspt_like()
    d = c.num_slots
    obs = Observable.single("ZZI")
    be = DensityBackend(noise)
    table = extract_coefficients(lambda X: be.expectations(c, X, obs), d)
    X = rng.uniform(-math.pi, math.pi, size=(M, d))
    f = be.expectations(c, X, obs)
    grads = np.array([parameter_shift(c, x, lambda circ, rows: be.expectations(circ, rows, obs)) for x in X[:400]])
    C = float(np.mean(np.sum(grads**2, axis=1)))
    B = obs.norm_bound
    p = min(noise.p_x, noise.p_y)
    parts, ok = [], True
    for lam in (1, 2, 3):
        sq = (table.evaluate(X, lam) - f) ** 2
        risk, se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(M))
        bound = min(C / lam, B * math.exp(-2 * (p + noise.p_z) * lam))
        ok &= risk <= bound + 3 * se
        parts.append(f"L={lam}: {risk:.3e} <= {bound:.3e}+3*{se:.1e}")
    acceptance.record("3 truncation bound", ok, f"d={d}, C={C:.3f}; " + "; ".join(parts))
    assert ok


def test_04_kernel_dp(acceptance):
    rng = np.random.default_rng(104)
    worst = 0.0
    for d in range(1, 9):
        for lam in range(d + 1):
            for _ in range(100):
                x, xp = rng.uniform(-math.pi, math.pi, d), rng.uniform(-math.pi, math.pi, d)
                worst = max(worst, abs(kernel(x, xp, lam) - _brute_kernel(x, xp, lam)))
    ok = worst <= 1e-10
    acceptance.record("4 kernel DP equivalence", ok, f"max |DP - brute| = {worst:.2e} (tol 1e-10)")
    assert ok


def test_05_shadow_unbiasedness(acceptance):
    rng = np.random.default_rng(105)
    noise = PauliNoiseSpec.uniform(0.01, p_e=0.0)
    T = 100_000
    worst_z, count = 0.0, 0
    for i in range(10):
        N = int(rng.integers(2, 6))
        c = bind_parameters(random_circuit(N, 4, rng), rng.uniform(-math.pi, math.pi, 4))
        s = collect_shadows(c, noise, T, int(rng.integers(2**31)))
        rho = run_noisy_exact(c, noise)
        for _ in range(6):
            pstr = _random_pauli(rng, N, max_weight=2)
            v = pauli_snapshot_values(s.bases, s.outcomes, pstr)
            sigma = v.std(ddof=1) / math.sqrt(T)
            exact = expectation(rho, Observable.single(pstr))
            worst_z = max(worst_z, abs(v.mean() - exact) / sigma)
            count += 1
    ok = worst_z <= 5
    acceptance.record("5 shadow unbiasedness", ok, f"{count} Paulis, max deviation {worst_z:.2f} sigma (tol 5)")
    assert ok


def test_06_learning_curve(acceptance):
    c = build_vqe_ansatz(4, 1)
    H = tfim_observable(TFIM4)
    ns = [200, 600, 1000, 1600, 2000]
    risks, r2 = np.zeros((5, len(ns))), []
    for s in range(5):
        rng = np.random.default_rng(600 + s)
        ds = generate_dataset_cs(c, DESK_NOISE, max(ns), 10, rng)
        Xt = rng.uniform(-math.pi, math.pi, size=(200, c.num_slots))
        ref = DensityBackend(DESK_NOISE).expectations(c, Xt, H)
        for j, n in enumerate(ns):
            risks[s, j] = np.mean((fit_cs(ds.head(n), 2).predict(Xt, H) - ref) ** 2)
        r2.append(1 - risks[s, -1] / np.var(ref))
    mean = risks.mean(axis=0)
    dec = bool(np.all(np.diff(mean) < 0))
    ok = dec and float(np.mean(r2)) >= 0.9
    acceptance.record("6 learning curve", ok,
                      f"risk {np.array2string(mean, precision=4)}; final R2 {np.mean(r2):.3f} (>= 0.9)")
    assert ok


def _pretrain_runs(N, seeds, base_seed):
    c = build_vqe_ansatz(N, 1)
    H = tfim_observable(TfimSpec(N, -0.1, -0.5))
    E0, Emax = exact_spectrum(H)
    be = DensityBackend(DESK_NOISE)

    def dev(x):
        return float(normalized_deviation(be.expectations(c, x[None, :], H)[0], E0, Emax))

    init, l2, l1 = [], [], []
    for s in range(seeds):
        rng = np.random.default_rng(base_seed + s)
        ds = generate_dataset_cs(c, DESK_NOISE, 2000, 10, rng)
        x0 = rng.uniform(-math.pi, math.pi, c.num_slots)
        init.append(dev(x0))
        l2.append(dev(pretrain(fit_cs(ds, 2), H, x0, OptimizerConfig(iters=100)).x_best))
        l1.append(dev(pretrain(fit_cs(ds, 1), H, x0, OptimizerConfig(iters=100)).x_best))
    return np.array(init), np.array(l2), np.array(l1)


def test_07_pretraining_separation(acceptance):
    init, l2, l1 = _pretrain_runs(4, 20, 700)
    parts = [0.3 <= init.mean() <= 0.6, l2.mean() < 0.15, l1.mean() > 0.3]
    detail = f"N=4: init {init.mean():.3f} in [0.3,0.6]; L=2 {l2.mean():.3f} < 0.15; L=1 {l1.mean():.3f} > 0.3"
    acceptance.record("7 pretraining separation", all(parts), detail)
    improved = int(np.sum(l2 < init))
    acceptance.record("7b pretraining improves per seed", improved >= 18, f"{improved}/20 seeds (>= 18)")
    assert improved >= 18
    assert all(parts), detail


def test_07_supplementary_six_qubits(acceptance):
    # same protocol at N=6; reported, not a stated criterion
    init, l2, l1 = _pretrain_runs(6, 20, 700)
    ok = 0.3 <= init.mean() <= 0.6 and l2.mean() < 0.15 and l1.mean() > 0.3
    acceptance.record("7s pretraining separation at N=6 (info)", ok,
                      f"init {init.mean():.3f}; L=2 {l2.mean():.3f}; L=1 {l1.mean():.3f}")


def test_08_finetune_non_regression(acceptance):
    c = build_vqe_ansatz(4, 1)
    H = tfim_observable(TFIM4)
    E0, Emax = exact_spectrum(H)
    ok, gains = True, []
    for s in range(5):
        rng = np.random.default_rng(800 + s)
        ds = generate_dataset_cs(c, DESK_NOISE, 2000, 10, rng)
        x0 = rng.uniform(-math.pi, math.pi, c.num_slots)
        x_hat = pretrain(fit_cs(ds, 2), H, x0, OptimizerConfig(iters=100)).x_best
        r = finetune(c, H, x_hat, NOISELESS, OptimizerConfig(iters=20, early_stop=False), 0, s)
        best = np.minimum.accumulate(normalized_deviation(np.array(r.trace), E0, Emax))
        ok &= bool(np.all(np.diff(best) <= 0))
        gain = float(best[0] - best[-1])
        gains.append(gain)
        ok &= gain >= 0
    acceptance.record("8 finetune non-regression", ok, f"improvements {np.round(gains, 4).tolist()}")
    assert ok


def test_09_shot_ledger(acceptance):
    led = shot_ledger(2000, 10, 11, 100, 40000)
    ratio = f"{100 * led.ratio:.3f}%"
    ok = led.dataset_shots == 20_000 and led.baseline_shots == 88_000_000 and ratio == "0.023%"
    acceptance.record("9 shot ledger", ok, f"{led.dataset_shots} vs {led.baseline_shots}, ratio {ratio}")
    assert ok


def _averaged_peaks(N, delta, n_k, S, rng):
    X = np.column_stack([np.full(S, delta), sample_disorder(rng, S, N)])
    tr = magnetizations(N, X, n_k).mean(axis=0)
    return np.array([subharmonic_peak(tr[i])[0] for i in range(N)])


def test_10_fspt_signatures(acceptance):
    rng = np.random.default_rng(110)
    N = 6
    low = _averaged_peaks(N, 0.01, 40, 20, rng)
    high = _averaged_peaks(N, 0.8, 40, 20, rng)
    boundary, bulk = min(low[0], low[-1]), max(low[1:-1])
    ok = boundary >= 3 * bulk and bool(np.all(high < 0.1))
    acceptance.record("10 FSPT signatures", ok,
                      f"delta=0.01 boundary {boundary:.3f} vs bulk {bulk:.3f}; delta=0.8 max peak {high.max():.3f} (< 0.1)")
    assert ok


def test_11_fspt_critical_region(acceptance):
    N, n_k = 4, 8
    rng = np.random.default_rng(111)
    bank, _, _ = train_surrogate_bank(N, n_k, 250, rng, lam=9, reg=1e-3, m_features=None)
    Xh = np.column_stack([sample_delta(rng, 200), sample_disorder(rng, 200, N)])
    mse = float(np.mean((bank.predict(Xh) - magnetizations(N, Xh, n_k)) ** 2))
    cfg = FsptScanConfig(N=N, n_k=n_k, deltas=tuple(np.linspace(0.01, 0.8, 20)), S=200, backend="bank", seed=11)
    rep = variance_scan(cfg, bank)
    exact = variance_scan(FsptScanConfig(N=N, n_k=n_k, deltas=cfg.deltas, S=200, seed=11))
    ok = 0.1 <= rep.delta_star <= 0.35 and mse < 0.01
    acceptance.record("11 FSPT critical region", ok,
                      f"delta* = {rep.delta_star:.3f} in [0.1, 0.35] (exact backend {exact.delta_star:.3f}); "
                      f"held-out MSE {mse:.4f} (< 0.01); N={N}, n_k={n_k}")
    assert ok


def test_12_ridge(acceptance):
    rng = np.random.default_rng(112)
    fs = enumerate_frequency_set(3, 2)
    w = 0.3 * rng.normal(size=len(fs)) / math.sqrt(len(fs))
    X = rng.uniform(-math.pi, math.pi, size=(400, 3))
    m = fit_qs(TrainingDatasetQS(X, feature_matrix(fs.members, X) @ w), fs, 1e-8)
    Xt = rng.uniform(-math.pi, math.pi, size=(100, 3))
    rec = float(np.max(np.abs(m.predict(Xt) - feature_matrix(fs.members, Xt) @ w)))
    Xs = X[:60]
    y = feature_matrix(fs.members, Xs) @ w + 0.05 * rng.normal(size=60)
    Phi = feature_matrix(fs.members, Xs)
    F = feature_matrix(fs.members, Xt)
    pd = float(np.max(np.abs(F @ solve_ridge(Phi, y, 1e-3, "primal") - F @ solve_ridge(Phi, y, 1e-3, "dual"))))
    norms = [float(np.linalg.norm(fit_qs(TrainingDatasetQS(Xs[:40], y[:40]), fs, r).w)) for r in (1e-4, 1e-2, 1.0)]
    ok = rec <= 1e-6 and pd <= 1e-8 and norms[0] >= norms[1] >= norms[2]
    acceptance.record("12 ridge", ok, f"recovery {rec:.1e}; primal/dual {pd:.1e}; norms {np.round(norms, 4).tolist()}")
    assert ok


def test_13_fold_trend(acceptance):
    noise = PauliNoiseSpec.uniform(0.02)
    mono, tables = 0, []
    for s in range(5):
        rows = fold_bench(noise, [1, 4, 8, 16], 50, 1000, 1, np.random.default_rng(1300 + s))
        mse = [m for _, m in rows]
        tables.append(np.round(mse, 5).tolist())
        mono += bool(np.all(np.diff(mse) <= 0))
    ok = mono >= 4
    acceptance.record("13 gate-folding trend", ok, f"non-increasing in {mono}/5 seeds (>= 4); MSE {tables}")
    assert ok


def test_14_parameter_shift(acceptance):
    rng = np.random.default_rng(114)
    worst = 0.0
    for i in range(20):
        if i % 3 == 0:
            c = build_vqe_ansatz(4, 1)
        elif i % 3 == 1:
            c = build_fspt_circuit(4, int(rng.integers(2, 6)))
        else:
            c = random_circuit(3, 4, rng, kinds=("RX", "RY", "RZ", "RZZ", "CRZ"))
        H = Observable.single(_random_pauli(rng, c.num_qubits)) + Observable.single(_random_pauli(rng, c.num_qubits), 0.5)
        x = rng.uniform(-math.pi, math.pi, c.num_slots)
        ps = parameter_shift_gradient(c, x, H)
        fd = finite_difference(lambda rows: PureBackend().expectations(c, rows, H), x)
        worst = max(worst, float(np.max(np.abs(ps - fd))))
    ok = worst < 1e-6
    acceptance.record("14 parameter shift", ok, f"max |PS - FD| = {worst:.2e} (tol 1e-6)")
    assert ok


def test_15_small_range(acceptance):
    d, R = 4, 0.3
    noise = PauliNoiseSpec.uniform(0.05)
    c = _fspt_like()
    # budgets |S(0)| and |S(1)|; mode C keeps the same number of lowest-weight members
    budgets = [cardinality(d, 0, "S"), cardinality(d, 1, "S")]
    ok, parts = True, []
    for o in ("ZII", "IZI", "IIZ", "ZZI", "ZIZ", "IZZ"):
        obs = Observable.single(o)
        table = extract_coefficients(lambda X: DensityBackend(noise).expectations(c, X, obs), d)
        for m in budgets:
            es = worst_case_tail(table, budget_mask(table.members, m, "S"), R, np.random.default_rng(0))
            ec = worst_case_tail(table, budget_mask(table.members, m, "C"), R, np.random.default_rng(0))
            ok &= es <= ec + 1e-12
            parts.append(f"{o}/m={m}: S {es:.1e} vs C {ec:.1e}")
    acceptance.record("15 small-range variant", ok, "; ".join(parts))
    assert ok


def test_16_qubit_count_insensitivity(acceptance):
    devs = {}
    for N in (6, 8, 10):
        c = build_vqe_ansatz(N, 1)
        H = tfim_observable(TfimSpec(N, -0.1, -0.5))
        E0, Emax = exact_spectrum(H)
        d = []
        for s in range(5):
            rng = np.random.default_rng(1600 + s)
            ds = generate_dataset_cs(c, DESK_NOISE, 2000, 10, rng)
            x0 = rng.uniform(-math.pi, math.pi, c.num_slots)
            xb = pretrain(fit_cs(ds, 2), H, x0, OptimizerConfig(iters=100)).x_best
            e = ShotBackend(DESK_NOISE, 1000, rng).expectations(c, xb[None, :], H)[0]
            d.append(float(normalized_deviation(e, E0, Emax)))
        devs[N] = float(np.mean(d))
    spread = max(devs.values()) - min(devs.values())
    ok = spread < 0.05
    acceptance.record("16 qubit-count insensitivity", ok,
                      f"deviation {', '.join(f'N={k}: {v:.3f}' for k, v in devs.items())}; spread {spread:.3f} (< 0.05)")
    assert ok
