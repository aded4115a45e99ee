import math

import numpy as np
import pytest

from qsurrogate.backends import DensityBackend
from qsurrogate.circuits import build_vqe_ansatz, random_circuit
from qsurrogate.features import extract_coefficients, kernel, kernel_matrix
from qsurrogate.simulator import NOISELESS, Observable, PauliNoiseSpec
from qsurrogate.surrogate_cs import (
    TrainingDatasetCS,
    empirical_risk,
    fit_cs,
    generate_dataset_cs,
    predict_cs,
    predict_cs_gradient,
)
from qsurrogate.shadows import estimate_observable, ShadowSet


def _dataset(rng, n=30, T=20, N=3, L=1, noise=NOISELESS):
    c = build_vqe_ansatz(N, L)
    return c, generate_dataset_cs(c, noise, n, T, rng)


def test_dataset_shapes(rng):
    c, ds = _dataset(rng)
    assert ds.n == 30 and ds.T == 20 and ds.d == c.num_slots and ds.num_qubits == 3
    assert ds.in_theorem_regime()
    assert ds.head(5).n == 5
    with pytest.raises(ValueError):
        TrainingDatasetCS(np.zeros((0, 2)), np.zeros((0, 1, 1), np.uint8), np.zeros((0, 1, 1), np.uint8))


def test_cache_matches_recomputation(rng):
    c, ds = _dataset(rng)
    m = fit_cs(ds, 2)
    H = Observable.single("ZZI", 0.5) + Observable.single("IIX")
    g = m.labels(H)
    assert m.labels(H) is g
    for i in range(ds.n):
        assert g[i] == estimate_observable(ShadowSet(ds.bases[i], ds.outcomes[i]), H)


def test_single_example_closed_form(rng):
    c, ds = _dataset(rng, n=1)
    m = fit_cs(ds, 1)
    obs = Observable.single("ZII")
    g = m.labels(obs)[0]
    x = rng.uniform(-3, 3, c.num_slots)
    assert predict_cs(m, x, obs) == pytest.approx(kernel(x, ds.X[0], 1) * g, abs=1e-12)
    if c.num_slots == 1:
        assert predict_cs_gradient(m, x, obs)[0] == pytest.approx(-2 * math.sin(x[0] - ds.X[0, 0]) * g)


def test_lambda_zero_is_constant(rng):
    c, ds = _dataset(rng)
    m = fit_cs(ds, 0)
    obs = Observable.single("IZI")
    X = rng.uniform(-3, 3, size=(5, c.num_slots))
    assert np.allclose(m.predict(X, obs), m.labels(obs).mean(), atol=1e-14)
    assert np.all(predict_cs_gradient(m, X[0], obs) == 0)


def test_identical_points_exact_labels():
    x = np.array([0.3, -0.2, 1.0])
    ds = TrainingDatasetCS(
        np.tile(x, (4, 1)),
        np.full((4, 1, 1), 2, np.uint8),  # Z basis
        np.zeros((4, 1, 1), np.uint8),
    )
    m = fit_cs(ds, 0)
    assert predict_cs(m, x, Observable.single("Z")) == 3.0


def test_gradient_matches_finite_differences(rng):
    c = build_vqe_ansatz(4, 1)
    ds = generate_dataset_cs(c, NOISELESS, 40, 5, rng)
    m = fit_cs(ds, 2)
    H = Observable.single("ZZII") + Observable.single("IXII", 0.4)
    x = rng.uniform(-3, 3, c.num_slots)
    h = 1e-5
    fd = [(predict_cs(m, x + h * e, H) - predict_cs(m, x - h * e, H)) / (2 * h) for e in np.eye(c.num_slots)]
    assert np.max(np.abs(predict_cs_gradient(m, x, H) - fd)) < 1e-6


def test_linearity_in_observable(rng):
    c, ds = _dataset(rng)
    m = fit_cs(ds, 2)
    o1, o2 = Observable.single("ZII"), Observable.single("IXX")
    X = rng.uniform(-3, 3, size=(4, c.num_slots))
    combo = o1.scaled(2.0) + o2.scaled(-0.5)
    assert np.allclose(m.predict(X, combo), 2.0 * m.predict(X, o1) - 0.5 * m.predict(X, o2), atol=1e-13)


def test_dimension_checks(rng):
    c, ds = _dataset(rng)
    m = fit_cs(ds, 1)
    with pytest.raises(ValueError):
        m.predict(np.zeros((1, c.num_slots + 1)), Observable.single("ZII"))
    with pytest.raises(ValueError):
        fit_cs(ds, c.num_slots + 1)


def test_empirical_risk_examples(rng):
    c, ds = _dataset(rng)
    m = fit_cs(ds, 1)
    obs = Observable.single("ZII")
    X = rng.uniform(-3, 3, size=(6, c.num_slots))
    pred = m.predict(X, obs)
    assert empirical_risk(m, X, pred, obs) == 0
    assert empirical_risk(m, X, pred + 0.3, obs) == pytest.approx(0.09)
    with pytest.raises(ValueError):
        empirical_risk(m, X[:0], pred[:0], obs)


def test_unbiased_toward_truncated_model():
    rng = np.random.default_rng(7)
    noise = PauliNoiseSpec.uniform(0.02)
    c = random_circuit(2, 2, rng, kinds=("RX", "RY"))
    obs = Observable.single("ZX")
    lam = 1
    X = rng.uniform(-np.pi, np.pi, size=(8, 2))
    xq = rng.uniform(-np.pi, np.pi, 2)
    exact = DensityBackend(noise).expectations(c, X, obs)
    target = float(np.mean(kernel_matrix(xq[None, :], X, lam)[0] * exact))
    preds = []
    for r in range(300):
        from qsurrogate.shadows import collect_shadow_rows

        b, o = collect_shadow_rows(c, noise, 20, rng, X)
        preds.append(fit_cs(TrainingDatasetCS(X, b, o), lam).predict(xq[None, :], obs)[0])
    preds = np.array(preds)
    se = preds.std(ddof=1) / math.sqrt(preds.size)
    assert abs(preds.mean() - target) < 5 * se


def test_expectation_over_datasets_matches_truncated_expansion():
    # E over x^(i) ~ Unif and shadows of h_cs(x') equals the Lambda-truncated expansion at x'
    rng = np.random.default_rng(3)
    noise = PauliNoiseSpec.uniform(0.02)
    c = random_circuit(2, 2, rng, kinds=("RX", "RZ", "RY"))
    obs = Observable.single("ZI")
    be = DensityBackend(noise)
    table = extract_coefficients(lambda X: be.expectations(c, X, obs), 2)
    xq = np.array([0.4, -1.1])
    target = float(table.evaluate(xq[None, :], lam=1)[0])
    preds = []
    for r in range(200):
        ds = generate_dataset_cs(c, noise, 50, 10, rng)
        preds.append(fit_cs(ds, 1).predict(xq[None, :], obs)[0])
    preds = np.array(preds)
    assert abs(preds.mean() - target) < 5 * preds.std(ddof=1) / math.sqrt(preds.size)
