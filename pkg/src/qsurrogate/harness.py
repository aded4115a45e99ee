"""Task runners behind the command line.

Each task reads a plain dict config (TOML or JSON), writes its tables and a
JSON summary into the output directory and finishes with ``manifest.json``
listing every file with its sha256. CSV and summary bodies depend only on
(config, seed); the wall-clock timestamp lives in the manifest alone.
"""

from __future__ import annotations

import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from . import __version__
from .backends import DensityBackend, PureBackend, ShotBackend
from .circuits import (
    ConcreteCircuit,
    ParamCircuit,
    build_fold_benchmark,
    build_fspt_circuit,
    build_vqe_ansatz,
    circuit_from_json,
    fold_param_gates,
)
from .errors import ConfigError
from .features import (
    CollapsedFeatureSet,
    FrequencySet,
    extract_coefficients,
    sample_feature_subset,
)
from .fspt import FsptScanConfig, SurrogateBank, train_surrogate_bank, variance_scan
from .io import dumps, load_config, read_csv, sha256_file, write_csv, write_json
from .metrics import compute_metrics
from .shadows import read_shadow_jsonl, write_shadow_jsonl
from .simulator import Observable, PauliNoiseSpec, exact_spectrum
from .surrogate_cs import TrainingDatasetCS, fit_cs, generate_dataset_cs
from .surrogate_qs import SurrogateQS, TrainingDatasetQS, fit_qs
from .vqe import (
    OptimizerConfig,
    TfimSpec,
    finetune,
    normalized_deviation,
    pretrain,
    shot_ledger,
    tfim_observable,
)

TASKS = (
    "gen-data-cs",
    "gen-data-qs",
    "train-cs",
    "train-qs",
    "predict",
    "vqe-pretrain",
    "vqe-finetune",
    "fspt-scan",
    "eval",
    "oracle-coeffs",
    "fold-bench",
)


# ---------------------------------------------------------------------------
# Config helpers
# ---------------------------------------------------------------------------


def _section(cfg: dict, name: str, required: bool = False) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _need(sec: dict, key: str, where: str):
    if key not in sec:
        raise ConfigError(f"missing key '{key}' in [{where}]")
    return sec[key]


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else (base / p)


def _existing(base: Path, p, what: str) -> Path:
    path = _resolve(base, p)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def noise_from(cfg: dict) -> PauliNoiseSpec:
    try:
        return PauliNoiseSpec.from_dict(_section(cfg, "noise"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[noise]: {exc}") from exc


def optimizer_from(cfg: dict) -> OptimizerConfig:
    sec = _section(cfg, "optimizer")
    try:
        return OptimizerConfig(**sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[optimizer]: {exc}") from exc


def tfim_from(cfg: dict) -> TfimSpec:
    sec = _section(cfg, "tfim", required=True)
    try:
        return TfimSpec(int(_need(sec, "N", "tfim")), float(sec.get("J", -0.1)), float(sec.get("h", -0.5)))
    except ValueError as exc:
        raise ConfigError(f"[tfim]: {exc}") from exc


def circuit_from(cfg: dict, base: Path) -> ParamCircuit | ConcreteCircuit:
    sec = _section(cfg, "circuit")
    builder = sec.get("builder")
    if builder is None:
        if "tfim" in cfg:
            builder = "vqe"
        else:
            raise ConfigError("missing [circuit] section (builder = vqe | fspt | fold-bench | file)")
    try:
        if builder == "vqe":
            N = sec.get("N", _section(cfg, "tfim").get("N"))
            L = sec.get("L", _section(cfg, "ansatz").get("L", 1))
            if N is None:
                raise ConfigError("vqe circuit needs N")
            return build_vqe_ansatz(int(N), int(L))
        if builder == "fspt":
            return build_fspt_circuit(int(_need(sec, "N", "circuit")), int(_need(sec, "k", "circuit")))
        if builder == "fold-bench":
            return fold_param_gates(build_fold_benchmark(), int(sec.get("fold", 0)))
        if builder == "file":
            return circuit_from_json(_existing(base, _need(sec, "path", "circuit"), "circuit file").read_text())
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[circuit]: {exc}") from exc
    raise ConfigError(f"unknown circuit builder {builder!r}")


def observable_from(cfg: dict, base: Path, n_qubits: int | None = None) -> Observable:
    sec = cfg.get("observable")
    try:
        if sec is None:
            if "tfim" in cfg:
                return tfim_observable(tfim_from(cfg))
            raise ConfigError("missing observable (inline list, {path = ...}, or a [tfim] section)")
        if isinstance(sec, dict) and "path" in sec:
            import json

            obs = Observable.from_list(json.loads(_existing(base, sec["path"], "observable file").read_text()))
        elif isinstance(sec, dict) and "pauli" in sec:
            obs = Observable.single(sec["pauli"], float(sec.get("coeff", 1.0)))
        else:
            obs = Observable.from_list(sec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"observable: {exc}") from exc
    if n_qubits is not None and obs.num_qubits != n_qubits:
        raise ConfigError(f"observable acts on {obs.num_qubits} qubits, circuit has {n_qubits}")
    return obs


# ---------------------------------------------------------------------------
# Run context
# ---------------------------------------------------------------------------


@dataclass
class RunContext:
    task: str
    cfg: dict
    seed: int
    out: Path
    base: Path
    files: list[str] = field(default_factory=list)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def rng(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, *stream]))

    def write_json(self, name: str, obj):
        write_json(self.path(name), obj)

    def write_csv(self, name: str, header, rows):
        write_csv(self.path(name), header, rows)

    def finish(self, summary: dict):
        summary = {"task": self.task, "seed": self.seed, **summary}
        self.write_json("summary.json", summary)
        manifest = {
            "task": self.task,
            "seed": self.seed,
            "config": self.cfg,
            "created_unix": time.time(),
            "versions": {
                "package": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "files": [{"name": f, "sha256": sha256_file(self.out / f)} for f in sorted(set(self.files))],
        }
        (self.out / "manifest.json").write_text(dumps(manifest) + "\n")
        return summary


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def task_gen_data_cs(ctx: RunContext) -> dict:
    c = circuit_from(ctx.cfg, ctx.base)
    if not isinstance(c, ParamCircuit):
        raise ConfigError("gen-data-cs needs a parametrized circuit")
    sec = _section(ctx.cfg, "surrogate")
    n = int(sec.get("n", 100))
    T = int(sec.get("T", 10))
    noise = noise_from(ctx.cfg)
    ds = generate_dataset_cs(c, noise, n, T, ctx.rng(1))
    header = {**ds.meta, "seed": ctx.seed, "circuit": c.to_dict()}
    write_shadow_jsonl(ctx.path("dataset_cs.jsonl"), header, ds.X, ds.bases, ds.outcomes)
    return {"n": n, "T": T, "d": c.num_slots, "N": c.num_qubits, "dataset": "dataset_cs.jsonl",
            "measurement_shots": n * T}


def _load_cs_dataset(ctx: RunContext) -> tuple[TrainingDatasetCS, dict]:
    sec = _section(ctx.cfg, "data", required=True)
    path = _existing(ctx.base, _need(sec, "path", "data"), "dataset")
    header, X, b, o = read_shadow_jsonl(path)
    return TrainingDatasetCS(X, b, o, header), header


def task_train_cs(ctx: RunContext) -> dict:
    ds, header = _load_cs_dataset(ctx)
    lam = int(_section(ctx.cfg, "surrogate").get("lambda_trunc", 2))
    fit_cs(ds, lam)  # validates Lambda against d
    model = {"kind": "cs", "dataset": str(_resolve(ctx.base, ctx.cfg["data"]["path"]).resolve()), "Lambda": lam}
    ctx.write_json("model_cs.json", model)
    return {"model": "model_cs.json", "Lambda": lam, "n": ds.n, "T": ds.T}


def task_gen_data_qs(ctx: RunContext) -> dict:
    c = circuit_from(ctx.cfg, ctx.base)
    obs = observable_from(ctx.cfg, ctx.base, c.num_qubits)
    sec = _section(ctx.cfg, "surrogate")
    n = int(sec.get("n", 100))
    shots = int(sec.get("shots", 0))
    R = float(sec.get("range", math.pi))
    noise = noise_from(ctx.cfg)
    rng = ctx.rng(1)
    X = rng.uniform(-R, R, size=(n, c.num_slots))
    if shots:
        y = ShotBackend(noise, shots, rng).expectations(c, X, obs)
    else:
        y = DensityBackend(noise).expectations(c, X, obs)
    import json

    with open(ctx.path("dataset_qs.jsonl"), "w") as fh:
        for xi, yi in zip(X, y):
            fh.write(json.dumps({"x": xi.tolist(), "y": float(yi), "shots": shots}) + "\n")
    eps_l = 1 / math.sqrt(shots) * obs.norm_bound if shots else 0.0
    return {"n": n, "shots": shots, "range": R, "label_stderr_bound": eps_l, "dataset": "dataset_qs.jsonl"}


def _read_qs_dataset(path: Path) -> TrainingDatasetQS:
    import json

    rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if not rows:
        raise ConfigError(f"empty dataset {path}")
    return TrainingDatasetQS(np.array([r["x"] for r in rows]), np.array([r["y"] for r in rows]), int(rows[0].get("shots", 0)))


def _freqset_from(sec: dict, d: int):
    mode = sec.get("mode", "C")
    lam = int(sec.get("lambda_trunc", min(2, d)))
    try:
        if mode == "Omega":
            return sample_feature_subset(d, lam, int(_need(sec, "m", "surrogate")), int(sec.get("feature_seed", 0)))
        if mode == "collapsed":
            mult = tuple(_need(sec, "mult", "surrogate"))
            m = sec.get("m")
            return CollapsedFeatureSet(mult, lam, m, int(sec.get("feature_seed", 0)) if m else None)
        return FrequencySet(mode, d, lam)
    except ValueError as exc:
        raise ConfigError(f"[surrogate]: {exc}") from exc


def task_train_qs(ctx: RunContext) -> dict:
    sec = _section(ctx.cfg, "surrogate")
    ds = _read_qs_dataset(_existing(ctx.base, _need(_section(ctx.cfg, "data", True), "path", "data"), "dataset"))
    spec = _freqset_from(sec, ds.X.shape[1])
    reg = float(sec.get("reg", 1.0))
    m = fit_qs(ds, spec, reg, sec.get("angle_a"), sec.get("angle_b"))
    ctx.write_json("model_qs.json", m.to_dict())
    train_mse = float(np.mean((m.predict(ds.X) - ds.y) ** 2))
    return {"model": "model_qs.json", "features": len(spec), "reg": reg, "train_mse": train_mse}


def _load_model(ctx: RunContext):
    sec = _section(ctx.cfg, "model", required=True)
    path = _existing(ctx.base, _need(sec, "path", "model"), "model file")
    import json

    d = json.loads(path.read_text())
    if d.get("kind") == "cs":
        header, X, b, o = read_shadow_jsonl(_existing(ctx.base, d["dataset"], "dataset"))
        return "cs", fit_cs(TrainingDatasetCS(X, b, o, header), int(d["Lambda"]))
    return "qs", SurrogateQS.from_dict(d)


def task_predict(ctx: RunContext) -> dict:
    kind, model = _load_model(ctx)
    sec = _section(ctx.cfg, "points")
    if "path" in sec:
        rows = read_csv(_existing(ctx.base, sec["path"], "points file"))
        X = np.array([[float(r[k]) for k in r if k.startswith("x")] for r in rows])
    else:
        R = float(sec.get("range", math.pi))
        X = ctx.rng(2).uniform(-R, R, size=(int(sec.get("count", 50)), model.d))
    if kind == "cs":
        obs = observable_from(ctx.cfg, ctx.base, model.dataset.num_qubits)
        pred = model.predict(X, obs)
    else:
        pred = model.predict(X)
    ref = None
    if _section(ctx.cfg, "reference").get("backend"):
        c = circuit_from(ctx.cfg, ctx.base)
        obs = observable_from(ctx.cfg, ctx.base, c.num_qubits)
        ref = DensityBackend(noise_from(ctx.cfg)).expectations(c, X, obs)
    header = [f"x{j}" for j in range(X.shape[1])] + ["prediction"] + (["reference"] if ref is not None else [])
    rows = [list(x) + [p] + ([r] if ref is not None else []) for x, p, r in
            zip(X, pred, ref if ref is not None else [None] * len(pred))]
    ctx.write_csv("predictions.csv", header, rows)
    out = {"count": int(X.shape[0]), "predictions": "predictions.csv"}
    if ref is not None:
        out["metrics"] = compute_metrics(ref, pred).to_dict()
    return out


def _vqe_setup(ctx: RunContext):
    spec = tfim_from(ctx.cfg)
    H = tfim_observable(spec)
    L = int(_section(ctx.cfg, "ansatz").get("L", 1))
    c = build_vqe_ansatz(spec.N, L)
    E0, Emax = exact_spectrum(H)
    sur = _section(ctx.cfg, "surrogate")
    n = int(sur.get("n", 2000))
    T = int(sur.get("T", 10))
    lam = int(sur.get("lambda_trunc", 2))
    return spec, H, c, E0, Emax, n, T, lam


def _run_pretrain(ctx: RunContext, seed_index: int):
    spec, H, c, E0, Emax, n, T, lam = _vqe_setup(ctx)
    noise = noise_from(ctx.cfg)
    cfg = optimizer_from(ctx.cfg)
    rng = ctx.rng(10, seed_index)
    ds = generate_dataset_cs(c, noise, n, T, rng)
    model = fit_cs(ds, lam)
    x0 = rng.uniform(-math.pi, math.pi, c.num_slots)
    res = pretrain(model, H, x0, cfg)
    return spec, H, c, E0, Emax, noise, cfg, res, x0


def task_vqe_pretrain(ctx: RunContext) -> dict:
    seeds = int(_section(ctx.cfg, "run").get("repeats", 1))
    rows, summ = [], []
    for s in range(seeds):
        spec, H, c, E0, Emax, noise, cfg, res, x0 = _run_pretrain(ctx, s)
        be = DensityBackend(noise) if spec.N <= 8 else PureBackend()
        true_init = float(be.expectations(c, x0[None, :], H)[0])
        true_best = float(be.expectations(c, res.x_best[None, :], H)[0])
        for it, val in enumerate(res.trace):
            rows.append((s, it, val, float(normalized_deviation(val, E0, Emax))))
        summ.append({
            "repeat": s,
            "iterations": res.iterations,
            "stopped_early": res.stopped_early,
            "initial_deviation": float(normalized_deviation(true_init, E0, Emax)),
            "pretrained_deviation": float(normalized_deviation(true_best, E0, Emax)),
            "x_hat": res.x_best.tolist(),
        })
    ctx.write_csv("trace.csv", ["repeat", "iteration", "objective", "deviation"], rows)
    _, _, c, E0, Emax, n, T, lam = _vqe_setup(ctx)
    ledger = shot_ledger(n, T, c.num_slots, optimizer_from(ctx.cfg).iters,
                         int(_section(ctx.cfg, "finetune").get("shots", 40000)))
    ctx.write_json("shot_ledger.json", ledger.to_dict())
    return {"E0": E0, "Emax": Emax, "runs": summ,
            "mean_pretrained_deviation": float(np.mean([r["pretrained_deviation"] for r in summ])),
            "shot_ledger": ledger.to_dict()}


def task_vqe_finetune(ctx: RunContext) -> dict:
    ft = _section(ctx.cfg, "finetune")
    shots = int(ft.get("shots", 0))
    iters = int(ft.get("iters", 20))
    seeds = int(_section(ctx.cfg, "run").get("repeats", 1))
    rows, summ = [], []
    ft_shots = 0
    for s in range(seeds):
        spec, H, c, E0, Emax, noise, cfg, res, x0 = _run_pretrain(ctx, s)
        fcfg = OptimizerConfig(**{**cfg.to_dict(), "iters": iters, "lr": float(ft.get("lr", cfg.lr))})
        fres = finetune(c, H, res.x_best, noise, fcfg, shots, ctx.rng(20, s))
        ft_shots += fres.shots_used
        be = DensityBackend(noise) if spec.N <= 8 else PureBackend()
        pre = float(normalized_deviation(be.expectations(c, res.x_best[None, :], H)[0], E0, Emax))
        post = float(normalized_deviation(be.expectations(c, fres.x_best[None, :], H)[0], E0, Emax))
        for it, val in enumerate(fres.trace):
            rows.append((s, it, val, float(normalized_deviation(val, E0, Emax))))
        summ.append({"repeat": s, "pretrained_deviation": pre, "finetuned_deviation": post,
                     "improvement": pre - post, "shots_used": fres.shots_used})
    ctx.write_csv("finetune_trace.csv", ["repeat", "iteration", "measured", "deviation"], rows)
    _, _, c, E0, Emax, n, T, lam = _vqe_setup(ctx)
    ledger = shot_ledger(n, T, c.num_slots, optimizer_from(ctx.cfg).iters, max(shots, 1) if shots else 40000)
    led = ledger.to_dict()
    led["finetune_shots"] = ft_shots
    ctx.write_json("shot_ledger.json", led)
    return {"E0": E0, "Emax": Emax, "runs": summ}


def task_fspt_scan(ctx: RunContext) -> dict:
    sec = _section(ctx.cfg, "fspt", required=True)
    grid = sec.get("deltas")
    if grid is None:
        lo, hi, cnt = sec.get("delta_range", [0.01, 0.8, 40])
        grid = np.linspace(lo, hi, int(cnt))
    try:
        cfg = FsptScanConfig(
            N=int(sec.get("N", 6)), n_k=int(sec.get("n_k", 40)), deltas=tuple(grid), S=int(sec.get("S", 20)),
            J_low=float(sec.get("J_low", 0.0)), J_high=float(sec.get("J_high", 2.0)),
            backend=sec.get("backend", "exact"), shots=int(sec.get("shots", 0)),
            fraction=float(sec.get("fraction", 0.9)), qubit=int(sec.get("qubit", 0)), seed=ctx.seed,
        )
    except ValueError as exc:
        raise ConfigError(f"[fspt]: {exc}") from exc
    noise = noise_from(ctx.cfg)
    bank = None
    extra = {}
    if cfg.backend == "bank":
        bs = _section(ctx.cfg, "bank")
        bank, X, Y = train_surrogate_bank(
            cfg.N, cfg.n_k, int(bs.get("n", 250)), ctx.rng(30), lam=int(bs.get("lambda_trunc", 7)),
            reg=float(bs.get("reg", 1.0)), m_features=int(bs.get("m", 1000)) or None, noise=noise, shots=int(bs.get("shots", 0)),
            J_range=(cfg.J_low, cfg.J_high),
        )
        bdir = ctx.out / "bank"
        bdir.mkdir(exist_ok=True)
        for entry in bank.manifest():
            m = bank.models[(entry["qubit"], entry["k"] - 1)]
            write_json(ctx.path("bank/" + entry["file"]), m.to_dict())
        ctx.write_json("bank_manifest.json", bank.manifest())
        extra["bank_models"] = len(bank.models)
    rep = variance_scan(cfg, bank, noise)
    ctx.write_csv("scan_long.csv", ["delta", "s", "peak"],
                  [(float(d), s, float(p)) for d, row in zip(rep.deltas, rep.peaks) for s, p in enumerate(row)])
    ctx.write_csv("scan_variance.csv", ["delta", "variance"], zip(rep.deltas.tolist(), rep.variance.tolist()))
    return {**rep.to_dict(), **extra}


def task_eval(ctx: RunContext) -> dict:
    sec = _section(ctx.cfg, "eval", required=True)
    rows = read_csv(_existing(ctx.base, _need(sec, "path", "eval"), "predictions file"))
    ref_col = sec.get("reference", "reference")
    pred_col = sec.get("prediction", "prediction")
    try:
        y = [float(r[ref_col]) for r in rows]
        p = [float(r[pred_col]) for r in rows]
    except KeyError as exc:
        raise ConfigError(f"column {exc} missing from predictions file") from exc
    rep = compute_metrics(y, p)
    ctx.write_csv("kde.csv", ["grid", "density_reference", "density_prediction"], rep.kde_rows())
    return {"metrics": rep.to_dict()}


def task_oracle_coeffs(ctx: RunContext) -> dict:
    c = circuit_from(ctx.cfg, ctx.base)
    if not isinstance(c, ParamCircuit):
        raise ConfigError("oracle-coeffs needs a parametrized circuit")
    obs = observable_from(ctx.cfg, ctx.base, c.num_qubits)
    be = DensityBackend(noise_from(ctx.cfg))
    table = extract_coefficients(lambda X: be.expectations(c, X, obs), c.num_slots)
    rows = [("".join({1: "+", -1: "-", 0: "0"}[int(v)] for v in w), int((w != 0).sum()), float(a))
            for w, a in zip(table.members, table.alpha)]
    ctx.write_csv("coefficients.csv", ["omega", "hamming", "alpha"], rows)
    return {"d": c.num_slots, "rows": len(rows)}


def fold_bench(
    noise: PauliNoiseSpec,
    p_list,
    n_train: int,
    T: int,
    lam: int,
    rng: np.random.Generator,
    n_test: int = 50,
    ref_shots: int = 0,
) -> list[tuple[int, float]]:
    """h_cs trained on folded benchmark circuits vs backend means; rows (p, MSE)."""
    obs = Observable.single("ZI")
    out = []
    for p in p_list:
        c = fold_param_gates(build_fold_benchmark(), int(p))
        ds = generate_dataset_cs(c, noise, n_train, T, rng)
        model = fit_cs(ds, lam)
        Xt = rng.uniform(-math.pi, math.pi, size=(n_test, 1))
        if ref_shots:
            ref = ShotBackend(noise, ref_shots, rng).expectations(c, Xt, obs)
        else:
            ref = DensityBackend(noise).expectations(c, Xt, obs)
        out.append((int(p), float(np.mean((model.predict(Xt, obs) - ref) ** 2))))
    return out


def task_fold_bench(ctx: RunContext) -> dict:
    sec = _section(ctx.cfg, "fold")
    p_list = [int(v) for v in sec.get("p", [1, 4, 8, 16])]
    rows = fold_bench(
        noise_from(ctx.cfg), p_list, int(sec.get("n", 50)), int(sec.get("T", 1000)),
        int(sec.get("lambda_trunc", 1)), ctx.rng(40), int(sec.get("n_test", 50)), int(sec.get("ref_shots", 0)),
    )
    ctx.write_csv("fold_bench.csv", ["p", "mse"], rows)
    return {"table": [{"p": p, "mse": m} for p, m in rows]}


RUNNERS: dict[str, Callable[[RunContext], dict]] = {
    "gen-data-cs": task_gen_data_cs,
    "gen-data-qs": task_gen_data_qs,
    "train-cs": task_train_cs,
    "train-qs": task_train_qs,
    "predict": task_predict,
    "vqe-pretrain": task_vqe_pretrain,
    "vqe-finetune": task_vqe_finetune,
    "fspt-scan": task_fspt_scan,
    "eval": task_eval,
    "oracle-coeffs": task_oracle_coeffs,
    "fold-bench": task_fold_bench,
}


def run_config(path, task: str | None = None, seed: int | None = None, out: str | None = None) -> dict:
    """Load a config file, execute its task, write artifacts; returns the summary."""
    path = Path(path)
    cfg = load_config(path)
    cfg_task = cfg.get("task")
    if task and cfg_task and task != cfg_task:
        raise ConfigError(f"command-line task {task!r} differs from config task {cfg_task!r}")
    task = task or cfg_task
    if task not in RUNNERS:
        raise ConfigError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
    if seed is None:
        seed = int(cfg.get("seed", 0))
    if out:
        out_dir = Path(out)
    elif cfg.get("out"):
        out_dir = _resolve(path.parent, cfg["out"])
    else:
        out_dir = Path("surrogate_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(task, cfg, int(seed), out_dir, path.parent)
    summary = RUNNERS[task](ctx)
    return ctx.finish(summary)
