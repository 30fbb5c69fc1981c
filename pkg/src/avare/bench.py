"""Experiment runner: JSON config -> seeded runs -> traces, aggregates, summary.

Config schema (every key optional except where noted; defaults shown)::

    {
      "name": "experiment",
      "dataset": {"synthetic": {"N": 100, "d": 10, "seed": 0, "K": 2, "noise": 0.05}}
                 | {"path": "<file>", "format": "libsvm" | "csv",
                    "max_features": null, "label_column": 0, "normalize": "none"},
      "model": "logistic" | "softmax",
      "mu": 1.0,
      "algorithm": "sgd" | "sgld",
      "samplers": ["avare", "uniform"],          # or "sampler": "<kind>"
      "estimator": "single" | "minibatch_wr" | "minibatch_wor",
      "m": 1,
      "T": null, "epochs": 50,                   # T = ceil(epochs N / m) if T is null
      "epsilon": {"mode": "minibatch" | "single" | "constant_step",
                  "C": null, "delta": null, "p_min": null},
      "step": {"mode": "experiment" | "constant" | "power_decay",
               "L": "max" | "mean" | <float>, "alpha": null, "E": 1.0, "F": 1.0, "beta": 1.0},
      "seeds": [0, 1, ..., 9],
      "metrics": "full" | "cheap",
      "h_init": 0.0,
      "output_dir": null
    }

Resolved defaults: ``C = N`` (``1/(1/N - p_min)`` with ``p_min = 1/(5N)`` in
constant-step mode); ``delta`` equals the step-size decay exponent for SGD and
half of it for SGLD (1 for constant steps); constant ``alpha = m/(2 N L)``.
Relative dataset paths resolve against the config file's directory.

Data passes are ``t m / N``. Output files contain no timings, so identical
configs and seeds give byte-identical files.
"""
from __future__ import annotations

import argparse
import concurrent.futures as cf
import copy
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data_io
from .drivers import DivergenceError, RunConfig, list_samplers, run
from .metrics import table1_ratios
from .problems import FiniteSumProblem, make_synthetic
from .schedules import EpsilonSchedule, StepSchedule

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultFiles",
    "validate_config",
    "load_config",
    "build_problem",
    "run_experiment",
    "print_table1",
    "main",
    "OUTPUT_ROOT_ENV",
]

OUTPUT_ROOT_ENV = "AVARE_OUTPUT_ROOT"
AGG_COLUMNS = ("cost", "opt_cost", "cum_regret", "subopt", "rel_err", "dx_norm")

DEFAULTS = {
    "name": "experiment",
    "dataset": {"synthetic": {"N": 100, "d": 10, "seed": 0, "K": 2, "noise": 0.05}},
    "model": "logistic",
    "mu": 1.0,
    "algorithm": "sgd",
    "samplers": ["avare", "uniform"],
    "estimator": "single",
    "m": 1,
    "T": None,
    "epochs": 50,
    "epsilon": {"mode": "minibatch", "C": None, "delta": None, "p_min": None},
    "step": {"mode": "experiment", "L": "max", "alpha": None, "E": 1.0, "F": 1.0, "beta": 1.0},
    "seeds": list(range(10)),
    "metrics": "full",
    "h_init": 0.0,
    "output_dir": None,
}


class ConfigError(ValueError):
    """Invalid experiment config; ``errors`` lists ``field: message`` strings."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass
class ExperimentConfig:
    """A validated config: ``raw`` holds the normalized JSON document."""

    raw: dict
    base_dir: str = "."

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def digest(self):
        blob = {k: v for k, v in self.raw.items() if k != "output_dir"}
        text = json.dumps(blob, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class ResultFiles:
    out_dir: str
    summary: str
    traces: dict = field(default_factory=dict)  # (sampler, seed) -> path
    aggregates: dict = field(default_factory=dict)  # sampler -> path
    failures: list = field(default_factory=list)  # (sampler, seed, message)
    summary_doc: dict = field(default_factory=dict)


# -- validation -----------------------------------------------------------


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _merge(defaults, given, prefix, errors):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if k not in defaults:
            errors.append(f"{prefix}{k}: unknown field")
        else:
            out[k] = v
    return out


def validate_config(doc, base_dir=".") -> ExperimentConfig:
    """Check a config document and fill defaults; raise :class:`ConfigError`."""
    errors = []
    if not isinstance(doc, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    doc = dict(doc)
    if "sampler" in doc:
        if "samplers" in doc:
            errors.append("sampler: give either 'sampler' or 'samplers', not both")
        doc["samplers"] = [doc.pop("sampler")]
    cfg = _merge({k: v for k, v in DEFAULTS.items() if k not in ("epsilon", "step", "dataset")}
                 | {"epsilon": {}, "step": {}, "dataset": {}}, doc, "", errors)
    cfg["epsilon"] = _merge(DEFAULTS["epsilon"], _obj(doc.get("epsilon", {}), "epsilon", errors), "epsilon.", errors)
    cfg["step"] = _merge(DEFAULTS["step"], _obj(doc.get("step", {}), "step", errors), "step.", errors)
    cfg["dataset"] = _dataset(doc.get("dataset", DEFAULTS["dataset"]), errors)
    if "T" in doc and doc["T"] is not None and "epochs" not in doc:
        cfg["epochs"] = None

    if not isinstance(cfg["name"], str) or not cfg["name"]:
        errors.append("name: expected a non-empty string")
    if cfg["model"] not in ("logistic", "softmax"):
        errors.append(f"model: expected 'logistic' or 'softmax', got {cfg['model']!r}")
    if not _is_num(cfg["mu"]) or cfg["mu"] <= 0:
        errors.append("mu: expected a positive number")
    if cfg["algorithm"] not in ("sgd", "sgld"):
        errors.append(f"algorithm: expected 'sgd' or 'sgld', got {cfg['algorithm']!r}")
    smp = cfg["samplers"]
    if not isinstance(smp, list) or not smp:
        errors.append("samplers: expected a non-empty list")
    else:
        for s in smp:
            if s not in list_samplers():
                errors.append(f"samplers: unknown sampler {s!r} (known: {', '.join(list_samplers())})")
        if len(set(map(str, smp))) != len(smp):
            errors.append("samplers: duplicate entries")
    if cfg["estimator"] not in ("single", "minibatch_wr", "minibatch_wor"):
        errors.append(f"estimator: unknown estimator {cfg['estimator']!r}")
    if not _is_int(cfg["m"]) or cfg["m"] < 1:
        errors.append("m: expected an integer >= 1")
    elif cfg["estimator"] == "single" and cfg["m"] != 1:
        errors.append("m: the single estimator needs m = 1")
    T, ep = cfg["T"], cfg["epochs"]
    if (T is None) == (ep is None):
        errors.append("T: give exactly one of 'T' and 'epochs'")
    elif T is not None and (not _is_int(T) or T < 1):
        errors.append("T: expected an integer >= 1")
    elif ep is not None and (not _is_num(ep) or ep <= 0):
        errors.append("epochs: expected a positive number")
    seeds = cfg["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(_is_int(s) and s >= 0 for s in seeds):
        errors.append("seeds: expected a non-empty list of non-negative integers")
    elif len(set(seeds)) != len(seeds):
        errors.append("seeds: duplicate entries")
    if cfg["metrics"] not in ("full", "cheap"):
        errors.append("metrics: expected 'full' or 'cheap'")
    elif cfg["metrics"] == "cheap" and isinstance(smp, list) and "oracle" in smp:
        errors.append("metrics: the oracle sampler needs 'full'")
    if not _is_num(cfg["h_init"]) or cfg["h_init"] < 0:
        errors.append("h_init: expected a non-negative number")
    if cfg["output_dir"] is not None and not isinstance(cfg["output_dir"], str):
        errors.append("output_dir: expected a string or null")

    e = cfg["epsilon"]
    if e["mode"] not in ("single", "minibatch", "constant_step"):
        errors.append(f"epsilon.mode: unknown mode {e['mode']!r}")
    for k in ("C", "delta", "p_min"):
        if e[k] is not None and not _is_num(e[k]):
            errors.append(f"epsilon.{k}: expected a number or null")
    if _is_num(e["delta"]) and not 0 < e["delta"] <= 1:
        errors.append("epsilon.delta: must lie in (0, 1]")
    if e["p_min"] is not None and e["mode"] != "constant_step":
        errors.append("epsilon.p_min: only used in constant_step mode")

    s = cfg["step"]
    if s["mode"] not in ("experiment", "constant", "power_decay"):
        errors.append(f"step.mode: unknown mode {s['mode']!r}")
    if not (s["L"] in ("max", "mean") or (_is_num(s["L"]) and s["L"] > 0)):
        errors.append("step.L: expected 'max', 'mean' or a positive number")
    if s["alpha"] is not None and (not _is_num(s["alpha"]) or s["alpha"] <= 0):
        errors.append("step.alpha: expected a positive number or null")
    for k in ("E", "F", "beta"):
        if not _is_num(s[k]) or s[k] <= 0:
            errors.append(f"step.{k}: expected a positive number")
    if _is_num(s["beta"]) and s["beta"] > 1:
        errors.append("step.beta: must lie in (0, 1]")
    if _is_num(s["F"]) and s["F"] < 1:
        errors.append("step.F: must be >= 1")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(cfg, str(base_dir))


def _obj(v, name, errors):
    if not isinstance(v, dict):
        errors.append(f"{name}: expected an object")
        return {}
    return v


def _dataset(v, errors):
    if not isinstance(v, dict):
        errors.append("dataset: expected an object")
        return {}
    if "synthetic" in v:
        if len(v) != 1:
            errors.append("dataset: 'synthetic' excludes other keys")
        syn = _merge(DEFAULTS["dataset"]["synthetic"], _obj(v["synthetic"], "dataset.synthetic", errors),
                     "dataset.synthetic.", errors)
        for k in ("N", "d", "seed", "K"):
            lo = 2 if k == "K" else (0 if k == "seed" else 1)
            if not _is_int(syn[k]) or syn[k] < lo:
                errors.append(f"dataset.synthetic.{k}: expected an integer >= {lo}")
        if not _is_num(syn["noise"]) or not 0 <= syn["noise"] <= 1:
            errors.append("dataset.synthetic.noise: expected a number in [0, 1]")
        return {"synthetic": syn}
    base = {"path": None, "format": "libsvm", "max_features": None, "label_column": 0, "normalize": "none"}
    ds = _merge(base, v, "dataset.", errors)
    if not isinstance(ds["path"], str) or not ds["path"]:
        errors.append("dataset.path: required (or give 'synthetic')")
    if ds["format"] not in ("libsvm", "csv"):
        errors.append("dataset.format: expected 'libsvm' or 'csv'")
    if ds["max_features"] is not None and (not _is_int(ds["max_features"]) or ds["max_features"] < 1):
        errors.append("dataset.max_features: expected a positive integer or null")
    if not _is_int(ds["label_column"]):
        errors.append("dataset.label_column: expected an integer")
    if ds["normalize"] not in ("none", "standardize", "unit_norm"):
        errors.append("dataset.normalize: expected 'none', 'standardize' or 'unit_norm'")
    return ds


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<file>: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return validate_config(doc, base_dir=path.parent)


# -- construction ---------------------------------------------------------


def build_problem(config: ExperimentConfig) -> FiniteSumProblem:
    ds = config["dataset"]
    if "synthetic" in ds:
        s = ds["synthetic"]
        data = make_synthetic(s["N"], s["d"], seed=s["seed"], K=s["K"], noise=s["noise"])
    else:
        path = Path(ds["path"])
        if not path.is_absolute():
            path = Path(config.base_dir) / path
        text = path.read_text()
        if ds["format"] == "libsvm":
            data = data_io.parse_libsvm(text, max_features=ds["max_features"])
        else:
            data = data_io.parse_csv(text, label_column=ds["label_column"])
        if ds["normalize"] != "none":
            data = type(data)(data_io.normalize_features(data.features, ds["normalize"]), data.labels, data.K)
    model = config["model"]
    if model == "logistic" and data.K != 2:
        raise ConfigError([f"model: logistic needs 2 classes, dataset has {data.K}"])
    return FiniteSumProblem(data, model, config["mu"])


def horizon(config, N):
    if config["T"] is not None:
        return config["T"]
    return math.ceil(config["epochs"] * N / config["m"])


def build_schedules(config, problem):
    """``(EpsilonSchedule, StepSchedule)`` with resolved defaults."""
    N, m = problem.N, config["m"]
    s = config["step"]
    Ls = problem.smoothness_constants()
    L = {"max": float(Ls.max()), "mean": float(Ls.mean())}.get(s["L"], s["L"])
    if s["mode"] == "experiment":
        step = StepSchedule.experiment(m, N, L, problem.mu)
    elif s["mode"] == "constant":
        step = StepSchedule.constant(s["alpha"] if s["alpha"] is not None else m / (2.0 * N * L))
    else:
        step = StepSchedule.power_decay(s["E"], s["F"], s["beta"])

    e = config["epsilon"]
    delta = e["delta"]
    if delta is None:
        beta = step.decay_exponent or 1.0
        delta = beta / 2 if config["algorithm"] == "sgld" else beta
    if e["mode"] == "constant_step":
        p_min = e["p_min"] if e["p_min"] is not None else 1.0 / (5 * N)
        C = e["C"] if e["C"] is not None else 1.0 / (1.0 / N - p_min)
        eps = EpsilonSchedule(N, C, delta, m, "constant_step", p_min)
    else:
        C = e["C"] if e["C"] is not None else float(N)
        eps = EpsilonSchedule(N, C, delta, m, e["mode"])
    return eps, step


# -- running --------------------------------------------------------------


def _run_one(problem, rc):
    """Worker entry point; never raises on divergence."""
    try:
        rec = run(problem, rc)
    except DivergenceError as exc:
        return rc.sampler, rc.seed, None, str(exc)
    return rc.sampler, rc.seed, rec.columns(), None


def _resolve_out_dir(config, out_dir):
    if out_dir is not None:
        return Path(out_dir)
    if config["output_dir"] is not None:
        return Path(config["output_dir"])
    root = os.environ.get(OUTPUT_ROOT_ENV, "avare-results")
    return Path(root) / f"{config['name']}-{config.digest[:8]}"


def _nanstats(stack):
    with np.errstate(all="ignore"):
        if stack.shape[0] == 0 or np.all(np.isnan(stack)):
            nan = np.full(stack.shape[1:], np.nan)
            return nan, nan
        mean = stack.mean(axis=0)
        std = stack.std(axis=0)
    return mean, std


def run_experiment(config, out_dir=None, seeds=None, parallel=1, problem=None) -> ResultFiles:
    """Run every (sampler, seed) pair and write traces, aggregates and summary.

    A run that diverges is recorded in the summary and skipped in the
    aggregates; the other runs are unaffected.
    """
    if not isinstance(config, ExperimentConfig):
        config = validate_config(config)
    if seeds is not None:
        raw = copy.deepcopy(config.raw)
        raw["seeds"] = list(seeds)
        config = validate_config(raw, config.base_dir)
    problem = build_problem(config) if problem is None else problem
    N = problem.N
    T = horizon(config, N)
    eps, step = build_schedules(config, problem)
    full = config["metrics"] == "full"
    x_star = problem.solve_minimizer(1e-10)
    f_star = problem.full_loss(x_star)
    smooth_ratio, var_ratio = table1_ratios(problem, x_star)

    jobs = [
        RunConfig(
            sampler=s, estimator=config["estimator"], m=config["m"], T=T,
            epsilon=eps, step=step, seed=seed, metrics=config["metrics"],
            algorithm=config["algorithm"], h_init=config["h_init"],
            f_star=f_star if full else None,
        )
        for s in config["samplers"]
        for seed in config["seeds"]
    ]
    for rc in jobs:
        rc.validate(N)

    if parallel > 1 and len(jobs) > 1:
        with cf.ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_one, [problem] * len(jobs), jobs))
    else:
        results = [_run_one(problem, rc) for rc in jobs]

    out = _resolve_out_dir(config, out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    files = ResultFiles(out_dir=str(out), summary=str(out / "summary.json"))
    per_sampler = {s: [] for s in config["samplers"]}
    seed_rows = {s: [] for s in config["samplers"]}
    for s, seed, cols, err in results:
        if err is not None:
            files.failures.append((s, seed, err))
            seed_rows[s].append({"seed": seed, "status": "diverged", "error": err})
            continue
        path = out / "traces" / f"{s}_seed{seed}.csv"
        data_io.write_trace_csv(path, cols)
        files.traces[(s, seed)] = str(path)
        per_sampler[s].append(cols)
        seed_rows[s].append({
            "seed": seed, "status": "ok",
            "final_cum_regret": cols["cum_regret"][-1],
            "final_subopt": cols["subopt"][-1],
            "final_rel_err": cols["rel_err"][-1],
        })

    t = np.arange(1, T + 1)
    passes = t * config["m"] / N
    sampler_summary = {}
    for s, runs in per_sampler.items():
        agg = {"t": t, "data_passes": passes, "n_seeds": np.full(T, len(runs))}
        names = ["t", "data_passes", "n_seeds"]
        finals = {}
        for c in AGG_COLUMNS:
            stack = np.array([r[c] for r in runs]).reshape(len(runs), T)
            mean, std = _nanstats(stack)
            agg[f"{c}_mean"], agg[f"{c}_std"] = mean, std
            names += [f"{c}_mean", f"{c}_std"]
            finals[c] = {"mean": mean[-1], "std": std[-1]}
        path = out / f"aggregate_{s}.csv"
        data_io.write_trace_csv(path, agg, names)
        files.aggregates[s] = str(path)
        sampler_summary[s] = {"seeds": seed_rows[s], "n_ok": len(runs), "final": finals}

    summary = {
        "config": config.raw,
        "config_digest": config.digest,
        "problem": {
            "N": N, "d": problem.d, "D": problem.D, "K": problem.K,
            "model": problem.kind, "mu": problem.mu, "T": T,
            "f_star": f_star,
            "L_max": float(problem.smoothness_constants().max()),
            "ratios": {"smoothness": smooth_ratio, "variance": var_ratio},
        },
        "schedules": {
            "epsilon": {k: getattr(eps, k) for k in ("N", "C", "delta", "m", "mode", "p_min")},
            "step": {k: getattr(step, k) for k in ("mode", "E", "F", "beta", "m", "N", "L", "mu", "alpha")},
        },
        "samplers": sampler_summary,
        "failures": [{"sampler": s, "seed": seed, "error": e} for s, seed, e in files.failures],
    }
    data_io.write_summary_json(files.summary, summary)
    files.summary_doc = data_io.read_summary_json(files.summary)
    return files


# -- reporting ------------------------------------------------------------


def print_table1(problem, x_star=None, file=None):
    smooth, var = table1_ratios(problem, x_star)
    file = file or sys.stdout
    print(f"{'N':>8} {'d':>6} {'N max L / sum L':>16} {'N sum g^2 / (sum g)^2':>22}", file=file)
    print(f"{problem.N:>8} {problem.d:>6} {smooth:>16.4f} {var:>22.4f}", file=file)
    return smooth, var


def print_summary(doc, file=None):
    file = file or sys.stdout
    pr = doc["problem"]
    print(f"N={pr['N']} d={pr['d']} model={pr['model']} mu={pr['mu']} T={pr['T']} "
          f"f*={pr['f_star']:.10g}", file=file)
    print(f"Table 1 ratios: smoothness {pr['ratios']['smoothness']:.4f}, "
          f"variance {pr['ratios']['variance']:.4f}", file=file)
    print(f"{'sampler':<10} {'ok':>4} {'cum regret (mean ± std)':>28} {'subopt (mean ± std)':>28}", file=file)

    def pm(d):
        if d["mean"] is None:
            return "n/a"
        return f"{d['mean']:.4g} ± {d['std']:.2g}"

    for s, info in doc["samplers"].items():
        n = len(info["seeds"])
        f = info["final"]
        print(f"{s:<10} {info['n_ok']:>2}/{n:<1} {pm(f['cum_regret']):>28} {pm(f['subopt']):>28}", file=file)
    for fail in doc["failures"]:
        print(f"warning: {fail['sampler']} seed {fail['seed']}: {fail['error']}", file=file)


# -- CLI ------------------------------------------------------------------


def _parse_seeds(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def _parser():
    p = argparse.ArgumentParser(prog="avare", description="Adaptive importance sampling experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment and write result files")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None,
                   help=f"output directory (default: config output_dir, else ${OUTPUT_ROOT_ENV}/<name>-<digest>)")
    r.add_argument("--seeds", type=_parse_seeds, default=None, help="comma-separated seeds overriding the config")
    r.add_argument("--parallel", type=int, default=1, help="worker processes")
    q = sub.add_parser("ratios", help="print the smoothness and variance ratios of the dataset")
    q.add_argument("--config", required=True)
    v = sub.add_parser("validate", help="check a config file")
    v.add_argument("--config", required=True)
    sub.add_parser("samplers", help="list sampler kinds")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "samplers":
            print("\n".join(list_samplers()))
            return 0
        config = load_config(args.config)
        if args.command == "validate":
            print(f"ok: config digest {config.digest}")
            return 0
        if args.command == "ratios":
            print_table1(build_problem(config))
            return 0
        if args.parallel < 1:
            raise ConfigError(["--parallel: must be >= 1"])
        files = run_experiment(config, out_dir=args.out, seeds=args.seeds, parallel=args.parallel)
        print_summary(files.summary_doc)
        print(f"results written to {files.out_dir}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
