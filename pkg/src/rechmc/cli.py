"""Command-line experiment runner.

Usage::

    rechmc [--seed N] [--output-dir DIR] [--threads N] run CONFIG
    rechmc ... tv-sweep CONFIG
    rechmc ... validate CONFIG

``CONFIG`` is a TOML file. Top-level keys are flat; the tables ``[model]``,
``[solver]``, ``[tv_sweep]`` and ``[validate]`` and the array ``[[ladder]]``
add one nesting level. ``benchmark`` selects a preset (``ellipses``, ``sir``,
``tetrahedron``) whose defaults the file overrides, or ``custom`` with a
``factory = "module:callable"`` (or ``"path/to/file.py:callable"``) that
returns ``(model, potential, labeler)``. Unknown keys are errors.

Exit status: 0 success, 1 failed validation, 2 configuration error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import importlib
import importlib.util
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .diagnostics import (admissible_states, ess, exchange_check, loglog_slope,
                          occupancy_from_labels, rattle_drift, split_rhat, tv_error_1d)
from .errors import ConfigError, ExchangeNotAdmissible, RechmcError
from .exchange import MODES
from .geometry import SolverConfig, fd_hessian_error, fd_jacobian_error, relative_error
from .replica import LadderLevel, ReplicaConfig, run

THREADS_ENV = "RECHMC_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
EMIT_FLAGS = ("traces", "summary", "tv_sweep")


# ---------------------------------------------------------------------------
# presets

def _ladder(epsilons, step_sizes, n_steps, step_range):
    return [{"epsilon": e, "step_size": h, "n_steps": n_steps, "step_range": step_range}
            for e, h in zip(epsilons, step_sizes)]


PRESETS = {
    "ellipses": {
        "n_iterations": 100_000,
        "exchange_period": 10,
        "cold_step_size": 0.3,
        "cold_n_steps": 10,
        "cold_step_range": 1.5,
        "ladder": _ladder([0.3 * 3 ** i for i in range(11)], [0.1] * 11, 10, 1000.0),
        "n_components": 4,
        "model": {"v_max": 1.0},
        "validate": {"drift_step_size": 0.05},
    },
    "tetrahedron": {
        "n_iterations": 100_000,
        "exchange_period": 10,
        "cold_step_size": 0.5,
        "cold_n_steps": 10,
        "cold_step_range": 1.0,
        "ladder": _ladder([0.05, 0.15, 0.3, 0.6], [0.04, 0.07, 0.1, 0.14], 10, 1.5),
        "n_components": 2,
        "model": {"chiral_strength": 3.0 * math.sqrt(6.0) / 8.0, "v_max": 1.0},
        "validate": {"drift_step_size": 0.05},
    },
    "sir": {
        "n_iterations": 200_000,
        "exchange_period": 5,
        "cold_step_size": 0.3,
        "cold_n_steps": 10,
        "cold_step_range": 3.0,
        "ladder": _ladder([0.05, 0.15, 0.4, 1.0, 2.5, 6.0],
                          [0.02, 0.03, 0.05, 0.08, 0.12, 0.2], 10, 10.0),
        "n_components": 2,
        "model": {"v_max": 20.0, "delta": 1e-8, "form": "polynomial", "db_ref": 3e-8},
        # the branch fold has a curvature radius near 0.006 in scaled units
        "validate": {"drift_step_size": 0.001},
    },
}

BASE = {
    "benchmark": None,
    "factory": None,
    "seed": 0,
    "output_dir": "rechmc_out",
    "threads": None,
    "discard_fraction": 0.1,
    "emit": list(EMIT_FLAGS),
    "n_iterations": 10_000,
    "exchange_period": 10,
    "jacobian_mode": "exact",
    "cold_init": None,
    "cold_step_size": 0.1,
    "cold_n_steps": 10,
    "cold_step_range": 1.0,
    "hot_thin": 1,
    "n_components": None,
    "ladder": [],
    "model": {},
    "solver": {},
    "tv_sweep": {"epsilons": [round(0.1 * i, 10) for i in range(1, 11)],
                 "n_iterations": 50_000, "bins": 50},
    "validate": {"n_states": 20, "n_warmup": 2000, "n_points": 5, "drift_steps": 1000,
                 "drift_step_size": 0.01},
}

LADDER_KEYS = {"epsilon", "step_size", "n_steps", "step_range", "state"}
MODEL_KEYS = {
    "ellipses": {"v_max"},
    "tetrahedron": {"chiral_strength", "v_max"},
    "sir": {"v_max", "delta", "form", "db_ref"},
}


# ---------------------------------------------------------------------------
# config resolution

def _load_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def _check_keys(section: str, got: dict, allowed) -> None:
    unknown = sorted(set(got) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _num(cfg: dict, key: str, kind=float, lo=None, hi=None, lo_open=False, hi_open=False,
         where: str = ""):
    val = cfg[key]
    name = f"{where}{key}"
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{name} must be a number, got {val!r}")
    if kind is int:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError(f"{name} must be an integer, got {val!r}")
        val = int(val)
    else:
        val = float(val)
        if not math.isfinite(val):
            raise ConfigError(f"{name} must be finite")
    if lo is not None and (val < lo or (lo_open and val == lo)):
        raise ConfigError(f"{name} must be {'>' if lo_open else '>='} {lo}, got {val}")
    if hi is not None and (val > hi or (hi_open and val == hi)):
        raise ConfigError(f"{name} must be {'<' if hi_open else '<='} {hi}, got {val}")
    cfg[key] = val
    return val


def _vector(val, name: str, dim=None) -> list:
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    if arr.ndim != 1 or (dim is not None and arr.shape[0] != dim) or not np.all(np.isfinite(arr)):
        want = f" of length {dim}" if dim is not None else ""
        raise ConfigError(f"{name} must be a finite list of numbers{want}")
    return [float(v) for v in arr]


def resolve_config(raw: dict, overrides: dict | None = None) -> dict:
    """Merge a parsed config over its preset and validate every field."""
    overrides = overrides or {}
    _check_keys("config", raw, BASE)
    bench = raw.get("benchmark")
    if bench not in (*PRESETS, "custom"):
        raise ConfigError(f"benchmark must be one of {sorted(PRESETS) + ['custom']}, got {bench!r}")
    cfg = copy.deepcopy(BASE)
    preset = copy.deepcopy(PRESETS.get(bench, {}))
    for key, val in preset.items():
        if isinstance(val, dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    for key, val in raw.items():
        if key in ("model", "solver", "tv_sweep", "validate"):
            if not isinstance(val, dict):
                raise ConfigError(f"[{key}] must be a table")
            cfg[key].update(val)
        else:
            cfg[key] = val
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val

    if bench == "custom":
        if not isinstance(cfg["factory"], str) or ":" not in cfg["factory"]:
            raise ConfigError("custom benchmark needs factory = 'module:callable'")
        if cfg["cold_init"] is None or not cfg["ladder"]:
            raise ConfigError("custom benchmark needs cold_init and at least one [[ladder]] entry")
    elif cfg["factory"] is not None:
        raise ConfigError("factory is only allowed with benchmark = 'custom'")
    else:
        _check_keys("[model]", cfg["model"], MODEL_KEYS[bench])

    _num(cfg, "seed", int, lo=0)
    if cfg["threads"] is not None:
        _num(cfg, "threads", int, lo=1)
    _num(cfg, "discard_fraction", float, lo=0.0, hi=1.0, hi_open=True)
    _num(cfg, "n_iterations", int, lo=1)
    _num(cfg, "exchange_period", int, lo=0)
    _num(cfg, "cold_step_size", float, lo=0.0, lo_open=True)
    _num(cfg, "cold_n_steps", int, lo=1)
    _num(cfg, "cold_step_range", float, lo=1.0)
    _num(cfg, "hot_thin", int, lo=1)
    if cfg["n_components"] is not None:
        _num(cfg, "n_components", int, lo=1)
    if cfg["jacobian_mode"] not in MODES:
        raise ConfigError(f"jacobian_mode must be one of {MODES}")
    if not isinstance(cfg["output_dir"], str) or not cfg["output_dir"]:
        raise ConfigError("output_dir must be a non-empty string")
    emit = cfg["emit"]
    if not isinstance(emit, list) or any(e not in EMIT_FLAGS for e in emit):
        raise ConfigError(f"emit must be a list drawn from {EMIT_FLAGS}")
    if cfg["cold_init"] is not None:
        cfg["cold_init"] = _vector(cfg["cold_init"], "cold_init")

    if not isinstance(cfg["ladder"], list) or not cfg["ladder"]:
        raise ConfigError("ladder must hold at least one [[ladder]] entry")
    ladder = []
    for i, lv in enumerate(cfg["ladder"]):
        if not isinstance(lv, dict):
            raise ConfigError("ladder entries must be tables")
        _check_keys(f"ladder[{i}]", lv, LADDER_KEYS)
        lv = {"step_range": 1.0, "state": None, **lv}
        for key in ("epsilon", "step_size", "n_steps"):
            if key not in lv:
                raise ConfigError(f"ladder[{i}] is missing {key}")
        where = f"ladder[{i}]."
        _num(lv, "epsilon", float, lo=0.0, lo_open=True, where=where)
        _num(lv, "step_size", float, lo=0.0, lo_open=True, where=where)
        _num(lv, "n_steps", int, lo=1, where=where)
        _num(lv, "step_range", float, lo=1.0, where=where)
        if lv["state"] is not None:
            lv["state"] = _vector(lv["state"], f"{where}state")
        ladder.append(lv)
    eps = [lv["epsilon"] for lv in ladder]
    if any(b <= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("ladder epsilons must be strictly increasing")
    cfg["ladder"] = ladder

    _check_keys("[solver]", cfg["solver"], SolverConfig.__dataclass_fields__)
    for key, field in SolverConfig.__dataclass_fields__.items():
        if key in cfg["solver"]:
            kind = int if field.type in ("int", int) else float
            _num(cfg["solver"], key, kind, lo=0.0, lo_open=True, where="solver.")

    tv = cfg["tv_sweep"]
    _check_keys("[tv_sweep]", tv, BASE["tv_sweep"])
    tv["epsilons"] = _vector(tv["epsilons"], "tv_sweep.epsilons")
    if not tv["epsilons"] or min(tv["epsilons"]) <= 0:
        raise ConfigError("tv_sweep.epsilons must be a non-empty list of positive numbers")
    _num(tv, "n_iterations", int, lo=10, where="tv_sweep.")
    _num(tv, "bins", int, lo=1, where="tv_sweep.")

    val = cfg["validate"]
    _check_keys("[validate]", val, BASE["validate"])
    for key in ("n_states", "n_warmup", "n_points", "drift_steps"):
        _num(val, key, int, lo=1, where="validate.")
    _num(val, "drift_step_size", float, lo=0.0, lo_open=True, where="validate.")
    return cfg


def resolve_threads(flag, cfg_value) -> int:
    """Thread count: flag, then config file, then environment, then 1."""
    if flag is not None:
        return int(flag)
    if cfg_value is not None:
        return int(cfg_value)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return n
    return 1


def _load_factory(spec: str, base_dir: Path):
    mod_name, _, attr = spec.rpartition(":")
    try:
        if mod_name.endswith(".py"):
            path = Path(mod_name)
            if not path.is_absolute():
                path = base_dir / path
            mod_spec = importlib.util.spec_from_file_location(path.stem, path)
            if mod_spec is None or mod_spec.loader is None:
                raise ConfigError(f"cannot load factory module {path}")
            module = importlib.util.module_from_spec(mod_spec)
            mod_spec.loader.exec_module(module)
        else:
            module = importlib.import_module(mod_name)
        return getattr(module, attr)
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - any import problem is a config problem
        raise ConfigError(f"cannot load factory {spec!r}: {exc}") from exc


def build_benchmark(cfg: dict, base_dir: Path = Path(".")):
    """``(model, potential, labeler, default_cold_init)`` for a resolved config."""
    from .models import (EllipseSuiteParams, SirParams, TetrahedronParams,
                         build_ellipse_suite, build_sir, build_tetrahedron)
    from .models import sir as sir_mod
    from .models.ellipses import ellipse_point
    from .models.tetrahedron import REFERENCE

    bench = cfg["benchmark"]
    params = dict(cfg["model"])
    try:
        if bench == "ellipses":
            p = EllipseSuiteParams(**params)
            b = build_ellipse_suite(p)
            return b.model, b.potential, b.labeler, ellipse_point(p, 0, 0.0)
        if bench == "tetrahedron":
            b = build_tetrahedron(TetrahedronParams(**params))
            return b.model, b.potential, b.labeler, np.array(REFERENCE, dtype=float)
        if bench == "sir":
            b = build_sir(SirParams(**params))
            return b.model, b.potential, b.labeler, sir_mod.to_z(sir_mod.THETA_STAR)
        factory = _load_factory(cfg["factory"], base_dir)
        out = factory(**params)
        model, potential, labeler = out[0], out[1], out[2]
    except ConfigError:
        raise
    except (RechmcError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot build {bench} model: {exc}") from exc
    return model, potential, labeler, None


def replica_config(cfg: dict, model, default_init, record_hot: bool = True,
                   n_iterations=None, eps_scale: float = 1.0,
                   jacobian_mode=None) -> ReplicaConfig:
    init = np.asarray(cfg["cold_init"] if cfg["cold_init"] is not None else default_init,
                      dtype=float)
    if init.shape != (model.ambient_dim,):
        raise ConfigError(f"cold_init must have length {model.ambient_dim}")
    ladder = []
    for lv in cfg["ladder"]:
        state = init if lv["state"] is None else np.asarray(lv["state"], dtype=float)
        if state.shape != (model.ambient_dim,):
            raise ConfigError(f"ladder state must have length {model.ambient_dim}")
        ladder.append(LadderLevel(lv["epsilon"] * eps_scale, lv["step_size"], lv["n_steps"],
                                  state, lv["step_range"]))
    try:
        return ReplicaConfig(
            n_iterations=cfg["n_iterations"] if n_iterations is None else n_iterations,
            exchange_period=cfg["exchange_period"],
            ladder=tuple(ladder),
            cold_init=init,
            cold_step_size=cfg["cold_step_size"],
            cold_n_steps=cfg["cold_n_steps"],
            master_seed=cfg["seed"],
            jacobian_mode=jacobian_mode or cfg["jacobian_mode"],
            cold_step_range=cfg["cold_step_range"],
            hot_thin=cfg["hot_thin"],
            record_hot=record_hot,
            solver=SolverConfig(**cfg["solver"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _check_output_dir(path: Path) -> None:
    probe = path
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise ConfigError(f"output_dir {path} is not writable")


# ---------------------------------------------------------------------------
# output helpers

def write_csv(path: Path, header, rows) -> None:
    """CSV with 17 significant digits; integer columns stay integers."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer)) else "%.17g" % v for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def labels_of(samples, labeler) -> np.ndarray:
    if labeler is None:
        return np.zeros(len(samples), dtype=np.int64)
    return np.array([int(labeler(np.asarray(s))) for s in samples], dtype=np.int64)


def summarize(cold, labels, n_components, discard_fraction) -> dict:
    """ESS, split R-hat and occupancy of the retained part of a cold trace."""
    start = int(discard_fraction * cold.shape[0])
    kept = cold[start:]
    lab = labels[start:]
    out = {"n_used": int(kept.shape[0]), "n_discarded": start}
    occ = occupancy_from_labels(lab, n_components)
    out["occupancy"] = occ
    if occ.shape[0] == 2 and occ[1] > 0:
        out["occupancy_ratio"] = occ[0] / occ[1]
    ess_d, rhat_d = {}, {}
    if kept.shape[0] >= 10:
        half = kept.shape[0] // 2
        for j in range(kept.shape[1]):
            ess_d[f"q{j}"] = ess(kept[:, j])
            rhat_d[f"q{j}"] = split_rhat([kept[:half, j], kept[half:2 * half, j]])
        for k in range(occ.shape[0]):
            ess_d[f"label_{k}"] = ess((lab == k).astype(float))
    out["ess"] = ess_d
    out["rhat"] = rhat_d
    finite = [v for v in rhat_d.values() if math.isfinite(v)]
    out["rhat_max"] = max(finite) if finite else None
    return out


# ---------------------------------------------------------------------------
# commands

def _prepare(args):
    """Load, resolve and validate; nothing is written before this returns."""
    path = Path(args.config)
    raw = _load_toml(path)
    cfg = resolve_config(raw, {"seed": args.seed, "output_dir": args.output_dir,
                               "threads": args.threads})
    cfg["threads"] = resolve_threads(args.threads, cfg["threads"])
    model, potential, labeler, init = build_benchmark(cfg, path.parent)
    rcfg = replica_config(cfg, model, init)
    if cfg["cold_init"] is None:
        cfg["cold_init"] = [float(v) for v in rcfg.cold_init]
    if model.violation(rcfg.cold_init) > rcfg.solver.tol:
        raise ConfigError("cold_init does not lie on the manifold")
    if not math.isfinite(float(potential.value(rcfg.cold_init))):
        raise ConfigError("cold_init has infinite potential")
    out_dir = Path(cfg["output_dir"])
    _check_output_dir(out_dir)
    return cfg, model, potential, labeler, rcfg, out_dir


def cmd_run(args) -> int:
    cfg, model, potential, labeler, rcfg, out_dir = _prepare(args)
    emit = set(cfg["emit"])
    rcfg = replica_config(cfg, model, rcfg.cold_init, record_hot="traces" in emit)
    t0 = time.perf_counter()
    trace = run(model, potential, rcfg)
    runtime = time.perf_counter() - t0
    labels = labels_of(trace.cold_samples, labeler)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = model.ambient_dim
    if "traces" in emit:
        write_csv(out_dir / "cold_trace.csv",
                  ["iteration"] + [f"q{j}" for j in range(n)] + ["label"],
                  ([k, *row, int(lab)] for k, (row, lab) in enumerate(zip(trace.cold_samples,
                                                                          labels))))
        for i, hot in enumerate(trace.hot_samples):
            write_csv(out_dir / f"hot_trace_{i}.csv",
                      ["iteration"] + [f"x{j}" for j in range(n)],
                      ([k * rcfg.hot_thin, *row] for k, row in enumerate(hot)))
    if "summary" in emit:
        summary = summarize(trace.cold_samples, labels, cfg["n_components"],
                            cfg["discard_fraction"])
        summary.update({
            "benchmark": cfg["benchmark"],
            "seed": cfg["seed"],
            "version": __version__,
            "runtime_seconds": runtime,
            "n_iterations": trace.n_iterations,
            "accept_rates": trace.accept_rates(),
            "exchange_attempts": trace.exchange_attempts,
            "config": cfg,
        })
        if cfg["benchmark"] in PRESETS:
            from .models import reference_quantities
            summary["reference"] = reference_quantities(cfg["benchmark"])
        write_json(out_dir / "summary.json", summary)
    print(f"run finished in {runtime:.1f} s; outputs in {out_dir}")
    return EXIT_OK


def _tv_task(task):
    cfg, eps, mode, base_dir = task
    from .models import reference as ref
    model, potential, _, init = build_benchmark(cfg, Path(base_dir))
    tv = cfg["tv_sweep"]
    scale = eps / cfg["ladder"][0]["epsilon"]
    rcfg = replica_config(cfg, model, init, record_hot=False, n_iterations=tv["n_iterations"],
                          eps_scale=scale, jacobian_mode=mode)
    trace = run(model, potential, rcfg)
    kept = trace.cold_samples[int(cfg["discard_fraction"] * trace.cold_samples.shape[0]):]
    from .models import EllipseSuiteParams
    p = EllipseSuiteParams(**cfg["model"])
    return tv_error_1d(kept[:, 0], ref.ellipse_q1_cdf(p), ref.ellipse_support(p), tv["bins"])


def tv_sweep_rows(cfg: dict, threads: int = 1, base_dir: Path = Path(".")):
    """``[(epsilon, tv_gram, tv_exact), ...]`` for the configured grid.

    Each run rescales the whole ladder so that its coldest level sits at the
    swept epsilon; every run uses the configured seed.
    """
    tasks = [(cfg, eps, mode, str(base_dir)) for eps in cfg["tv_sweep"]["epsilons"]
             for mode in ("gram", "exact")]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            tvs = list(pool.map(_tv_task, tasks))
    else:
        tvs = [_tv_task(t) for t in tasks]
    return [(eps, tvs[2 * i], tvs[2 * i + 1])
            for i, eps in enumerate(cfg["tv_sweep"]["epsilons"])]


def tv_sweep_stats(rows) -> dict:
    """Log-log slope of the gram column and the Spearman test of the exact column."""
    from scipy.stats import spearmanr

    eps = np.array([r[0] for r in rows])
    gram = np.array([r[1] for r in rows])
    exact = np.array([r[2] for r in rows])
    out = {"gram_slope": None, "exact_spearman_rho": None, "exact_spearman_p": None}
    if len(rows) >= 2 and np.all(gram > 0):
        out["gram_slope"] = loglog_slope(eps, gram)
    if len(rows) >= 3:
        res = spearmanr(eps, exact)
        out["exact_spearman_rho"] = float(res[0])
        out["exact_spearman_p"] = float(res[1])
    return out


def cmd_tv_sweep(args) -> int:
    cfg, _, _, _, _, out_dir = _prepare(args)
    if cfg["benchmark"] != "ellipses":
        raise ConfigError("tv-sweep needs benchmark = 'ellipses'")
    t0 = time.perf_counter()
    rows = tv_sweep_rows(cfg, cfg["threads"], Path(args.config).parent)
    stats = tv_sweep_stats(rows)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "tv_sweep.csv", ["epsilon", "tv_gram", "tv_exact"], rows)
    if "tv_sweep" in cfg["emit"]:
        write_json(out_dir / "tv_sweep.json", {
            **stats, "rows": rows, "seed": cfg["seed"],
            "runtime_seconds": time.perf_counter() - t0, "config": cfg})
    slope = stats["gram_slope"]
    print("gram slope: " + ("n/a" if slope is None else f"{slope:.4f}"))
    return EXIT_OK


def _fd_gradient_error(potential, x, step=1e-6) -> float:
    x = np.asarray(x, dtype=float)
    fd = np.empty_like(x)
    for k in range(x.shape[0]):
        h = step * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        fd[k] = (float(potential.value(x + e)) - float(potential.value(x - e))) / (2 * h)
    exact = np.asarray(potential.gradient(x), dtype=float)
    if np.max(np.abs(exact)) < 1e-12 and np.max(np.abs(fd)) < 1e-8:
        return 0.0
    return relative_error(fd, exact)


def validation_report(cfg, model, potential, rcfg) -> list:
    """Run the invariant battery; returns ``[{check, tolerance, value, passed}]``."""
    val = cfg["validate"]
    rng = np.random.default_rng(cfg["seed"])
    short = dataclasses.replace(rcfg, n_iterations=val["n_warmup"], record_hot=True)
    trace = run(model, potential, short)
    half = trace.cold_samples.shape[0] // 2
    cold = trace.cold_samples[half:]
    hot = trace.hot_samples[0][half:]
    idx = rng.choice(cold.shape[0], size=min(val["n_points"], cold.shape[0]), replace=False)
    pts = [cold[i] for i in idx] + [hot[i] for i in idx]
    solver = rcfg.solver
    report = []

    def add(name, tol, value):
        report.append({"check": name, "tolerance": tol, "value": float(value),
                       "passed": bool(math.isfinite(value) and value <= tol)})

    add("constraint_jacobian_fd", 1e-5, max(fd_jacobian_error(model, x) for x in pts))
    add("constraint_hessian_fd", 1e-4, max(fd_hessian_error(model, x) for x in pts))
    add("potential_gradient_fd", 1e-5, max(_fd_gradient_error(potential, x) for x in cold[idx]))
    states = admissible_states(model, cold, hot, val["n_states"], rng, solver)
    add("admissible_state_shortfall", 0, val["n_states"] - len(states))
    checks = []
    for z in states:
        try:
            checks.append(exchange_check(model, z, solver))
        except ExchangeNotAdmissible:
            checks.append(None)
    ok = [c for c in checks if c is not None]
    add("exchange_image_not_admissible", 0, len(checks) - len(ok))
    if ok:
        add("jacobian_vs_fd_oracle", 1e-5, max(c.jacobian_error for c in ok))
        add("jacobian_reciprocity", 1e-10, max(c.reciprocity for c in ok))
        add("exchange_involution", 1e-8, max(c.involution for c in ok))
    try:
        drift = rattle_drift(model, potential, cold[-1], val["drift_step_size"],
                             val["drift_steps"], rng, solver)
    except RechmcError:
        drift = math.inf
    add("rattle_constraint_drift", 1e-9, drift)
    return report


def cmd_validate(args) -> int:
    cfg, model, potential, _, rcfg, out_dir = _prepare(args)
    report = validation_report(cfg, model, potential, rcfg)
    width = max(len(r["check"]) for r in report)
    for r in report:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status}  {r['check']:<{width}}  value={r['value']:.3e}  "
              f"tolerance={r['tolerance']:.1e}")
    out_dir.mkdir(parents=True, exist_ok=True)
    passed = all(r["passed"] for r in report)
    write_json(out_dir / "validate.json", {"passed": passed, "checks": report,
                                           "seed": cfg["seed"], "config": cfg})
    return EXIT_OK if passed else EXIT_INVALID


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master seed (overrides the config)")
    common.add_argument("--output-dir", default=argparse.SUPPRESS,
                        help="output directory (overrides the config)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="parallel workers for tv-sweep runs; falls back to the config, "
                             f"then ${THREADS_ENV}, then 1")
    parser = argparse.ArgumentParser(prog="rechmc", parents=[common],
                                     description="Replica-exchange constrained HMC experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run a sampler and write traces and a summary"),
                           ("tv-sweep", "total-variation error against epsilon, both "
                                        "Jacobian modes"),
                           ("validate", "run the invariant battery on the configured model")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("config", help="TOML config file")
    return parser


COMMANDS = {"run": cmd_run, "tv-sweep": cmd_tv_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for key in ("seed", "output_dir", "threads"):
        if not hasattr(args, key):
            setattr(args, key, None)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any runtime failure with exit 3
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
