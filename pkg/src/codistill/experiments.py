"""Experiment configuration, runner, and sweep machinery.

Configs are flat dotted-key text files (``group.n_workers=4``), chosen over
nested formats for diff-friendliness and unambiguous parsing. Every run
writes three files into its output directory:

  metrics.csv      one metric record per row, fixed column order
  summary.json     final/best losses, steps-to-target, communication report,
                   churn reports where applicable, dataset provenance
  config.resolved  the full configuration including defaults; feeding it back
                   to ``run`` reproduces the same outputs

In lockstep mode identical config + seeds produce byte-identical metrics.csv
(apart from the wall_seconds column, which is recorded but never asserted on)
and byte-identical summary.json.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import gen_classification, ingest_text, make_shards, split_train_val, unigram
from .distrib import (CodistillConfig, CommLedger, DivergenceError, FileCheckpointStore,
                      GroupConfig, GroupRunner, InMemoryCheckpointStore, codistill_train,
                      codistill_train_concurrent, comm_report, offline_distill,
                      train_baseline)
from .losses import CombinedLossSpec, SmoothingKind
from .metrics import (CSV_COLUMNS, MetricRecord, churn_experiment, ensemble_predict,
                      evaluate, probs_nll, steps_to_target)
from .nn import Architecture, Batch, param_count
from .optim import OptimizerConfig

EXPERIMENT_KINDS = ("baseline", "batch_sweep", "codistill", "same_data_ablation",
                    "staleness_sweep", "smoothing_baseline", "ensemble_baseline",
                    "offline_distill", "churn")

MODES = ("lockstep", "concurrent")


class ConfigError(ValueError):
    """Config parse/validation failure; the message names the offending key."""


# key -> (type tag, default). None defaults mean "optional, omitted when unset".
SCHEMA = {
    "kind": ("str", None),
    "seeds": ("int_list", [0, 1, 2, 3, 4]),
    "steps": ("int", 4000),
    "eval_every": ("int", 100),
    "target_loss": ("float", None),
    "data.kind": ("str", "classification"),
    "data.seed": ("int", 7),
    "data.n": ("int", 50000),
    "data.dim": ("int", 32),
    "data.classes": ("int", 10),
    "data.difficulty": ("float", 0.5),
    "data.val_fraction": ("float", 0.1),
    "data.corpus": ("str", None),
    "data.window": ("int", 8),
    "model.hidden": ("int_list", [64, 32]),
    "model.embedding_dim": ("int", 16),
    "group.n_workers": ("int", 1),
    "group.batch": ("int", 32),
    "opt.kind": ("str", "adagrad"),
    "opt.lr": ("float", 0.1),
    "opt.beta1": ("float", 0.9),
    "opt.beta2": ("float", 0.999),
    "opt.eps": ("float", 1e-8),
    "opt.adagrad_eps": ("float", 1e-10),
    "loss.distill": ("str", "soft_cross_entropy"),
    "loss.distill_weight": ("float", 1.0),
    "loss.smoothing": ("str", "uniform"),
    "loss.smoothing_weight": ("float", 0.1),
    "codistill.n_models": ("int", 2),
    "codistill.burn_in": ("int", 400),
    "codistill.reload_interval": ("int", 50),
    "codistill.teacher_mode": ("str", "stale_checkpoint"),
    "codistill.data_mode": ("str", "disjoint"),
    "codistill.float32_payload": ("bool", False),
    "offline.phase1_steps": ("int", 2000),
    "offline.phase2_steps": ("int", 2000),
    "churn.repeats": ("int", 5),
    "sweep.values": ("int_list", None),
}

_ENUMS = {
    "kind": EXPERIMENT_KINDS,
    "data.kind": ("classification", "lm"),
    "opt.kind": ("sgd", "adam", "adagrad"),
    "loss.distill": ("soft_cross_entropy", "logit_mse", "kl_divergence", "none"),
    "loss.smoothing": ("uniform", "unigram"),
    "codistill.teacher_mode": ("stale_checkpoint", "fresh_in_process"),
    "codistill.data_mode": ("disjoint", "shared"),
}


def _parse_value(key: str, raw: str):
    typ = SCHEMA[key][0]
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            if raw not in ("true", "false"):
                raise ValueError
            return raw == "true"
        if typ == "int_list":
            return [int(v) for v in raw.split(",") if v.strip() != ""]
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        cfg[key] = _parse_value(key, raw)
    return cfg


def parse_config_file(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def resolve(cfg: dict) -> dict:
    """Fill defaults and validate; returns the complete key->value mapping."""
    for key in cfg:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
    res = {key: cfg.get(key, default) for key, (_, default) in SCHEMA.items()}
    if res["kind"] is None:
        raise ConfigError("kind: experiment kind is required")
    for key, allowed in _ENUMS.items():
        if res[key] is not None and res[key] not in allowed:
            raise ConfigError(f"{key}: unknown value {res[key]!r} (expected one of {allowed})")
    if not res["seeds"]:
        raise ConfigError("seeds: must be non-empty")
    if any(s < 0 for s in res["seeds"]):
        raise ConfigError("seeds: must be non-negative")
    if res["data.kind"] == "lm" and not res["data.corpus"]:
        raise ConfigError("data.corpus: required for lm datasets")
    if res["sweep.values"] is None:
        if res["kind"] == "batch_sweep":
            res["sweep.values"] = [1, 2, 4, 8]
        elif res["kind"] == "staleness_sweep":
            res["sweep.values"] = [1, 50, 250]
    if res["kind"] in ("batch_sweep", "staleness_sweep") and not res["sweep.values"]:
        raise ConfigError("sweep.values: must be non-empty")
    return res


def format_resolved(res: dict) -> str:
    lines = []
    for key in sorted(res):
        value = res[key]
        if value is None:
            continue
        typ = SCHEMA[key][0]
        if typ == "bool":
            text = "true" if value else "false"
        elif typ == "int_list":
            text = ",".join(str(v) for v in value)
        elif typ == "float":
            text = repr(float(value))
        else:
            text = str(value)
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


@dataclass
class Env:
    """Resolved dataset, architecture, and split shared by one experiment."""

    res: dict
    arch: Architecture
    train: object
    val: Batch
    provenance: dict


def build_env(res: dict) -> Env:
    if res["data.kind"] == "lm":
        ds = ingest_text(res["data.corpus"], res["data.window"])
        arch = Architecture(res["data.window"] * res["model.embedding_dim"],
                            tuple(res["model.hidden"]), ds.n_classes,
                            task="lm_fixed_context", context_window=res["data.window"],
                            vocab_size=ds.n_classes,
                            embedding_dim=res["model.embedding_dim"])
    else:
        ds = gen_classification(res["data.seed"], res["data.n"], res["data.dim"],
                                res["data.classes"], res["data.difficulty"])
        arch = Architecture(res["data.dim"], tuple(res["model.hidden"]), res["data.classes"])
    train, val = split_train_val(ds, res["data.val_fraction"], res["data.seed"])
    return Env(res, arch, train, val.as_batch(), dict(ds.provenance))


def group_seed(seed: int, model_index: int) -> int:
    """Model i of any experiment derives its group seed the same way, so a
    codistilled replica 0 and a baseline with the same seed match exactly."""
    return 1000 * seed + model_index


def _optimizer(res: dict) -> OptimizerConfig:
    return OptimizerConfig(res["opt.kind"], res["opt.lr"], res["opt.beta1"],
                           res["opt.beta2"], res["opt.eps"], res["opt.adagrad_eps"])


def _smoothing_spec(res: dict, train) -> CombinedLossSpec:
    kind = res["loss.smoothing"]
    smoothing = SmoothingKind(kind, unigram(train) if kind == "unigram" else None)
    return CombinedLossSpec(smoothing=smoothing, smoothing_weight=res["loss.smoothing_weight"])


def _group(res: dict, seed: int, model_index: int = 0, *, n_workers=None,
           loss: CombinedLossSpec | None = None) -> GroupConfig:
    return GroupConfig(n_workers if n_workers is not None else res["group.n_workers"],
                       res["group.batch"], _optimizer(res),
                       loss if loss is not None else CombinedLossSpec(),
                       group_seed(seed, model_index))


def _codistill_cfg(res: dict, **overrides) -> CodistillConfig:
    kw = dict(n_models=res["codistill.n_models"], n_burn_in=res["codistill.burn_in"],
              reload_interval=res["codistill.reload_interval"],
              distill=res["loss.distill"], distill_weight=res["loss.distill_weight"],
              teacher_mode=res["codistill.teacher_mode"],
              data_mode=res["codistill.data_mode"],
              float32_payload=res["codistill.float32_payload"])
    kw.update(overrides)
    return CodistillConfig(**kw)


def _run_codistill_once(env: Env, seed: int, run_prefix: str, mode: str, out_dir,
                        shards=None, **cfg_overrides):
    """One codistillation run: shard plan, N groups, shared store and ledger."""
    res = env.res
    cfg = _codistill_cfg(res, **cfg_overrides)
    if shards is None:
        plan = make_shards(env.train, cfg.data_mode, cfg.n_models, seed)
        shards = [plan.shard(env.train, i) for i in range(cfg.n_models)]
    groups = [_group(res, seed, i) for i in range(cfg.n_models)]
    ledger = CommLedger()
    if mode == "concurrent":
        store = FileCheckpointStore(Path(out_dir) / f"ckpt.s{seed}", env.arch, ledger)
        result = codistill_train_concurrent(env.arch, cfg, groups, shards, res["steps"],
                                            store, env.val, res["eval_every"],
                                            ledger=ledger, run_id_prefix=run_prefix)
    else:
        store = InMemoryCheckpointStore(env.arch, ledger)
        result = codistill_train(env.arch, cfg, groups, shards, res["steps"], store,
                                 env.val, res["eval_every"], ledger=ledger,
                                 run_id_prefix=run_prefix)
    report = comm_report(ledger, param_count(env.arch), res["steps"], groups[0], cfg)
    return result, report


def _summarize_runs(records, target_loss):
    """Per-run final/best statistics from the record stream."""
    by_run: dict[str, list[MetricRecord]] = {}
    for r in records:
        by_run.setdefault(r.run_id, []).append(r)
    out = {}
    for run_id, recs in by_run.items():
        recs = sorted(recs, key=lambda r: r.step)
        stats = {
            "final_step": recs[-1].step,
            "final_val_loss": recs[-1].validation_loss,
            "final_val_accuracy": recs[-1].validation_accuracy,
            "best_val_loss": min(r.validation_loss for r in recs),
        }
        if target_loss is not None:
            stats["steps_to_target"] = steps_to_target(recs, target_loss)
        out[run_id] = stats
    return out


def _seed_mean(runs: dict, key: str, match: str = "") -> float:
    vals = [s[key] for rid, s in runs.items() if match in rid]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# experiment kinds


def _kind_baseline(env: Env, mode: str, out_dir):
    res = env.res
    records, comm = [], {}
    for seed in res["seeds"]:
        ledger = CommLedger()
        _, recs = train_baseline(env.arch, _group(res, seed), env.train, res["steps"],
                                 env.val, res["eval_every"], ledger=ledger,
                                 run_id=f"baseline.s{seed}")
        records.extend(recs)
        comm[str(seed)] = comm_report(ledger, param_count(env.arch), res["steps"],
                                      _group(res, seed)).as_dict()
    return records, {"comm": comm}


def _kind_batch_sweep(env: Env, mode: str, out_dir):
    res = env.res
    records = []
    per_value = {}
    for w in res["sweep.values"]:
        for seed in res["seeds"]:
            _, recs = train_baseline(env.arch, _group(res, seed, n_workers=w), env.train,
                                     res["steps"], env.val, res["eval_every"],
                                     run_id=f"W{w}.s{seed}")
            records.extend(recs)
        runs = _summarize_runs([r for r in records if r.run_id.startswith(f"W{w}.")],
                               res["target_loss"])
        entry = {"mean_final_val_loss": _seed_mean(runs, "final_val_loss"),
                 "mean_best_val_loss": _seed_mean(runs, "best_val_loss")}
        if res["target_loss"] is not None:
            reached = [s["steps_to_target"] for s in runs.values()
                       if s["steps_to_target"] is not None]
            entry["mean_steps_to_target"] = float(np.mean(reached)) if reached else None
        per_value[str(w)] = entry
    return records, {"per_value": per_value, "axis": "group.n_workers"}


def _kind_codistill(env: Env, mode: str, out_dir):
    res = env.res
    records, comm = [], {}
    for seed in res["seeds"]:
        result, report = _run_codistill_once(env, seed, f"codistill.s{seed}.m", mode, out_dir)
        records.extend(result.records)
        comm[str(seed)] = report.as_dict()
        comm[str(seed)]["max_teacher_lag"] = result.max_teacher_lag
    return records, {"comm": comm}


def _kind_same_data_ablation(env: Env, mode: str, out_dir):
    """Baseline vs partitioned codistillation vs same-data codistillation.

    The same-data arm trains both groups on one half-sized subset, so each
    group's data volume matches the partitioned arm and stream overlap is the
    only difference between the two codistillation arms (a finite dataset
    would otherwise hand the same-data arm twice the unique data per group).
    """
    res = env.res
    n = res["codistill.n_models"]
    records = []
    for seed in res["seeds"]:
        _, recs = train_baseline(env.arch, _group(res, seed), env.train, res["steps"],
                                 env.val, res["eval_every"],
                                 run_id=f"ablation.s{seed}.baseline")
        records.extend(recs)
        plan = make_shards(env.train, "disjoint", n, seed)
        disjoint_shards = [plan.shard(env.train, i) for i in range(n)]
        result, _ = _run_codistill_once(env, seed, f"ablation.s{seed}.disjoint.m", mode,
                                        out_dir, shards=disjoint_shards, data_mode="disjoint")
        records.extend(result.records)
        subset = disjoint_shards[0]
        shared_plan = make_shards(subset, "shared", n, seed)
        shared_shards = [shared_plan.shard(subset, i) for i in range(n)]
        result, _ = _run_codistill_once(env, seed, f"ablation.s{seed}.shared.m", mode,
                                        out_dir, shards=shared_shards, data_mode="shared")
        records.extend(result.records)
    runs = _summarize_runs(records, res["target_loss"])
    means = {name: _seed_mean(runs, "final_val_loss", match=f".{name}")
             for name in ("baseline", "disjoint", "shared")}
    return records, {"mean_final_val_loss": means,
                     "ordering_holds": bool(means["disjoint"] <= means["shared"] <= means["baseline"])}


def _kind_staleness_sweep(env: Env, mode: str, out_dir):
    res = env.res
    records = []
    per_value = {}
    for interval in res["sweep.values"]:
        burn_in = max(res["codistill.burn_in"], interval)
        for seed in res["seeds"]:
            result, _ = _run_codistill_once(env, seed, f"R{interval}.s{seed}.m", mode,
                                            out_dir, reload_interval=interval,
                                            n_burn_in=burn_in)
            records.extend(result.records)
        runs = _summarize_runs([r for r in records if r.run_id.startswith(f"R{interval}.")],
                               res["target_loss"])
        per_value[str(interval)] = {"mean_final_val_loss": _seed_mean(runs, "final_val_loss"),
                                    "mean_best_val_loss": _seed_mean(runs, "best_val_loss")}
    return records, {"per_value": per_value, "axis": "codistill.reload_interval"}


def _kind_smoothing_baseline(env: Env, mode: str, out_dir):
    res = env.res
    spec = _smoothing_spec(res, env.train)
    records = []
    for seed in res["seeds"]:
        _, recs = train_baseline(env.arch, _group(res, seed, loss=spec), env.train,
                                 res["steps"], env.val, res["eval_every"],
                                 run_id=f"smoothing_{res['loss.smoothing']}.s{seed}")
        records.extend(recs)
    return records, {"smoothing": res["loss.smoothing"],
                     "smoothing_weight": res["loss.smoothing_weight"]}


def _kind_ensemble_baseline(env: Env, mode: str, out_dir):
    """Independent co-trained models evaluated jointly as an ensemble."""
    res = env.res
    n = res["codistill.n_models"]
    records = []
    for seed in res["seeds"]:
        runners = [GroupRunner(env.arch, _group(res, seed, i), env.train,
                               entity=f"ensemble.s{seed}.m{i}", model_id=i)
                   for i in range(n)]
        t0 = time.perf_counter()
        windows = [[] for _ in range(n)]

        def emit(step):
            member_bytes = 0
            for i, r in enumerate(runners):
                rec = r.record(f"ensemble.s{seed}.m{i}", env.val, t0,
                               float(np.mean(windows[i])) if windows[i] else None)
                records.append(rec)
                member_bytes += rec.bytes_grad_exchange
                windows[i].clear()
            probs = ensemble_predict([r.params for r in runners], env.val)
            ens_loss = float(probs_nll(probs, env.val.labels).mean())
            ens_acc = float((probs.argmax(axis=1) == env.val.labels).mean())
            records.append(MetricRecord(f"ensemble.s{seed}.ens", step,
                                        time.perf_counter() - t0, None, ens_loss,
                                        ens_acc, member_bytes, 0))

        emit(0)
        for s in range(res["steps"]):
            for i, r in enumerate(runners):
                windows[i].append(r.step_stream())
            if (s + 1) % res["eval_every"] == 0 or s + 1 == res["steps"]:
                emit(s + 1)
    return records, {"n_models": n}


def _kind_offline_distill(env: Env, mode: str, out_dir):
    res = env.res
    n = res["codistill.n_models"]
    records = []
    totals = {}
    for seed in res["seeds"]:
        plan = make_shards(env.train, res["codistill.data_mode"], n, seed)
        shards = [plan.shard(env.train, i) for i in range(n)]
        groups = [_group(res, seed, i) for i in range(n)]
        student = _group(res, seed, n)  # fresh model, distinct seed
        result = offline_distill(env.arch, groups, student, shards, env.train,
                                 res["offline.phase1_steps"], res["offline.phase2_steps"],
                                 env.val, distill=res["loss.distill"],
                                 distill_weight=res["loss.distill_weight"],
                                 eval_every=res["eval_every"])
        for rec in result.records:
            rec.run_id = f"offline.s{seed}.{rec.run_id}"
        records.extend(result.records)
        totals[str(seed)] = {"phase1_steps": result.phase1_steps,
                             "phase2_steps": result.phase2_steps,
                             "total_steps": result.total_steps}
    return records, {"step_accounting": totals}


def _kind_churn(env: Env, mode: str, out_dir):
    """Prediction-difference comparison: independent retrains vs codistilled."""
    res = env.res
    repeats = res["churn.repeats"]
    base_seed = res["seeds"][0]
    records = []

    def train_independent(seed):
        params, recs = train_baseline(env.arch, _group(res, seed), env.train,
                                      res["steps"], env.val, res["eval_every"],
                                      run_id=f"churn.independent.r{seed}")
        records.extend(recs)
        return params

    def train_codistilled(seed):
        result, _ = _run_codistill_once(env, seed, f"churn.codistilled.r{seed}.m",
                                        mode, out_dir)
        records.extend(result.records)
        return result.params[0]  # one copy picked arbitrarily

    independent = churn_experiment(train_independent, repeats, env.val, base_seed=base_seed)
    codistilled = churn_experiment(train_codistilled, repeats, env.val, base_seed=base_seed)
    reduction = 1.0 - codistilled.churn_mean / independent.churn_mean
    return records, {"independent": independent.as_dict(),
                     "codistilled": codistilled.as_dict(),
                     "churn_reduction": reduction}


_KIND_FNS = {
    "baseline": _kind_baseline,
    "batch_sweep": _kind_batch_sweep,
    "codistill": _kind_codistill,
    "same_data_ablation": _kind_same_data_ablation,
    "staleness_sweep": _kind_staleness_sweep,
    "smoothing_baseline": _kind_smoothing_baseline,
    "ensemble_baseline": _kind_ensemble_baseline,
    "offline_distill": _kind_offline_distill,
    "churn": _kind_churn,
}


# ---------------------------------------------------------------------------
# output files


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(path, records) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt_cell(v) for v in (
            r.run_id, r.step, r.wall_seconds, r.train_loss, r.validation_loss,
            r.validation_accuracy, r.bytes_grad_exchange, r.bytes_checkpoint)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_metrics_csv(path) -> list[MetricRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        records.append(MetricRecord(
            run_id=cells[0], step=int(cells[1]), wall_seconds=float(cells[2]),
            train_loss=float(cells[3]) if cells[3] else None,
            validation_loss=float(cells[4]), validation_accuracy=float(cells[5]),
            bytes_grad_exchange=int(cells[6]), bytes_checkpoint=int(cells[7])))
    return records


def _write_outputs(out_dir, res, records, summary) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out / "metrics.csv", records)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    (out / "config.resolved").write_text(format_resolved(res), encoding="utf-8")


def run(cfg: dict, out_dir, mode: str = "lockstep") -> dict:
    """Execute one experiment and write metrics.csv / summary.json /
    config.resolved into ``out_dir``.

    On divergence the partial metrics are retained on disk and the
    DivergenceError is re-raised for the caller to turn into a nonzero exit.
    """
    if mode not in MODES:
        raise ConfigError(f"mode: unknown mode {mode!r}")
    res = resolve(cfg)
    env = build_env(res)
    summary = {"kind": res["kind"], "seeds": res["seeds"], "mode": mode,
               "provenance": env.provenance, "param_count": param_count(env.arch)}
    try:
        records, extra = _KIND_FNS[res["kind"]](env, mode, out_dir)
    except DivergenceError as err:
        summary.update({"diverged": True, "diverged_at_step": err.step,
                        "runs": _summarize_runs(err.records, res["target_loss"])})
        _write_outputs(out_dir, res, err.records, summary)
        raise
    summary["diverged"] = False
    summary["runs"] = _summarize_runs(records, res["target_loss"])
    summary.update(extra)
    _write_outputs(out_dir, res, records, summary)
    return summary


_SWEEPABLE_TYPES = ("int", "float", "bool", "str")


def sweep(cfg: dict, axis: str, values, out_dir, mode: str = "lockstep") -> list[dict]:
    """Run one experiment per axis value (shared seeds) and write sweep.csv.

    Each value runs in its own subdirectory ``<axis>=<value>``; sweep.csv
    holds one summary row per value.
    """
    if axis not in SCHEMA or axis == "kind":
        raise ConfigError(f"sweep axis: unknown or unsupported key {axis!r}")
    if SCHEMA[axis][0] not in _SWEEPABLE_TYPES:
        raise ConfigError(f"sweep axis: {axis} is not a scalar key")
    if not values:
        raise ConfigError("sweep values: must be non-empty")
    parsed = [_parse_value(axis, str(v)) for v in values]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    summaries = []
    for value in parsed:
        sub_cfg = dict(cfg)
        sub_cfg[axis] = value
        res = resolve(sub_cfg)
        summary = run(sub_cfg, out / f"{axis}={value}", mode)
        summaries.append(summary)
        runs = summary["runs"]
        finals = [s["final_val_loss"] for s in runs.values()]
        bests = [s["best_val_loss"] for s in runs.values()]
        row = {"axis": axis, "value": value,
               "mean_final_val_loss": float(np.mean(finals)),
               "mean_best_val_loss": float(np.mean(bests))}
        if res["target_loss"] is not None:
            reached = [s.get("steps_to_target") for s in runs.values()]
            reached = [v for v in reached if v is not None]
            row["mean_steps_to_target"] = float(np.mean(reached)) if reached else None
        rows.append(row)
    columns = ["axis", "value", "mean_final_val_loss", "mean_best_val_loss"]
    if any("mean_steps_to_target" in r for r in rows):
        columns.append("mean_steps_to_target")
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt_cell(row.get(c)) for c in columns))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return summaries
