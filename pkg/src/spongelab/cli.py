"""Config-driven experiment runner.

One run = one JSON config = one output directory. Every file written embeds
the config hash and seed, and nothing depends on wall-clock time, so the
same config and seed reproduce the outputs byte for byte.

Usage::

    spongelab --config configs/attack-nlp.json --out runs/nlp
    spongelab --config configs/attack-nlp.json --override ga.generations=5 --seed 3

Tasks: attack-nlp, attack-cv, attack-blackbox, simulate, transfer,
profile-defense, stats, serve. Run ``spongelab --show-defaults TASK`` to see
every key a task accepts.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger("spongelab")

_COST = {"dram_access_energy_pj": 1950.0, "fp_mult_energy_pj": 3.7, "zero_skip_enabled": True, "dram_compress_enabled": True}
_TRANSLATOR = {"seed": 0, "checkpoint": None, "vocab": None}
_SERVICE = {
    "cache_capacity": 1000,
    "base_network_latency": 0.005,
    "jitter": 0.0,
    "overhead_time": 0.005,
    "step_time": 0.002,
    "cache_hit_time": 0.0001,
    "max_input_chars": 50,
}

DEFAULTS: dict[str, dict] = {
    "attack-nlp": {
        "length": 16,
        "fitness": "simulated-energy",
        "ga": {"pool_size": 200, "generations": 20, "selection_fraction": 0.1, "mutation_rate": 0.05, "flip_probability": 0.5},
        "model": _TRANSLATOR,
        "cost": _COST,
        "baseline_samples": 100,
        "top_k": 10,
        "compare_fitness": False,
    },
    "attack-cv": {
        "ga": {"pool_size": 200, "generations": 30, "selection_fraction": 0.1, "dilution_fraction": 0.01, "min_classes_preserved": 20},
        "lbfgs": {"steps": 200, "memory": 10, "samples": 20},
        "model": {"seed": 0},
        "cost": _COST,
        "samples": 200,
    },
    "attack-blackbox": {
        "length": 50,
        "ga": {"pool_size": 100, "generations": 50, "selection_fraction": 0.1, "mutation_rate": 0.05, "flip_probability": 0.5, "reevaluate_elites": True},
        "model": _TRANSLATOR,
        "service": _SERVICE,
        "repeats": 1,
        "baseline_samples": 50,
    },
    "simulate": {"trace": None, "cost": _COST},
    "transfer": {
        "length": 16,
        "ga": {"pool_size": 200, "generations": 15, "selection_fraction": 0.1, "mutation_rate": 0.05, "flip_probability": 0.5},
        "model_a": _TRANSLATOR,
        "model_b": {"seed": 1, "checkpoint": None, "vocab": None},
        "cost": _COST,
        "n_sponges": 100,
    },
    "profile-defense": {
        "length": 16,
        "percentile": 99.0,
        "source": "simulated-energy",
        "corpus_size": 500,
        "holdout_size": 500,
        "random_size": 200,
        "sponges": None,
        "model": _TRANSLATOR,
        "cost": _COST,
    },
    "stats": {"samples": None, "order": ["sponge", "natural", "random"], "alpha": 0.01},
    "serve": {"host": "127.0.0.1", "port": 7878, "duration": 0.0, "model": _TRANSLATOR, "service": _SERVICE},
}

REQUIRED_PATHS = {"simulate": ["trace"], "stats": ["samples"]}


class ConfigError(ValueError):
    pass


# -- config handling ------------------------------------------------------------------


def _merge(defaults: dict, user: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"{where}: unknown key")
        dflt = defaults[key]
        if isinstance(dflt, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected an object")
            out[key] = _merge(dflt, val, where + ".")
        elif dflt is None or val is None:
            out[key] = val
        elif isinstance(dflt, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{where}: expected true or false")
            out[key] = val
        elif isinstance(dflt, (int, float)):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{where}: expected a number")
            if isinstance(dflt, int) and not isinstance(dflt, bool) and float(val) != int(val):
                raise ConfigError(f"{where}: expected an integer")
            out[key] = type(dflt)(val)
        elif isinstance(dflt, list):
            if not isinstance(val, list):
                raise ConfigError(f"{where}: expected a list")
            out[key] = val
        else:
            if not isinstance(val, type(dflt)):
                raise ConfigError(f"{where}: expected {type(dflt).__name__}")
            out[key] = val
    return out


def _set_path(cfg: dict, dotted: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: {k} is not an object")
    node[keys[-1]] = value


def load_config(path=None, overrides: Sequence[str] = (), seed: int | None = None, base_dir=None) -> dict:
    """Merge a config file, ``key=value`` overrides and ``--seed`` over task defaults."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        base_dir = base_dir or Path(path).parent
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        _set_path(raw, k.strip(), v)
    task = raw.get("task")
    if task not in DEFAULTS:
        raise ConfigError(f"task: expected one of {sorted(DEFAULTS)}, got {task!r}")
    user = {k: v for k, v in raw.items() if k not in ("task", "seed", "out")}
    cfg = {"task": task, "seed": int(raw.get("seed", 0)), **_merge(DEFAULTS[task], user)}
    if seed is not None:
        cfg["seed"] = int(seed)
    if raw.get("out") is not None:
        cfg["out"] = raw["out"]
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    for key in REQUIRED_PATHS.get(task, []):
        if cfg.get(key) is None:
            raise ConfigError(f"{key}: required for task {task}")
    for key, val in _file_refs(cfg):
        p = Path(val)
        if not p.is_absolute():
            p = base / p
        if not p.exists():
            raise ConfigError(f"{key}: file {val!r} does not exist")
        _assign(cfg, key, str(p))
    _validate(cfg)
    return cfg


def _file_refs(cfg: dict, prefix: str = ""):
    for k, v in cfg.items():
        where = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _file_refs(v, where + ".")
        elif k in ("trace", "samples", "checkpoint", "vocab", "sponges") and isinstance(v, str):
            yield where, v


def _assign(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        cfg = cfg[k]
    cfg[keys[-1]] = value


def _validate(cfg: dict) -> None:
    if "ga" in cfg:
        try:
            _ga_config(cfg)
        except ValueError as exc:
            field, _, rest = str(exc).partition(" ")
            raise ConfigError(f"ga.{field}: {rest}") from None
    if "length" in cfg and cfg["length"] < 1:
        raise ConfigError("length: must be positive")
    if cfg["task"] == "attack-nlp" and cfg["fitness"] not in ("simulated-energy", "estimated-ops", "measured-latency"):
        raise ConfigError("fitness: expected simulated-energy, estimated-ops or measured-latency")
    if cfg["task"] == "profile-defense":
        if cfg["source"] not in ("simulated-energy", "simulated-latency"):
            raise ConfigError("source: expected simulated-energy or simulated-latency")
        if not 0 < cfg["percentile"] <= 100:
            raise ConfigError("percentile: must lie in (0, 100]")
    if cfg["task"] == "stats" and sorted(cfg["order"]) != ["natural", "random", "sponge"]:
        raise ConfigError("order: must list natural, random and sponge once each")


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def _ga_config(cfg: dict, seed_offset: int = 0):
    from .attacks.ga import GaConfig

    return GaConfig(seed=cfg["seed"] + seed_offset, **cfg["ga"])


def _cost(cfg: dict):
    from .energy import AsicCostModel

    return AsicCostModel(**cfg["cost"])


def _translator(model_cfg: dict):
    from .nlp.corpus import build_toy_vocab
    from .nlp.text import Vocab
    from .nlp.translator import ToyTranslator, build_toy_translator

    vocab = Vocab.load(model_cfg["vocab"]) if model_cfg.get("vocab") else build_toy_vocab()
    if model_cfg.get("checkpoint"):
        model = ToyTranslator.load(model_cfg["checkpoint"])
        if model.vocab_size != len(vocab):
            raise ConfigError("model.checkpoint: vocabulary size does not match model.vocab")
    else:
        model = build_toy_translator(vocab, seed=model_cfg["seed"])
    return model, vocab


# -- output ----------------------------------------------------------------------------


class Output:
    """Writes files into the run directory, each stamped with hash and seed."""

    def __init__(self, root, cfg: dict):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.meta = {"config_hash": config_hash(cfg), "seed": cfg["seed"], "task": cfg["task"]}
        self.written: list[str] = []

    def json(self, name: str, payload: dict) -> Path:
        doc = {"meta": self.meta, **payload}
        path = self.root / name
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        self.written.append(name)
        return path

    def table(self, name: str, columns: dict[str, Sequence]) -> Path:
        path = emit_plot_data(columns, self.root / name, self.meta)
        self.written.append(name)
        return path


def emit_plot_data(columns: dict[str, Sequence], path, meta: dict | None = None) -> Path:
    """Plain CSV: first column is x, the rest are series of equal length.

    Lines starting with ``#`` carry metadata.
    """
    if not columns:
        raise ValueError("no columns to write")
    lengths = {len(v) for v in columns.values()}
    if len(lengths) != 1:
        raise ValueError("all columns must have the same length")
    if lengths == {0}:
        raise ValueError("series are empty")
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(columns))
    for row in zip(*columns.values()):
        w.writerow([_fmt(x) for x in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def history_columns(history) -> dict[str, list]:
    return {
        "generation": [h.generation for h in history],
        "best": [h.best for h in history],
        "mean": [h.mean for h in history],
        "source": [h.source for h in history],
    }


# -- tasks --------------------------------------------------------------------------------


def _summary_block(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    return {"n": int(v.size), "mean": float(v.mean()), "median": float(np.median(v)), "max": float(v.max())}


def _run_ga_with_flush(config, fitness, out: Output, name: str, **kw):
    from .attacks.ga import ga_run

    rows = []
    path = out.root / name

    def flush(stats):
        rows.append(stats)
        emit_plot_data(history_columns(rows), path, out.meta)

    result = ga_run(config, fitness, on_generation=flush, **kw)
    out.written.append(name)
    return result


def task_attack_nlp(cfg: dict, out: Output) -> int:
    from .attacks.fitness import EstimatedOpsFitness, SimulatedEnergyFitness, SimulatedLatencyFitness
    from .nlp.corpus import natural_corpus, random_corpus
    from .nlp.text import detokenize, encode_text
    from .nlp.translator import translate

    model, vocab = _translator(cfg["model"])
    cost = _cost(cfg)
    energy = SimulatedEnergyFitness(model, vocab, cost)
    fitnesses = {
        "simulated-energy": energy,
        "estimated-ops": EstimatedOpsFitness(model, vocab, cost),
        "measured-latency": SimulatedLatencyFitness(model, vocab),
    }
    L = cfg["length"]
    result = _run_ga_with_flush(_ga_config(cfg), fitnesses[cfg["fitness"]], out, "history.csv", domain="nlp", length=L)

    seen, best = set(), []
    for ind in result.pool:
        if ind.payload in seen:
            continue
        seen.add(ind.payload)
        rep = energy.report(ind.payload)
        res = translate(model, encode_text(ind.payload, vocab), record=False)
        best.append({
            "payload": ind.payload,
            "fitness": ind.fitness.value,
            "fitness_source": ind.fitness.source,
            "energy_pj": rep.energy_optimized_pj,
            "energy_ratio": rep.energy_ratio,
            "l_tin": res.dims.l_tin,
            "l_tout": res.dims.l_tout,
            "translation": detokenize(res.output, vocab),
        })
        if len(best) == cfg["top_k"]:
            break
    out.json("sponges.json", {"sponges": best, "config_hash": out.meta["config_hash"]})

    n = cfg["baseline_samples"]
    classes = {
        "natural": natural_corpus(n, L, cfg["seed"] + 101),
        "random": random_corpus(n, L, cfg["seed"] + 202),
    }
    summary = {}
    for name, texts in classes.items():
        reps = [energy.report(t) for t in texts]
        summary[name] = {
            "energy_pj": _summary_block([r.energy_optimized_pj for r in reps]),
            "tokens_in": _summary_block([len(encode_text(t, vocab)) for t in texts]),
        }
    sp = [b["energy_pj"] for b in best]
    summary["sponge"] = {"energy_pj": _summary_block(sp), "tokens_in": _summary_block([b["l_tin"] for b in best])}
    summary["sponge_over_natural"] = summary["sponge"]["energy_pj"]["max"] / summary["natural"]["energy_pj"]["mean"]
    out.json("summary.json", {"columns": ["natural", "random", "sponge"], "summary": summary})

    if cfg["compare_fitness"]:
        cols = {"generation": [h.generation for h in result.history]}
        for src, fit in fitnesses.items():
            hist = result.history if src == cfg["fitness"] else _run_ga_quiet(_ga_config(cfg), fit, L)
            cols[src.replace("-", "_")] = [energy(h.best_payload).value for h in hist]
        out.table("fitness_comparison.csv", cols)
    return 0


def _run_ga_quiet(config, fitness, length):
    from .attacks.ga import ga_run

    return ga_run(config, fitness, "nlp", length=length).history


def task_attack_cv(cfg: dict, out: Output) -> int:
    from .attacks.ga import FitnessValue
    from .attacks.lbfgs import lbfgs_attack
    from .energy import simulate_energy
    from .vision import build_reference_cnn, cnn_forward, ibp_max_density, natural_images, random_images

    model = build_reference_cnn(cfg["model"]["seed"])
    cost = _cost(cfg)

    def fitness(img):
        r = cnn_forward(model, img)
        return FitnessValue(simulate_energy(r.trace, cost).energy_optimized_pj, "simulated-energy"), int(np.argmax(r.logits))

    n = cfg["samples"]
    pool_size = cfg["ga"]["pool_size"]
    init, _ = natural_images(pool_size, cfg["seed"] + 7)
    result = _run_ga_with_flush(_ga_config(cfg), fitness, out, "history.csv", domain="cv", initial=init)
    lb = cfg["lbfgs"]
    starts = random_images(lb["samples"], cfg["seed"] + 9)
    lbfgs_imgs = [lbfgs_attack(model, x, steps=lb["steps"], m=lb["memory"]) for x in starts]
    nat, _ = natural_images(n, cfg["seed"] + 11)
    classes = {
        "lbfgs": lbfgs_imgs,
        "ga": [ind.payload for ind in result.pool[:n]],
        "natural": nat,
        "random": random_images(n, cfg["seed"] + 13),
    }
    summary = {}
    for name, imgs in classes.items():
        fw = [cnn_forward(model, x) for x in imgs]
        summary[name] = {
            "overall_density": _summary_block([f.density.overall_density for f in fw]),
            "post_relu_density": _summary_block([f.density.post_relu_density for f in fw]),
            "energy_ratio": _summary_block([simulate_energy(f.trace, cost).energy_ratio for f in fw]),
        }
    ibp = ibp_max_density(model)
    summary["ibp_maximum"] = {"overall_density": ibp.overall_density, "post_relu_density": ibp.post_relu_density}
    out.json("summary.json", {"summary": summary})
    return 0


def _service_config(cfg: dict, model, vocab):
    from .service import ServiceConfig

    return ServiceConfig(model=model, vocab=vocab, **cfg["service"])


def task_attack_blackbox(cfg: dict, out: Output) -> int:
    from .nlp.corpus import natural_corpus
    from .service import BlackboxLatencyFitness, client_translate, serve

    model, vocab = _translator(cfg["model"])
    scfg = _service_config(cfg, model, vocab)
    L = cfg["length"]
    with serve(scfg) as handle:
        net = scfg.network(cfg["seed"])
        baseline = [client_translate(handle.endpoint, t, net)[1].duration for t in natural_corpus(cfg["baseline_samples"], L, cfg["seed"] + 101)]
        fitness = BlackboxLatencyFitness(handle.endpoint, net, repeats=cfg["repeats"])
        try:
            result = _run_ga_with_flush(_ga_config(cfg), fitness, out, "history.csv", domain="nlp", length=L)
        finally:
            fitness.close()
    log_cols = {
        "request": list(range(len(fitness.log))),
        "server_time": [e.server_time for e in fitness.log],
        "round_trip": [e.round_trip for e in fitness.log],
        "cached": [int(e.cached) for e in fitness.log],
    }
    out.table("requests.csv", log_cols)
    fresh = [e.round_trip for e in fitness.log if not e.cached]
    base = float(np.mean(baseline))
    out.json("summary.json", {
        "natural_round_trip": _summary_block(baseline),
        "best_round_trip": max(fresh) if fresh else 0.0,
        "uplift": (max(fresh) / base) if fresh else 0.0,
        "best_payload": result.best.payload,
        "cache_hits": int(sum(e.cached for e in fitness.log)),
    })
    return 0


def task_simulate(cfg: dict, out: Output) -> int:
    from .energy import ActivationTrace, simulate_energy

    report = simulate_energy(ActivationTrace.load(cfg["trace"]), _cost(cfg))
    out.json("energy_report.json", {"report": report.to_dict()})
    return 0


def task_transfer(cfg: dict, out: Output) -> int:
    from .attacks.fitness import SimulatedEnergyFitness
    from .measurement import sign_test
    from .nlp.corpus import random_corpus

    model_a, vocab_a = _translator(cfg["model_a"])
    model_b, vocab_b = _translator(cfg["model_b"])
    cost = _cost(cfg)
    fa = SimulatedEnergyFitness(model_a, vocab_a, cost)
    fb = SimulatedEnergyFitness(model_b, vocab_b, cost)
    result = _run_ga_with_flush(_ga_config(cfg), fa, out, "history.csv", domain="nlp", length=cfg["length"])
    sponges = top_distinct(result.pool, cfg["n_sponges"])
    randoms = random_corpus(len(sponges), cfg["length"], cfg["seed"] + 303)
    eb_s = [fb(s).value for s in sponges]
    eb_r = [fb(r).value for r in randoms]
    st = sign_test(eb_s, eb_r)
    out.json("summary.json", {
        "sponge_on_b": _summary_block(eb_s),
        "random_on_b": _summary_block(eb_r),
        "uplift": float(np.mean(eb_s) / np.mean(eb_r)),
        "sign_test": st._asdict(),
        "sponges": sponges,
    })
    return 0


def top_distinct(pool, k: int) -> list[str]:
    seen, out = set(), []
    for ind in pool:
        if ind.payload not in seen:
            seen.add(ind.payload)
            out.append(ind.payload)
            if len(out) == k:
                break
    return out


def task_profile_defense(cfg: dict, out: Output) -> int:
    from .defense import guarded_translate_text, profile_natural
    from .nlp.corpus import natural_corpus, random_corpus

    model, vocab = _translator(cfg["model"])
    cost = _cost(cfg)
    L = cfg["length"]
    profile = profile_natural(model, vocab, natural_corpus(cfg["corpus_size"], L, cfg["seed"] + 1), cfg["percentile"], cfg["source"], cost)
    profile.save(out.root / "profile.json")
    out.written.append("profile.json")
    sets = {
        "holdout_natural": natural_corpus(cfg["holdout_size"], L, cfg["seed"] + 2),
        "random": random_corpus(cfg["random_size"], L, cfg["seed"] + 3),
    }
    if cfg["sponges"]:
        doc = json.loads(Path(cfg["sponges"]).read_text())
        sets["sponge"] = [s["payload"] if isinstance(s, dict) else s for s in doc.get("sponges", doc)]
    rates = {}
    for name, texts in sets.items():
        outcomes = [guarded_translate_text(model, vocab, t, profile, cost=cost) for t in texts]
        rates[name] = {"n": len(texts), "rejected": int(sum(o.rejected for o in outcomes)), "rate": float(np.mean([o.rejected for o in outcomes]))}
    out.json("summary.json", {"threshold": profile.threshold, "source": profile.source, "percentile": profile.percentile, "rejections": rates})
    return 0


def task_stats(cfg: dict, out: Output) -> int:
    from .measurement import compare_sample_classes

    doc = json.loads(Path(cfg["samples"]).read_text())
    try:
        rep = compare_sample_classes(doc["natural"], doc["random"], doc["sponge"], tuple(cfg["order"]), cfg["alpha"])
    except KeyError as exc:
        raise ConfigError(f"samples: file lacks the {exc.args[0]!r} array") from None
    out.json("stats.json", {
        "tests": [t._asdict() for t in rep.tests],
        "n_needed": rep.n_needed,
        "alpha": rep.alpha,
    })
    trace = list(zip(*rep.p_trace)) if rep.p_trace else [[], [], [], []]
    names = [f"p_{a}_gt_{b}" for a, b in [(t.larger, t.smaller) for t in rep.tests]]
    out.table("p_trace.csv", {"n": list(trace[0]), names[0]: list(trace[1]), names[1]: list(trace[2]), names[2]: list(trace[3])})
    return 0


def task_serve(cfg: dict, out: Output) -> int:
    from .service import serve

    model, vocab = _translator(cfg["model"])
    handle = serve(_service_config(cfg, model, vocab), cfg["host"], cfg["port"])
    host, port = handle.endpoint
    print(f"serving on {host}:{port}", flush=True)
    try:
        if cfg["duration"] > 0:
            time.sleep(cfg["duration"])
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        handle.close()
    out.json("service.json", {"endpoint": [host, port], "requests": handle.service.requests})
    return 0


TASKS = {
    "attack-nlp": task_attack_nlp,
    "attack-cv": task_attack_cv,
    "attack-blackbox": task_attack_blackbox,
    "simulate": task_simulate,
    "transfer": task_transfer,
    "profile-defense": task_profile_defense,
    "stats": task_stats,
    "serve": task_serve,
}


def run(cfg: dict, out_dir=None) -> int:
    out_dir = out_dir or cfg.get("out") or f"runs/{cfg['task']}-{config_hash(cfg)}"
    out = Output(out_dir, cfg)
    out.json("config.json", {"config": {k: v for k, v in cfg.items() if k != "out"}})
    try:
        return TASKS[cfg["task"]](cfg, out)
    except KeyboardInterrupt:
        log.warning("interrupted; partial results are in %s", out.root)
        return 130


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="spongelab", description="Run a sponge-example experiment from a JSON config.")
    ap.add_argument("--config", help="experiment config (JSON)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="set a (dotted) config key; VALUE is parsed as JSON when possible")
    ap.add_argument("--show-defaults", metavar="TASK", help="print the default config of a task and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.show_defaults:
        if args.show_defaults not in DEFAULTS:
            print(f"unknown task {args.show_defaults!r}; choose from {', '.join(sorted(DEFAULTS))}", file=sys.stderr)
            return 2
        print(json.dumps({"task": args.show_defaults, "seed": 0, **DEFAULTS[args.show_defaults]}, indent=2))
        return 0
    if args.config is None and not args.override:
        ap.error("--config or --override task=... is required")
    try:
        cfg = load_config(args.config, args.override, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg, args.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
