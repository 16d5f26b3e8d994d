"""Experiment configuration: plain-text config files and JSON round-trip.

Config file grammar (INI-style, case-sensitive keys, `#` comments):

    [experiment]
    name = synth-demo          # dataset label in outputs (synth only)
    seed = 42
    alphas = 0.05, 0.10, 0.20, 0.30, 0.50, 0.70, 1.00
    reps = 5
    proposals = C, B, E, A
    train_frac = 0.6
    val_frac = 0.2
    test_frac = 0.2
    lambda = 0.10
    floor_delta = 0.05
    max_iters = 500
    n_starts = 5

    [synth]                    # either [synth] or [csv], not both
    n_rows = 3000
    n_classes = 2
    n_categorical = 2
    n_numerical = 3
    n_categories = 4
    class_sep = 2.5
    node_noise = 0.0, 0.15, 0.4

    [csv]
    path = data/train.csv
    schema = data/schema.cfg   # [schema] file: columns + n_classes

    [profiles]                 # node order = file order
    Financial = 4, 0.82, 0.12, 3.2
    Health = 3, 0.70, 0.25, 5.1
    Government = 2, 0.55, 0.40, 6.8

Schema file grammar:

    [schema]
    n_classes = 2
    [columns]                  # name = categorical | numerical | label
    protocol_type = categorical
    duration = numerical
    label = label
"""

from __future__ import annotations

import configparser
import os

from .data import FeatureSchema, SynthSpec
from .errors import ConfigError
from .experiment import CsvSource, ExperimentConfig
from .governance import NodeProfile
from .weights import OptimizerConfig

_OVERRIDE_KEYS = {"seed", "alphas", "reps", "lambda", "delta"}


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep case of column and node names
    return cp


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def load_schema_file(path) -> FeatureSchema:
    cp = _parser()
    if not cp.read(path):
        raise ConfigError(f"cannot read schema file {path}")
    if "schema" not in cp or "columns" not in cp:
        raise ConfigError(f"{path}: needs [schema] and [columns] sections")
    n_classes = cp.getint("schema", "n_classes")
    columns = tuple((name, kind.strip()) for name, kind in cp["columns"].items())
    return FeatureSchema(columns, n_classes)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    cp = _parser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    if "experiment" not in cp or "profiles" not in cp:
        raise ConfigError(f"{path}: needs [experiment] and [profiles] sections")
    exp = cp["experiment"]

    profiles = []
    for name, raw in cp["profiles"].items():
        vals = _floats(raw)
        if len(vals) != 4:
            raise ConfigError(f"profile {name}: expected cmm, kci, kri, cvss")
        profiles.append(NodeProfile(name, int(vals[0]), vals[1], vals[2], vals[3]))
    if not profiles:
        raise ConfigError("no node profiles defined")

    if ("synth" in cp) == ("csv" in cp):
        raise ConfigError("config needs exactly one of [synth] or [csv]")
    if "synth" in cp:
        s = cp["synth"]
        source = SynthSpec(
            n_rows=s.getint("n_rows"),
            n_classes=s.getint("n_classes"),
            n_categorical=s.getint("n_categorical"),
            n_numerical=s.getint("n_numerical"),
            node_noise=_floats(s.get("node_noise", "")),
            n_categories=s.getint("n_categories", fallback=4),
            class_sep=s.getfloat("class_sep", fallback=3.0),
            name=exp.get("name", "synthetic"),
        )
    else:
        c = cp["csv"]
        schema_path = c.get("schema")
        if not os.path.isabs(schema_path):
            schema_path = os.path.join(os.path.dirname(os.path.abspath(path)), schema_path)
        csv_path = c.get("path")
        if not os.path.isabs(csv_path):
            csv_path = os.path.join(os.path.dirname(os.path.abspath(path)), csv_path)
        source = CsvSource(csv_path, load_schema_file(schema_path), exp.get("name", "csv"))

    cfg = ExperimentConfig(
        source=source,
        profiles=tuple(profiles),
        alphas=_floats(exp.get("alphas", "0.05, 0.10, 0.20, 0.30, 0.50, 0.70, 1.00")),
        reps=exp.getint("reps", fallback=5),
        seed=exp.getint("seed", fallback=42),
        split_fracs=(
            exp.getfloat("train_frac", fallback=0.6),
            exp.getfloat("val_frac", fallback=0.2),
            exp.getfloat("test_frac", fallback=0.2),
        ),
        optimizer=OptimizerConfig(
            lam=exp.getfloat("lambda", fallback=0.10),
            floor_delta=exp.getfloat("floor_delta", fallback=0.05),
            max_iters=exp.getint("max_iters", fallback=500),
            n_starts=exp.getint("n_starts", fallback=5),
        ),
        proposals=tuple(p.strip() for p in exp.get("proposals", "C, B, E, A").split(",")),
    )
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply --set key=value pairs; unknown keys are rejected."""
    from dataclasses import replace

    for key, raw in overrides.items():
        if key not in _OVERRIDE_KEYS:
            raise ConfigError(f"unknown override key {key!r} (allowed: {sorted(_OVERRIDE_KEYS)})")
        try:
            if key == "seed":
                cfg = replace(cfg, seed=int(raw))
            elif key == "reps":
                cfg = replace(cfg, reps=int(raw))
            elif key == "alphas":
                cfg = replace(cfg, alphas=_floats(raw))
            elif key == "lambda":
                cfg = replace(cfg, optimizer=replace(cfg.optimizer, lam=float(raw)))
            elif key == "delta":
                cfg = replace(cfg, optimizer=replace(cfg.optimizer, floor_delta=float(raw)))
        except ValueError as exc:
            raise ConfigError(f"override {key}={raw!r}: {exc}") from exc
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    src = cfg.source
    if isinstance(src, SynthSpec):
        source = {
            "kind": "synth",
            "n_rows": src.n_rows,
            "n_classes": src.n_classes,
            "n_categorical": src.n_categorical,
            "n_numerical": src.n_numerical,
            "node_noise": list(src.node_noise),
            "n_categories": src.n_categories,
            "class_sep": src.class_sep,
            "name": src.name,
        }
    else:
        source = {
            "kind": "csv",
            "path": src.path,
            "name": src.name,
            "n_classes": src.schema.n_classes,
            "columns": [list(c) for c in src.schema.columns],
        }
    return {
        "source": source,
        "profiles": [
            {"name": p.name, "cmm": p.cmm, "kci": p.kci, "kri": p.kri, "cvss": p.cvss}
            for p in cfg.profiles
        ],
        "alphas": list(cfg.alphas),
        "reps": cfg.reps,
        "seed": cfg.seed,
        "split_fracs": list(cfg.split_fracs),
        "optimizer": {
            "lambda": cfg.optimizer.lam,
            "floor_delta": cfg.optimizer.floor_delta,
            "max_iters": cfg.optimizer.max_iters,
            "n_starts": cfg.optimizer.n_starts,
            "seed": cfg.optimizer.seed,
        },
        "proposals": list(cfg.proposals),
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    s = d["source"]
    if s["kind"] == "synth":
        source = SynthSpec(
            n_rows=s["n_rows"],
            n_classes=s["n_classes"],
            n_categorical=s["n_categorical"],
            n_numerical=s["n_numerical"],
            node_noise=tuple(s["node_noise"]),
            n_categories=s["n_categories"],
            class_sep=s["class_sep"],
            name=s["name"],
        )
    else:
        schema = FeatureSchema(tuple(tuple(c) for c in s["columns"]), s["n_classes"])
        source = CsvSource(s["path"], schema, s["name"])
    opt = d["optimizer"]
    return ExperimentConfig(
        source=source,
        profiles=tuple(
            NodeProfile(p["name"], p["cmm"], p["kci"], p["kri"], p["cvss"])
            for p in d["profiles"]
        ),
        alphas=tuple(d["alphas"]),
        reps=d["reps"],
        seed=d["seed"],
        split_fracs=tuple(d["split_fracs"]),
        optimizer=OptimizerConfig(
            lam=opt["lambda"],
            floor_delta=opt["floor_delta"],
            max_iters=opt["max_iters"],
            n_starts=opt["n_starts"],
            seed=opt["seed"],
        ),
        proposals=tuple(d["proposals"]),
    )
