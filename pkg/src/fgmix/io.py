"""Dataset CSV, trace JSON-lines, metrics JSON, and run configuration."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .datagen import Dataset
from .model import Hyperparams, ModelState, Trace

TRACE_FORMAT = "fgmix-trace"
TRACE_VERSION = 1


# --- datasets -------------------------------------------------------------

def write_dataset_csv(ds: Dataset, path) -> None:
    """Header ``x1,...,xd[,label]``; floats written with ``repr`` so they round-trip."""
    header = [f"x{j + 1}" for j in range(ds.d)]
    if ds.labels is not None:
        header.append("label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.points[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file (header row is mandatory)") from None
        header = [h.strip() for h in header]
        has_label = header[-1] == "label"
        d = len(header) - int(has_label)
        if d < 1 or any(not h.startswith("x") for h in header[:d]):
            raise ValueError(f"{path}: line 1: expected header x1,...,xd[,label], got {header}")
        pts, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                pts.append([float(v) for v in row[:d]])
                if has_label:
                    labels.append(int(row[d]))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if not all(np.isfinite(pts[-1])):
                raise ValueError(f"{path}: line {lineno}: non-finite coordinate")
    points = np.array(pts, dtype=float).reshape(-1, d)
    return Dataset(points, np.array(labels, dtype=np.int64) if has_label else None, {"path": str(path)})


def write_points_csv(points, path) -> None:
    write_dataset_csv(Dataset(np.asarray(points, dtype=float)), path)


# --- traces ---------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_trace(trace: Trace, path, save_latent: bool = False, config: dict | None = None) -> None:
    """One header line (hyperparameters, run metadata, config echo), then one state per line."""
    header = {"format": TRACE_FORMAT, "version": TRACE_VERSION, "hyper": trace.hyper.to_dict(),
              "meta": trace.meta, "config": config or {}}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dumps(header) + "\n")
        for st in trace.states:
            fh.write(_dumps(st.to_dict(save_latent=save_latent)) + "\n")


def read_trace(path) -> Trace:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    header = json.loads(lines[0])
    if header.get("format") != TRACE_FORMAT:
        raise ValueError(f"{path}: not a trace file")
    states = [ModelState.from_dict(json.loads(ln)) for ln in lines[1:]]
    return Trace(states=states, hyper=Hyperparams.from_dict(header["hyper"]), meta=header.get("meta", {}))


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


METRICS_SCHEMA = {
    "type": "object",
    "required": ["command", "config", "seed", "metrics"],
    "properties": {
        "command": {"const": "eval"},
        "seed": {"type": "integer"},
        "config": {"type": "object"},
        "metrics": {
            "type": "object",
            "properties": {
                "mad": {
                    "type": "object",
                    "required": ["deltas", "mad", "N", "seed"],
                    "properties": {
                        "deltas": {"type": "array", "items": {"type": "number"}},
                        "mad": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "N": {"type": "integer", "minimum": 1},
                        "seed": {"type": ["integer", "null"]},
                        "sample_seed": {"type": ["integer", "null"]},
                    },
                },
                "mad_kde": {"type": "object"},
                "test_loglik": {"type": "number"},
                "n_test": {"type": "integer"},
                "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
    },
}


# --- configuration --------------------------------------------------------

_HYPER_KEYS = {f"hyper.{name}" for name in Hyperparams.__dataclass_fields__}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "out": "out",
    "data.path": None,
    "data.generator": None,
    "data.n": None,
    "data.noise_sd": None,
    "data.noise_var": None,
    "data.R": None,
    "data.r": None,
    "data.n_per_class": None,
    "data.t_max": None,
    "data.turns": None,
    "data.per_ring": None,
    "fit.chains": 1,
    "fit.save_latent": False,
    "fit.init": "random",
    "predict.n_prior_draws": 100,
    "predict.include_new_sphere": True,
    "predict.max_states": None,
    "sample.m": 500,
    "sample.trace": None,
    "eval.trace": None,
    "eval.test_path": None,
    "eval.deltas": None,
    "eval.N": 2000,
    "eval.predictive_equals_train": False,
    "eval.kde_baseline": False,
    "eval.class_traces": None,
    "classify.test_path": None,
}

_GENERATOR_ARGS = {
    "euler_spiral": ("n", "noise_sd", "t_max"),
    "olympic_rings": ("noise_sd", "per_ring"),
    "torus": ("n", "R", "r", "noise_var"),
    "two_spirals": ("n_per_class", "noise_sd", "turns"),
}


class RunConfig:
    """Flat dotted-key configuration, validated on construction.

    Unknown keys are rejected; ``hyper.*`` keys must form valid
    :class:`Hyperparams`.
    """

    def __init__(self, values: dict[str, Any] | None = None):
        values = dict(values or {})
        unknown = set(values) - set(DEFAULTS) - _HYPER_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        self.values = values
        self.hyper = Hyperparams.from_dict(
            {k.split(".", 1)[1]: v for k, v in values.items() if k in _HYPER_KEYS}
        ).validate()
        gen = self.get("data.generator")
        if gen is not None and gen not in _GENERATOR_ARGS:
            raise ValueError(f"unknown generator {gen!r}; choose from {sorted(_GENERATOR_ARGS)}")
        if int(self.get("fit.chains")) < 1:
            raise ValueError("fit.chains must be >= 1")

    @classmethod
    def load(cls, path) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a mapping of dotted keys")
        nested = [k for k, v in data.items() if isinstance(v, dict) and k != "eval.class_traces"]
        if nested:
            raise ValueError(f"{path}: use flat dotted keys, not nested sections: {nested}")
        return cls(data)

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        if key in _HYPER_KEYS:
            return getattr(self.hyper, key.split(".", 1)[1])
        return DEFAULTS[key]

    def with_overrides(self, **overrides) -> "RunConfig":
        values = dict(self.values)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(values)

    def generator_kwargs(self) -> dict[str, Any]:
        gen = self.get("data.generator")
        return {a: self.get(f"data.{a}") for a in _GENERATOR_ARGS[gen] if self.get(f"data.{a}") is not None}

    def echo(self) -> dict[str, Any]:
        """Every key with its effective value, for embedding in outputs.

        The output directory is left out so that results do not depend on
        where they are written.
        """
        out = {k: self.get(k) for k in DEFAULTS if k != "out"}
        out.update({k: self.get(k) for k in sorted(_HYPER_KEYS)})
        if out.get("hyper.mu0") is not None:
            out["hyper.mu0"] = list(out["hyper.mu0"])
        return out
