"""Command-line driver: ``fgmix {generate,fit,sample,eval,classify}``.

Every command reads a flat dotted-key YAML config (``--config``); ``--seed``
and ``--out`` override the config's ``seed`` and ``out``. Outputs are
deterministic functions of (config, seed) and echo the effective config.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .datagen import GENERATORS, Dataset
from .evaluation import GaussianKDE, classification_accuracy, mad_delta, test_loglik
from .gibbs import SamplerError, run_chain
from .io import RunConfig, read_dataset_csv, read_trace, write_dataset_csv, write_json, write_points_csv, write_trace
from .predictive import Classifier, DensityModel

log = logging.getLogger("fgmix")

# fixed offsets so the independent random streams of one run never coincide
_STREAM_FIT, _STREAM_SAMPLE, _STREAM_MAD, _STREAM_PRIOR = 0, 1, 2, 3


def _seed(cfg: RunConfig, stream: int, *extra: int) -> int:
    """A derived 63-bit seed for one named random stream."""
    ss = np.random.SeedSequence([int(cfg.get("seed")), stream, *extra])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(cfg: RunConfig) -> Dataset:
    path = cfg.get("data.path")
    if path is not None:
        if not Path(path).is_file():
            raise FileNotFoundError(f"data file not found: {path}")
        return read_dataset_csv(path)
    gen = cfg.get("data.generator")
    if gen is None:
        raise ValueError("config needs data.path or data.generator")
    return GENERATORS[gen](seed=int(cfg.get("seed")), **cfg.generator_kwargs())


def _density_model(cfg: RunConfig, trace) -> DensityModel:
    return DensityModel(trace, n_prior_draws=int(cfg.get("predict.n_prior_draws")),
                        include_new_sphere=bool(cfg.get("predict.include_new_sphere")),
                        seed=_seed(cfg, _STREAM_PRIOR), max_states=cfg.get("predict.max_states"))


def _trace_path(cfg: RunConfig, key: str) -> Path:
    path = cfg.get(key)
    path = Path(path) if path is not None else Path(cfg.get("out")) / "trace.jsonl"
    if not path.is_file():
        raise FileNotFoundError(f"trace file not found: {path}")
    return path


def cmd_generate(cfg: RunConfig) -> Path:
    gen = cfg.get("data.generator")
    if gen is None:
        raise ValueError("generate needs data.generator")
    ds = GENERATORS[gen](seed=int(cfg.get("seed")), **cfg.generator_kwargs())
    out = _out(cfg)
    write_dataset_csv(ds, out / "points.csv")
    write_json({"command": "generate", "config": cfg.echo(), "seed": int(cfg.get("seed")), "meta": ds.meta},
               out / "points.meta.json")
    return out / "points.csv"


def _fit(points, cfg: RunConfig, out: Path, stem: str, *stream) -> list[Path]:
    hyper = cfg.hyper
    chains = int(cfg.get("fit.chains"))
    paths = []
    for c in range(chains):
        suffix = "" if chains == 1 else f"_chain{c}"
        seed = _seed(cfg, _STREAM_FIT, *stream, c)
        try:
            trace = run_chain(points, hyper, seed, diagnostics_path=out / f"diagnostics{stem}{suffix}.jsonl",
                              init_method=cfg.get("fit.init"), meta={"chain": c, "config_seed": int(cfg.get("seed"))})
        except SamplerError as err:
            write_json({"error": str(err), "state": err.state.to_dict(save_latent=True)},
                       out / f"failed_state{stem}{suffix}.json")
            raise
        path = out / f"trace{stem}{suffix}.jsonl"
        write_trace(trace, path, save_latent=bool(cfg.get("fit.save_latent")), config=cfg.echo())
        paths.append(path)
    return paths


def cmd_fit(cfg: RunConfig) -> list[Path]:
    ds = _load_data(cfg)
    if ds.n < 2:
        raise ValueError("fit needs at least two data points")
    return _fit(ds.points, cfg, _out(cfg), "")


def cmd_sample(cfg: RunConfig) -> Path:
    trace = read_trace(_trace_path(cfg, "sample.trace"))
    model = _density_model(cfg, trace)
    pts = model.sample(int(cfg.get("sample.m")), _seed(cfg, _STREAM_SAMPLE))
    out = _out(cfg)
    write_points_csv(pts, out / "samples.csv")
    write_json({"command": "sample", "config": cfg.echo(), "seed": int(cfg.get("seed"))}, out / "samples.meta.json")
    return out / "samples.csv"


def cmd_eval(cfg: RunConfig) -> Path:
    metrics: dict = {}
    train = _load_data(cfg) if (cfg.get("data.path") or cfg.get("data.generator")) else None
    class_traces = cfg.get("eval.class_traces")
    test_path = cfg.get("eval.test_path")
    test = read_dataset_csv(test_path) if test_path is not None else None
    model = None
    if class_traces is None and (cfg.get("eval.trace") is not None or (Path(cfg.get("out")) / "trace.jsonl").is_file()):
        model = _density_model(cfg, read_trace(_trace_path(cfg, "eval.trace")))

    deltas = cfg.get("eval.deltas")
    if deltas is not None:
        if train is None:
            raise ValueError("MAD needs the training data (data.path or data.generator)")
        if cfg.get("eval.predictive_equals_train"):
            pred, sample_seed = train.points, None
        else:
            if model is None:
                raise FileNotFoundError("MAD needs a trace (eval.trace or <out>/trace.jsonl)")
            sample_seed = _seed(cfg, _STREAM_SAMPLE)
            pred = model.sample(train.n, sample_seed)
        mad_seed = _seed(cfg, _STREAM_MAD)
        N = int(cfg.get("eval.N"))
        rep = mad_delta(train, pred, [float(d) for d in deltas], N, mad_seed).to_dict()
        rep["sample_seed"] = sample_seed
        metrics["mad"] = rep
        if cfg.get("eval.kde_baseline"):
            kde_pts = GaussianKDE(train).sample(train.n, sample_seed if sample_seed is not None else mad_seed)
            metrics["mad_kde"] = mad_delta(train, kde_pts, [float(d) for d in deltas], N, mad_seed).to_dict()

    if test is not None and class_traces is None:
        if model is None:
            raise FileNotFoundError("test log-likelihood needs a trace")
        metrics["test_loglik"] = test_loglik(model, test)
        metrics["n_test"] = test.n

    if class_traces is not None:
        if test is None:
            raise ValueError("accuracy needs eval.test_path")
        clf = Classifier({int(c): _density_model(cfg, read_trace(p)) for c, p in sorted(class_traces.items())})
        metrics["accuracy"] = classification_accuracy(clf, test)
        metrics["n_test"] = test.n

    if not metrics:
        raise ValueError("nothing to evaluate: set eval.deltas, eval.test_path and/or eval.class_traces")
    out = _out(cfg)
    write_json({"command": "eval", "config": cfg.echo(), "seed": int(cfg.get("seed")), "metrics": metrics},
               out / "metrics.json")
    return out / "metrics.json"


def _merged_trace(paths):
    """Pool the retained states of several chains (hyperparameters from the first)."""
    traces = [read_trace(p) for p in paths]
    traces[0].states = [st for t in traces for st in t.states]
    return traces[0]


def cmd_classify(cfg: RunConfig) -> Path:
    """Fit one density per class of a labelled dataset, then label a test set."""
    train = _load_data(cfg)
    if train.labels is None:
        raise ValueError("classify needs a labelled training set")
    out = _out(cfg)
    traces = {c: _fit(pts, cfg, out, f"_class{c}", c) for c, pts in train.by_class().items()}
    test_path = cfg.get("classify.test_path")
    if test_path is None:
        return out
    test = read_dataset_csv(test_path)
    clf = Classifier({c: _density_model(cfg, _merged_trace(p)) for c, p in traces.items()})
    pred = clf.predict(test.points)
    write_dataset_csv(Dataset(test.points, pred), out / "predictions.csv")
    result = {"command": "classify", "config": cfg.echo(), "seed": int(cfg.get("seed")),
              "class_traces": {str(c): [str(q) for q in p] for c, p in traces.items()}, "n_test": test.n}
    if test.labels is not None:
        result["accuracy"] = float(np.mean(pred == test.labels))
    write_json(result, out / "classify.json")
    return out / "predictions.csv"


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "sample": cmd_sample, "eval": cmd_eval,
            "classify": cmd_classify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fgmix", description="Fisher-Gaussian mixture density estimation")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="YAML file of flat dotted keys")
    p.add_argument("--seed", type=int, help="overrides the config seed (unsigned 64-bit)")
    p.add_argument("--out", type=str, help="output directory (overrides config 'out')")
    p.add_argument("--save-latent", action="store_true", help="store latent directions y in the trace")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ValueError("--seed must be an unsigned 64-bit integer")
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(**{"seed": args.seed, "out": args.out,
                                    "fit.save_latent": True if args.save_latent else None})
        result = COMMANDS[args.command](cfg)
    except SamplerError as err:
        print(f"fgmix: sampler aborted: {err}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError, OSError) as err:
        print(f"fgmix: error: {err}", file=sys.stderr)
        return 2
    log.info("wrote %s", result)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
