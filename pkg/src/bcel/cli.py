"""Command-line experiment runner.

Subcommands ``run``, ``compare``, ``replicate`` and ``simulate`` read JSON
experiment configs (see :mod:`bcel.experiments`) and write CSV outputs plus a
``manifest.json`` from which the run can be repeated byte for byte::

    python -m bcel.cli run --config normal.json --out runs/normal
    python -m bcel.cli run --config runs/normal/manifest.json --out runs/again

Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .data import save_dataset
from .el import DomainError
from .experiments import (STREAM_METHOD, STREAM_REPLICATE, ConfigError, Experiment,
                          ExperimentConfig)
from .mathfn import rng_stream
from .samplers import SamplerError, posterior_summary, write_summary_csv
from .study import replicate_study

__all__ = ["main", "cmd_run", "cmd_compare", "cmd_replicate", "cmd_simulate"]

MANIFEST_VERSION = 1
EXIT_CONFIG, EXIT_NUMERIC = 2, 3
HIST_BINS = 40


def _versions():
    return {"bcel": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _write_manifest(out: Path, command, configs, files):
    body = {"manifest_version": MANIFEST_VERSION, "command": command,
            "configs": [c.to_dict() for c in configs],
            "seeds": [c.seed for c in configs],
            "versions": _versions(), "files": sorted(files)}
    (out / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def load_configs(path):
    """Configs in a config file or in a manifest written by a previous run."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON: {err}") from None
    if isinstance(raw, dict) and "manifest_version" in raw:
        return [ExperimentConfig.from_dict(c) for c in raw["configs"]]
    return [ExperimentConfig.from_dict(raw)]


def _out_dir(out, cfg):
    path = Path(out or cfg.out or "bcel-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(cfg: ExperimentConfig, out=None, threads: int = 1) -> Path:
    """Infer from one dataset; writes dataset, samples, summary and manifest."""
    exp = Experiment(cfg)
    path = _out_dir(out, cfg)
    data, simulated = exp.load_data()
    files = ["samples.csv", "summary.csv"]
    if simulated:
        save_dataset(path / "dataset.txt", data)
        files.append("dataset.txt")
    sample = exp.run(cfg.method, rng_stream(cfg.seed, STREAM_METHOD), data, threads)
    sample.to_csv(path / "samples.csv")
    write_summary_csv(path / "summary.csv", posterior_summary(sample))
    _write_manifest(path, "run", [cfg], files)
    return path


def _labels(cfgs):
    names = [c.method for c in cfgs]
    if len(set(names)) < len(names):
        names = [f"{n}_{i + 1}" for i, n in enumerate(names)]
    return names


def cmd_compare(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig, out=None,
                threads: int = 1) -> Path:
    """Run two methods on the same data and tabulate their summaries."""
    if cfg_a.model != cfg_b.model:
        raise ConfigError(f"models differ: {cfg_a.model} vs {cfg_b.model}")
    exps = [Experiment(cfg_a), Experiment(cfg_b)]
    loaded = [e.load_data() for e in exps]
    if not _same_data(loaded[0][0], loaded[1][0]):
        raise ConfigError("the two configs do not describe the same dataset")
    path = _out_dir(out, cfg_a)
    data = loaded[0][0]
    labels = _labels([cfg_a, cfg_b])
    files = ["compare_summary.csv"]
    if loaded[0][1]:
        save_dataset(path / "dataset.txt", data)
        files.append("dataset.txt")
    samples = [e.run(e.config.method, rng_stream(e.config.seed, STREAM_METHOD), data, threads)
               for e in exps]
    summaries = [posterior_summary(s) for s in samples]
    keys = ("mean", "sd", "median", "lower", "upper", "ess")
    with open(path / "compare_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter"] + [f"{k}_{lab}" for lab in labels for k in keys])
        for j, name in enumerate(exps[0].prior.names):
            w.writerow([name] + [repr(float(s[j][k])) for s in summaries for k in keys])
    for lab, s in zip(labels, samples):
        s.to_csv(path / f"samples_{lab}.csv")
        files.append(f"samples_{lab}.csv")
    _write_histograms(path, labels, samples, exps[0].prior.names)
    files += [f"hist_{lab}.csv" for lab in labels]
    _write_manifest(path, "compare", [cfg_a, cfg_b], files)
    return path


def _same_data(a, b):
    if type(a) is not type(b):
        return False
    if hasattr(a, "alleles"):
        return (a.scenario == b.scenario and np.array_equal(a.alleles, b.alleles)
                and np.array_equal(a.demes, b.demes))
    return np.array_equal(a.values, b.values)


def _write_histograms(path, labels, samples, names):
    """Weighted density on common bins, one file per method."""
    for j, name in enumerate(names):
        live = [s.params[s.weights() > 0, j] for s in samples]
        lo = min(float(np.min(v)) for v in live)
        hi = max(float(np.max(v)) for v in live)
        if not hi > lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, HIST_BINS + 1)
        for lab, s in zip(labels, samples):
            dens, _ = np.histogram(s.params[:, j], bins=edges,
                                   weights=s.normalized_weights(), density=True)
            mode = "w" if j == 0 else "a"
            with open(path / f"hist_{lab}.csv", mode, newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                if j == 0:
                    w.writerow(["parameter", "bin_lo", "bin_hi", "density"])
                for a, b, d in zip(edges[:-1].tolist(), edges[1:].tolist(), dens.tolist()):
                    w.writerow([name, repr(a), repr(b), repr(d)])


def cmd_replicate(cfg: ExperimentConfig, R: int | None = None, out=None,
                  threads: int = 1) -> Path:
    """Replicate study at the configured truth; writes metrics CSV and text."""
    if cfg.data.source != "simulate":
        raise ConfigError("replicate needs a simulated data source (known truth)")
    exp = Experiment(cfg)
    path = _out_dir(out, cfg)
    R = cfg.replicate.R if R is None else int(R)
    if R < 1:
        raise ConfigError("R must be at least 1")
    methods = list(cfg.replicate.methods or [cfg.method])
    table = replicate_study(rng_stream(cfg.seed, STREAM_REPLICATE), exp.truth,
                            exp.study(methods, threads), R)
    table.to_csv(path / "metrics.csv")
    (path / "metrics.txt").write_text(table.to_text() + "\n")
    with open(path / "failures.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "replicate", "error"])
        w.writerows(table.failures)
    _write_manifest(path, "replicate", [cfg], ["metrics.csv", "metrics.txt", "failures.csv"])
    return path


def cmd_simulate(cfg: ExperimentConfig, out=None) -> Path:
    """Write the configured pseudo-observed dataset."""
    if cfg.data.source != "simulate":
        raise ConfigError("simulate needs a simulated data source")
    exp = Experiment(cfg)
    path = _out_dir(out, cfg)
    data, _ = exp.load_data()
    save_dataset(path / "dataset.txt", data)
    _write_manifest(path, "simulate", [cfg], ["dataset.txt"])
    return path


def _parser():
    p = argparse.ArgumentParser(prog="bcel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "sample one posterior"),
                      ("compare", "two methods on the same data"),
                      ("replicate", "Monte Carlo replicate study"),
                      ("simulate", "write a pseudo-observed dataset")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", action="append", required=True,
                       help="JSON config or manifest (twice for compare)")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--threads", type=int, default=1, help="worker cap")
        s.add_argument("--out", help="output directory")
        if name == "replicate":
            s.add_argument("-R", "--replicates", type=int, help="override replicate.R")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfgs = [c.with_seed(args.seed) for path in args.config for c in load_configs(path)]
        if args.command == "compare":
            if len(cfgs) != 2:
                raise ConfigError("compare needs exactly two configs")
            path = cmd_compare(cfgs[0], cfgs[1], args.out, args.threads)
        else:
            if len(cfgs) != 1:
                raise ConfigError(f"{args.command} takes one config")
            if args.command == "run":
                path = cmd_run(cfgs[0], args.out, args.threads)
            elif args.command == "replicate":
                path = cmd_replicate(cfgs[0], args.replicates, args.out, args.threads)
            else:
                path = cmd_simulate(cfgs[0], args.out)
    except ConfigError as err:
        print(f"bcel: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (SamplerError, DomainError, FloatingPointError, np.linalg.LinAlgError) as err:
        print(f"bcel: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"bcel: wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
