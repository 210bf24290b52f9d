"""Command-line entry point: ``skewprod <subcommand> --config FILE [--seed N] [--outdir D]``.

Each run writes ``<outdir>/report.json`` and ``<outdir>/<experiment>.csv``
(plus plot-data CSVs for some experiments).  Failures exit nonzero and
print a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import engine
from .config import EXPERIMENTS, ConfigError, PreconditionError, RunConfig, check_preconditions, parse_config, serialize
from .experiments import (
    ExperimentRecord,
    clt_experiment,
    drift_experiment,
    excursion_trend,
    graph_equivariance,
    intermingled_scan,
    pooled_occupation,
    pullback_vs_forward,
    synchronization_experiment,
)
from .io import write_csv, write_json
from .lyapunov import classify_regime, minimality_check
from .measures import BinnedMeasure, krylov_bogolyubov, lyapunov_vs_measure, noisy_transfer_matrix
from .symbols import sample_word

SCHEMA = "skewprod.report/1"
WORKERS_ENV = "SKEWPROD_WORKERS"

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3


def _build_id() -> str:
    try:
        return f"artifact-{metadata.version('artifact')}"
    except metadata.PackageNotFoundError:
        return "artifact-unknown"


# -- plot data ------------------------------------------------------------------

PLOT_STYLES = {
    "timeseries": ("step", "x"),
    "histogram": ("bin_left", "bin_right", "density"),
    "cdf": ("a", "empirical", "theoretical"),
}


def emit_plot_data(record: ExperimentRecord, style: str, outdir) -> Path:
    """Write ``<outdir>/<experiment>_<style>.csv`` with the style's fixed header."""
    if style not in PLOT_STYLES:
        raise ValueError(f"unknown plot style {style!r}")
    if not record.rows:
        raise ValueError("empty record")
    cols = record.columns
    if style == "timeseries":
        if not {"step", "value"} <= set(cols):
            raise ValueError(f"record {record.experiment!r} is not a time series")
        rows = zip(record.column("step").tolist(), record.column("value").tolist())
    elif style == "histogram":
        if not {"cell_kind", "left", "right", "mass"} <= set(cols):
            raise ValueError(f"record {record.experiment!r} is not a binned measure")
        rows = [(r[1], r[2], r[3] / (r[2] - r[1])) for r in record.rows if str(r[0]).startswith("bin_")]
    else:
        if not {"a", "empirical", "theoretical"} <= set(cols):
            raise ValueError(f"record {record.experiment!r} has no CDF columns")
        rows = zip(*(record.column(c).tolist() for c in ("a", "empirical", "theoretical")))
    return write_csv(Path(outdir) / f"{record.experiment}_{style}.csv", PLOT_STYLES[style], rows)


# -- drivers --------------------------------------------------------------------


def _measure_record(name, m: BinnedMeasure, params, summary) -> ExperimentRecord:
    return ExperimentRecord(name, params, ("cell_kind", "left", "right", "mass"), list(m.to_rows()), {}, summary)


def _stationary(cfg: RunConfig, fam, p, workers):
    B = cfg.bins
    m0 = {"lebesgue": BinnedMeasure.lebesgue, "delta0": BinnedMeasure.delta0, "delta1": BinnedMeasure.delta1}
    if p["initial"] not in m0:
        raise ConfigError(f"unknown initial measure {p['initial']!r}")
    start = m0[p["initial"]](B)
    if p["noise_epsilon"] > 0.0:
        T = noisy_transfer_matrix(fam, B, p["noise_epsilon"], p["quadrature_nodes"])
        v = start.vector
        acc = np.zeros_like(v)
        for _ in range(p["iterations"]):
            acc += v
            v = T @ v
        mbar = BinnedMeasure.from_vector(acc / p["iterations"])
        residual = 0.5 * float(np.abs(T @ mbar.vector - mbar.vector).sum())
    else:
        mbar, _, res = krylov_bogolyubov(start, fam, p["iterations"], p["metric"], p["record_every"])
        residual = float(res[-1])
    summary = {
        "final_residual": residual,
        "atom0": mbar.atom0,
        "atom1": mbar.atom1,
        "interior_mass_off_boundary_bins": mbar.interior_mass(1),
        "fiber_exponent": lyapunov_vs_measure(fam, mbar),
    }
    return _measure_record("stationary", mbar, {**p, "bins": B}, summary)


def _timeseries(cfg, fam, p, workers):
    word = sample_word(fam.probabilities, p["steps"], cfg.seed, 0)
    orbit = engine.forward_orbit(fam, word, p["x0"], p["steps"], "logit", p["stride"])
    rows = [(int(s), float(engine.from_logit(y, "plain")), float(y)) for s, y in orbit.rows()]
    return ExperimentRecord("timeseries", dict(p), ("step", "value", "logit"), rows,
                            {"seed": cfg.seed, "streams": {"words": [0, 0]}})


def _run_experiment(cfg: RunConfig, workers):
    fam, p, seed = cfg.family, cfg.params, cfg.seed
    name = cfg.experiment
    if name == "classify":
        rep = classify_regime(fam, p["zero_tolerance"])
        return ExperimentRecord(name, dict(p), ("L0", "L1", "regime"), [(rep.L0, rep.L1, rep.regime.value)])
    if name == "minimality":
        res = minimality_check(fam, p["Q"], p["tau"])
        return ExperimentRecord(name, dict(p), ("verdict", "clause", "Q", "tau"), [(res.verdict, res.clause, res.Q, res.tau)],
                                {}, res.details)
    if name == "stationary":
        return _stationary(cfg, fam, p, workers)
    if name == "basin-scan":
        return intermingled_scan(fam, p["cylinder_length"], p["subdivisions"], p["samples_per_cell"], p["horizon"],
                                 p["delta"], seed, workers)
    if name == "graph":
        return graph_equivariance(fam, p["words"], p["horizon"], p["tolerance"], seed, workers)
    if name == "sync":
        return synchronization_experiment(fam, p["pair_count"], [(p["x0"], p["y0"])], p["horizon"], p["stride"],
                                          seed, workers)
    if name == "onoff":
        ind = None if p["indicator"] == "auto" else p["indicator"]
        return pooled_occupation(fam, p["orbits"], p["x0"], p["horizon"], p["beta"], p["checkpoints"], ind, seed,
                                 workers)
    if name == "excursions":
        from .interval_maps import logit

        return excursion_trend(fam, p["orbits"], p["x0"], p["horizons"], logit(p["beta"]), seed, workers)
    if name == "clt":
        return clt_experiment(fam, p["x0"], p["n"], p["samples"], p["a_grid"], seed, workers)
    if name == "pullback":
        return pullback_vs_forward(fam, p["x0"], p["n_grid"], p["words_per_n"], p["beta"], p["window"], seed, workers)
    if name == "drift":
        return drift_experiment(fam, p["x0"], p["samples"], p["horizon"], p["delta"], seed, workers)
    if name == "timeseries":
        return _timeseries(cfg, fam, p, workers)
    raise ConfigError(f"unknown experiment {name!r}")


_PLOTS = {"stationary": "histogram", "clt": "cdf", "timeseries": "timeseries"}


def run(cfg: RunConfig, workers: int | None = None) -> int:
    """Execute a validated configuration and write its outputs; returns the exit status."""
    check_preconditions(cfg)
    record = _run_experiment(cfg, workers if workers is not None else cfg.workers)
    outdir = Path(cfg.outdir)
    record.to_csv(outdir / f"{cfg.experiment}.csv")
    if cfg.experiment in _PLOTS:
        emit_plot_data(record, _PLOTS[cfg.experiment], outdir)
    regime = classify_regime(cfg.family, minimality=True)
    report = {
        "schema": SCHEMA,
        "build": _build_id(),
        "experiment": cfg.experiment,
        "config": serialize(cfg),
        "family": {"f1": cfg.f1.to_expr(), "f2": cfg.f2.to_expr(), "probabilities": list(cfg.family.probabilities)},
        "regime": regime.to_dict(),
        "parameters": cfg.params,
        "provenance": {"seed": cfg.seed, **record.provenance},
        "summary": _jsonable(record.summary),
        "outputs": sorted(p.name for p in outdir.glob("*.csv")),
    }
    write_json(outdir / "report.json", report)
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def _error(kind, message, status, line=None, outdir=None):
    record = {"error": kind, "message": message, "status": status}
    if line is not None:
        record["line"] = line
    print(json.dumps(record), file=sys.stderr)
    if outdir is not None:
        try:
            write_json(Path(outdir) / "error.json", record)
        except OSError:
            pass
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skewprod", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--seed", type=int, help="override [base] seed")
        p.add_argument("--outdir", help="override [output] dir")
        p.add_argument("--workers", type=int, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)
    try:
        cfg = parse_config(text, experiment=args.command)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG, exc.line, args.outdir)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.outdir is not None:
        cfg = dataclasses.replace(cfg, outdir=args.outdir)
    try:
        return run(cfg, args.workers)
    except PreconditionError as exc:
        return _error("precondition", str(exc), EXIT_PRECONDITION, outdir=cfg.outdir)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG, exc.line, cfg.outdir)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
