"""Command-line interface.

Subcommands: ``measures``, ``simulate``, ``fit``, ``evidence``, ``forecast``,
``evaluate`` and ``replay``.  Every command except ``replay`` writes a
``<out>.manifest.json`` recording its arguments, config hash, seed and the
SHA-256 of every input and output file.  ``replay`` re-runs a manifest into a
scratch directory and checks that the outputs are byte-identical.

Exit codes: 0 success, 1 replay mismatch, 2 input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as hio
from .evidence import EvidenceConfig, EvidenceError, log_marginal_likelihood, rank_models
from .forecast import FORECAST_COLUMNS, backtest, christoffersen_ind, christoffersen_uc, \
    cls_path, rolling_forecasts
from .io import InputError
from .measures import build_dataset
from .model import VARIANTS, InvalidParameters, ModelParams, table2_params
from .priors import PriorConfig
from .sampler.chain import ChainConfig, NumericalFailure, run_chain
from .simulate import SimConfig, simulate

log = logging.getLogger("hawkessv")

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

SUMMARY_COLUMNS = ("parameter", "mpm", "hpd_lo", "hpd_hi", "if")
EVIDENCE_COLUMNS = ("model", "log_ml", "log_lik", "log_prior", "log_post", "se")
RANKING_COLUMNS = ("rank", "model", "log_ml", "log_bf_vs_best", "se")
BACKTEST_COLUMNS = ("name", "nominal", "n", "hits", "coverage", "lr_uc", "p_uc", "lr_ind",
                    "p_ind")


# ----------------------------------------------------------------------
# config helpers


def _chain_cfg(cfg: dict, seed) -> ChainConfig:
    c = ChainConfig.from_mapping(cfg["chain"])
    return replace(c, seed=int(seed)) if seed is not None else c


def _priors(cfg: dict) -> PriorConfig:
    return PriorConfig.from_mapping(cfg["prior"])


def _sim_params(cfg: dict) -> tuple[SimConfig, int]:
    s = dict(cfg["sim"])
    variant = s.pop("variant", "M2")
    if variant not in VARIANTS:
        raise InputError(f"unknown sim.variant {variant!r}")
    base = table2_params(variant)
    p = ModelParams.from_mapping({**base.as_dict(), **cfg["param"], "variant": variant})
    T = int(s.pop("T", 1000))
    M = int(s.pop("M", 0))
    emit = str(s.pop("emit_intraday", "0")).lower() in ("1", "true", "yes", "on")
    seed = int(s.pop("seed", 0))
    if s:
        raise InputError(f"unknown sim settings: {sorted(s)}")
    return SimConfig(T, p.restricted(), seed, M, emit), seed


def _forecast_settings(cfg: dict) -> dict:
    types = {"n_params": int, "n_particles": int, "n_draws": int, "level": float,
             "window": int, "start": int, "n_days": int}
    out = {}
    for k, v in cfg["forecast"].items():
        if k not in types:
            raise InputError(f"unknown forecast setting {k!r}")
        out[k] = types[k](v)
    return out


# ----------------------------------------------------------------------
# commands (each returns (inputs, outputs, seed))


def cmd_measures(args, cfg):
    skipped = []
    days = hio.read_intraday_dir(args.intraday_dir, args.skip_bad,
                                 on_skip=lambda p, e: skipped.append(p))
    for p in skipped:
        log.warning("skipped malformed day file %s", p.name)
    if not days:
        raise InputError("no input days")
    data, recs = build_dataset(days, args.alpha, args.annualization)
    out = Path(args.out)
    hio.write_dataset_csv(out, data)
    return [args.intraday_dir], [out], None


def cmd_simulate(args, cfg):
    sc, seed = _sim_params(cfg)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
        seed = args.seed
    data, lat, days = simulate(sc)
    pre = args.out
    outs = [Path(f"{pre}_data.csv"), Path(f"{pre}_truth.csv"), Path(f"{pre}_params.txt")]
    hio.write_dataset_csv(outs[0], data)
    hio.write_truth_csv(outs[1], data, lat)
    hio.atomic_write_text(outs[2], sc.params.to_text())
    if days is not None:
        d = Path(f"{pre}_intraday")
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        for day in days:
            hio.write_intraday_csv(d / f"{day.date}.csv", day)
        outs.append(d)
    return [], outs, seed


def cmd_fit(args, cfg):
    data = hio.read_dataset_csv(args.data)
    cc = _chain_cfg(cfg, args.seed)
    chain = run_chain(data, args.model, _priors(cfg), cc)
    pre = args.out
    outs = hio.write_chain(pre, chain)
    p_sum = Path(f"{pre}_summary.csv")
    hio.write_csv(p_sum, SUMMARY_COLUMNS, chain.summary())
    p_lat = Path(f"{pre}_latent.csv")
    hio.write_csv(p_lat, ("date", "V_mean", "V_sd", "dnv_prob"),
                  zip(data.dates, chain.V_mean, chain.V_sd, chain.dnv_prob))
    p_mpm = Path(f"{pre}_mpm.txt")
    hio.atomic_write_text(p_mpm, chain.mpm_params().to_text())
    return [args.data], outs + [p_sum, p_lat, p_mpm], cc.seed


def _evidence_one(a):
    data, model, priors, cc, ec, seed = a
    return log_marginal_likelihood(data, model, priors, cc, ec, seed=seed)


def cmd_evidence(args, cfg):
    data = hio.read_dataset_csv(args.data)
    models = args.models or [args.model]
    for m in models:
        if m not in VARIANTS:
            raise InputError(f"unknown model {m!r}")
    cc = _chain_cfg(cfg, args.seed)
    ec = EvidenceConfig.from_mapping(cfg["evidence"])
    seed = cc.seed
    jobs = [(data, m, _priors(cfg), cc, ec, seed) for m in models]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_evidence_one, jobs))
    else:
        results = [_evidence_one(j) for j in jobs]
    pre = args.out
    p_ev = Path(f"{pre}_evidence.csv")
    hio.write_csv(p_ev, EVIDENCE_COLUMNS, [r.row() for r in results])
    p_rank = Path(f"{pre}_ranking.csv")
    hio.write_csv(p_rank, RANKING_COLUMNS, rank_models(results))
    p_blk = Path(f"{pre}_blocks.csv")
    hio.write_csv(p_blk, ("model", "block", "parameters", "log_ordinate", "se"),
                  [(r.model, k + 1, " ".join(b.names), b.log_ordinate, b.se)
                   for r in results for k, b in enumerate(r.blocks)])
    return [args.data], [p_ev, p_rank, p_blk], seed


def cmd_forecast(args, cfg):
    data = hio.read_dataset_csv(args.data)
    chain = hio.read_chain_csv(args.chain, args.model)
    fs = _forecast_settings(cfg)
    cfg_start, cfg_days = fs.pop("start", None), fs.pop("n_days", None)
    start = args.start if args.start is not None else cfg_start
    n_days = args.n_days if args.n_days is not None else cfg_days
    if start is None:
        raise InputError("forecast needs --start (first forecast day index)")
    seed = 0 if args.seed is None else args.seed
    res = rolling_forecasts(chain, data, start, n_days, seed=seed, **fs)
    pre = args.out
    p_fc = Path(f"{pre}_forecast.csv")
    hio.write_csv(p_fc, FORECAST_COLUMNS, [r.row() for r in res])
    p_plot = Path(f"{pre}_plot.csv")
    obs = [float(data.r[start + i]) if start + i < len(data) else None for i in range(len(res))]
    hio.write_csv(p_plot, ("date", "observed", "mean", "var", "skew", "kurt", "jump_prob",
                           "cls_increment_vs_none"),
                  [(r.date, o, r.moments.mean, r.moments.variance, r.moments.skewness,
                    r.moments.kurtosis, r.jump_prob, r.logscore) for r, o in zip(res, obs)])
    return [args.data, args.chain], [p_fc, p_plot], seed


def _read_forecasts(path):
    rows = hio.read_csv(path, FORECAST_COLUMNS)
    return [{c: (r[c] if c == "date" else float(r[c]) if r[c] != "" else math.nan)
             for c in FORECAST_COLUMNS} for r in rows]


def cmd_evaluate(args, cfg):
    pre = args.out
    inputs, outs = [], []
    if args.hits:
        rows = hio.read_csv(args.hits, ("hit",))
        try:
            h = np.array([int(r["hit"]) for r in rows])
        except ValueError as exc:
            raise InputError(f"{args.hits}: hits must be integers") from exc
        reps = [christoffersen_uc(h, args.level, "uc"), christoffersen_ind(h, "ind")]
        inputs.append(args.hits)
    else:
        if not (args.forecasts and args.data):
            raise InputError("evaluate needs --hits, or a forecast CSV and --data")
        fc = _read_forecasts(args.forecasts)
        data = hio.read_dataset_csv(args.data)
        idx = {d: i for i, d in enumerate(data.dates)}
        try:
            y = np.array([data.r[idx[r["date"]]] for r in fc])
        except KeyError as exc:
            raise InputError(f"forecast date {exc} not in the observed data") from exc
        reps = backtest(fc, y, args.level)
        inputs += [args.forecasts, args.data]
        if args.compare:
            alt = _read_forecasts(args.compare)
            if [r["date"] for r in alt] != [r["date"] for r in fc]:
                raise InputError("compared forecasts cover different dates")
            path = cls_path([r["logscore"] for r in fc], [r["logscore"] for r in alt])
            p_cls = Path(f"{pre}_cls.csv")
            hio.write_csv(p_cls, ("date", "cls"), zip([r["date"] for r in fc], path))
            outs.append(p_cls)
            inputs.append(args.compare)
    p_bt = Path(f"{pre}_backtest.csv")
    hio.write_csv(p_bt, BACKTEST_COLUMNS, [r.row() for r in reps])
    outs.insert(0, p_bt)
    return inputs, outs, None


COMMANDS = {"measures": cmd_measures, "simulate": cmd_simulate, "fit": cmd_fit,
            "evidence": cmd_evidence, "forecast": cmd_forecast, "evaluate": cmd_evaluate}


# ----------------------------------------------------------------------
# replay


def _retarget(argv: list, new_out: str) -> list:
    out = list(argv)
    for i, a in enumerate(out):
        if a == "--out":
            out[i + 1] = new_out
        elif a.startswith("--out="):
            out[i] = f"--out={new_out}"
    return out


def cmd_replay(args) -> int:
    man = hio.RunManifest.read(args.manifest)
    for p, h in man.inputs.items():
        if not Path(p).exists() or hio.file_sha256(p) != h:
            log.error("input %s is missing or has changed", p)
            return EXIT_INPUT
    old_out = _out_of(man.argv)
    with tempfile.TemporaryDirectory() as tmp:
        new_out = str(Path(tmp) / Path(old_out).name)
        code = main(_retarget(man.argv, new_out), _manifest=False)
        if code != EXIT_OK:
            return code
        bad = []
        for p, h in man.outputs.items():
            q = new_out + p[len(old_out):] if p.startswith(old_out) else p
            if not Path(q).exists() or hio.file_sha256(q) != h:
                bad.append(p)
    if bad:
        for p in bad:
            print(f"MISMATCH {p}")
        return EXIT_MISMATCH
    print(f"replay OK: {len(man.outputs)} outputs identical")
    return EXIT_OK


def _out_of(argv: list) -> str:
    for i, a in enumerate(argv):
        if a == "--out":
            return argv[i + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    raise InputError("manifest argv has no --out")


# ----------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hawkessv", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=False, seed=True):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", required=True, help="output path or prefix")
        if seed:
            p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        if model:
            p.add_argument("--model", default="MF", choices=VARIANTS)
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("measures", help="daily dataset from intraday price files")
    p.add_argument("intraday_dir")
    p.add_argument("--alpha", type=float, default=0.001, help="jump-test size")
    p.add_argument("--annualization", type=float, default=252.0)
    p.add_argument("--skip-bad", action="store_true", help="skip malformed day files")
    common(p, seed=False)

    p = sub.add_parser("simulate", help="simulate data and latent truth")
    common(p)

    p = sub.add_parser("fit", help="run the MCMC sampler")
    p.add_argument("data")
    common(p, model=True)

    p = sub.add_parser("evidence", help="log marginal likelihoods and model ranking")
    p.add_argument("data")
    p.add_argument("--models", nargs="+", choices=VARIANTS)
    common(p, model=True)

    p = sub.add_parser("forecast", help="one-step-ahead predictive distributions")
    p.add_argument("data")
    p.add_argument("--chain", required=True, help="chain CSV from fit")
    p.add_argument("--start", type=int, help="index of the first forecast day")
    p.add_argument("--n-days", type=int, dest="n_days")
    common(p, model=True)

    p = sub.add_parser("evaluate", help="coverage and VaR backtests")
    p.add_argument("forecasts", nargs="?")
    p.add_argument("--data", help="observed dataset CSV")
    p.add_argument("--hits", help="CSV with a 0/1 'hit' column")
    p.add_argument("--level", type=float, default=0.95,
                   help="HPP level with forecasts, hit rate with --hits")
    p.add_argument("--compare", help="alternative forecast CSV for the CLS path")
    common(p, seed=False)

    p = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    p.add_argument("manifest")
    return ap


def _setup_logging() -> None:
    level = os.environ.get("HSV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None, _manifest: bool = True) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if args.command == "replay":
            return cmd_replay(args)
        cfg = hio.load_config(args.config)
        t0 = time.time()
        inputs, outputs, seed = COMMANDS[args.command](args, cfg)
        if args.config:
            inputs = [args.config] + list(inputs)
        if _manifest:
            man = hio.RunManifest(args.command, argv, hio.config_hash(cfg), seed,
                                  hio.hash_paths(inputs), hio.hash_paths(outputs),
                                  round(time.time() - t0, 3), hio.module_versions())
            man.write(f"{args.out}.manifest.json")
        return EXIT_OK
    except (InputError, InvalidParameters, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, EvidenceError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
