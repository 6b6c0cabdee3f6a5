"""Command-line interface: compare user data, run benchmarks, calibrate p-values.

Subcommands
-----------
compare    run one comparison on user-supplied data and write a JSON result
bench      run seeded Monte-Carlo trials of a registry problem, write metrics CSV
calibrate  collect null p-values of a two-model problem, write an ECDF CSV

Input samples are CSV files (rows are observations, columns are dimensions,
no header). Density models for the KSD kinds are JSON specs (file path or
inline JSON) of the built-in families, or ``plugin:module:function`` dotted
references to an importable score function.
"""

from __future__ import annotations

import argparse
import importlib
import json
import sys

import numpy as np

from .comparison import DensityModel, SampleModel, rel_multi, rel_pair, rel_psi
from .discrepancy import DiscrepancyKind
from .harness import (
    RunConfig,
    comparison_to_dict,
    run_bench,
    run_calibrate,
    write_calibration_csv,
    write_metrics_csv,
    write_result_json,
)
from .kernels import GAUSSIAN, IMQ, KernelSpec
from .models import (
    GaussianRbmSpec,
    GaussianSpec,
    MixtureSpec,
    available_problems,
    gaussian_score,
    mixture_score,
    rbm_score,
)


class CliError(Exception):
    """User-facing configuration or input error; exits with code 2."""


def _load_csv(path: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read sample file {path!r}: {exc}") from exc
    if not np.isfinite(data).all():
        raise CliError(f"sample file {path!r} contains non-finite values")
    return data


def _density_from_dict(spec: dict):
    kind = spec.get("type")
    if kind == "gaussian":
        g = GaussianSpec(spec["mean"], spec.get("cov", 1.0))
        return lambda x: gaussian_score(g, x)
    if kind == "mixture":
        comps = [GaussianSpec(c["mean"], c.get("cov", 1.0)) for c in spec["components"]]
        m = MixtureSpec(spec["weights"], comps)
        return lambda x: mixture_score(m, x)
    if kind == "rbm":
        r = GaussianRbmSpec(spec["B"], spec["b"], spec["c"])
        return lambda y: rbm_score(r, y)
    raise CliError(f"unknown density type {kind!r}; expected gaussian, mixture, or rbm")


def _parse_model(arg: str, kind: DiscrepancyKind):
    if kind.is_mmd:
        return SampleModel(data=_load_csv(arg), name=arg)
    if arg.startswith("plugin:"):
        try:
            _, module, attr = arg.split(":", 2)
            fn = getattr(importlib.import_module(module), attr)
        except (ValueError, ImportError, AttributeError) as exc:
            raise CliError(f"cannot load score plugin {arg!r}: {exc}") from exc
        return DensityModel(score=fn, name=arg)
    if arg.lstrip().startswith("{"):
        text = arg
    else:
        try:
            with open(arg) as fh:
                text = fh.read()
        except OSError as exc:
            raise CliError(f"cannot read density spec {arg!r}: {exc}") from exc
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON density spec {arg!r}: {exc}") from exc
    return DensityModel(score=_density_from_dict(spec), name=arg)


def _parse_params(items) -> dict:
    params: dict = {}
    for item in items or []:
        if "=" not in item:
            raise CliError(f"--param expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value: object = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        params[key] = value
    return params


def _kernel_request(settings: dict):
    bandwidth = settings["bandwidth"]
    if bandwidth == "median":
        if settings["kernel"] == IMQ:
            raise CliError("the median bandwidth rule applies to the gaussian kernel only")
        return "median"
    try:
        bandwidth = float(bandwidth)
    except (TypeError, ValueError):
        raise CliError(f"--bandwidth must be 'median' or a number, got {bandwidth!r}") from None
    if settings["kernel"] == IMQ:
        return KernelSpec(family=IMQ, imq_c=settings["imq_c"], imq_beta=settings["imq_beta"])
    return KernelSpec(family=GAUSSIAN, bandwidth=bandwidth)


_COMMON_DEFAULTS = {
    "test": "relpsi",
    "kind": "mmd",
    "alpha": 0.05,
    "rho": 0.5,
    "seed": 0,
    "bandwidth": "median",
    "kernel": GAUSSIAN,
    "imq_c": 1.0,
    "imq_beta": -0.5,
    "jobs": 1,
    "out": None,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    # defaults stay None so explicit flags can override a --config file
    parser.add_argument("--test", default=None, choices=["relpsi", "relmulti", "relpair", "relpsi-fixed"])
    parser.add_argument("--kind", default=None, choices=[k.value for k in DiscrepancyKind])
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--rho", type=float, default=None, help="testing split fraction for relmulti")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--bandwidth", default=None, help="'median' or a positive number")
    parser.add_argument("--kernel", default=None, choices=[GAUSSIAN, IMQ])
    parser.add_argument("--imq-c", type=float, default=None)
    parser.add_argument("--imq-beta", type=float, default=None)
    parser.add_argument("--out", default=None, help="output file path")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in config file {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"config file {path!r} must hold a JSON object")
    return data


def _settings(args, file_cfg: dict, extra_defaults: dict | None = None) -> dict:
    """Merge precedence: explicit flag > config file entry > default."""
    merged = dict(_COMMON_DEFAULTS)
    merged.update(extra_defaults or {})
    for key in merged:
        if key in file_cfg and file_cfg[key] is not None:
            merged[key] = file_cfg[key]
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relfit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    cmp_p = sub.add_parser("compare", help="compare candidate models on user data")
    cmp_p.add_argument("--reference", required=True, help="reference sample CSV")
    cmp_p.add_argument(
        "--model",
        action="append",
        required=True,
        help="candidate model: sample CSV (mmd kinds) or density JSON / plugin ref (ksd kinds); repeatable",
    )
    _add_common(cmp_p)

    bench_p = sub.add_parser("bench", help="Monte-Carlo benchmark of a registry problem")
    bench_p.add_argument("--config", default=None, help="JSON run-config file; flags override its fields")
    bench_p.add_argument("--problem", default=None, help=f"one of: {', '.join(available_problems())}")
    bench_p.add_argument("--param", action="append", help="problem parameter key=value; repeatable")
    bench_p.add_argument("--trials", type=int, default=None)
    bench_p.add_argument("--n", type=int, nargs="+", default=None, help="sample size(s); one CSV row each")
    bench_p.add_argument("--jobs", type=int, default=None)
    _add_common(bench_p)

    cal_p = sub.add_parser("calibrate", help="null p-value calibration of a two-model problem")
    cal_p.add_argument("--config", default=None, help="JSON run-config file; flags override its fields")
    cal_p.add_argument("--problem", default=None)
    cal_p.add_argument("--param", action="append", help="problem parameter key=value; repeatable")
    cal_p.add_argument("--trials", type=int, default=None)
    cal_p.add_argument("--n", type=int, default=None)
    cal_p.add_argument("--jobs", type=int, default=None)
    _add_common(cal_p)

    return parser


def _cmd_compare(args) -> int:
    cfg = _settings(args, {})
    kind = DiscrepancyKind.parse(cfg["kind"])
    if len(args.model) < 2:
        raise CliError("need at least two --model arguments")
    reference = _load_csv(args.reference)
    models = [_parse_model(m, kind) for m in args.model]
    spec = _kernel_request(cfg)
    alpha, seed = cfg["alpha"], cfg["seed"]
    try:
        if cfg["test"] == "relpair":
            result = rel_pair(models[0], models[1], reference, spec, kind, alpha, seed=seed)
        elif cfg["test"] == "relmulti":
            result = rel_multi(models, reference, spec, kind, alpha, cfg["rho"], seed=seed)
        elif cfg["test"] == "relpsi-fixed":
            eta = np.zeros(len(models))
            eta[0], eta[1] = 1.0, -1.0
            result = rel_psi(models, reference, spec, kind, alpha, fixed_eta=eta, seed=seed)
        else:
            result = rel_psi(models, reference, spec, kind, alpha, seed=seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    payload = comparison_to_dict(result)
    if cfg["out"]:
        write_result_json(cfg["out"], result)
    else:
        print(json.dumps(payload, indent=2))

    if cfg["test"] == "relpair":
        verdict = "worse" if payload["reject"] else "indecisive"
        print(f"model 1 vs model 2: statistic={payload['statistic']:.6g} "
              f"threshold={payload['threshold']:.6g} -> {verdict}", file=sys.stderr)
    else:
        print(f"selected reference: model {payload['selected']} "
              f"({models[payload['selected']].name})", file=sys.stderr)
        for i, model in enumerate(models):
            if i == payload["selected"]:
                continue
            verdict = "worse" if payload["decisions"][i] else "indecisive"
            print(f"  model {i} ({model.name}): p={payload['pvalues'][i]:.4g} -> {verdict}",
                  file=sys.stderr)
    return 0


def _make_config(args, file_cfg: dict, extra_defaults: dict) -> tuple[RunConfig, dict]:
    settings = _settings(args, file_cfg, extra_defaults)
    if settings.get("problem") is None:
        raise CliError("a problem name is required (--problem or a config file entry)")
    params = dict(file_cfg.get("params", {}))
    params.update(_parse_params(args.param))
    ns = settings["n"] if isinstance(settings["n"], (list, tuple)) else [settings["n"]]
    bandwidth = settings["bandwidth"]
    if bandwidth != "median":
        try:
            bandwidth = float(bandwidth)
        except (TypeError, ValueError):
            raise CliError(f"--bandwidth must be 'median' or a number, got {bandwidth!r}") from None
    cfg = RunConfig(
        problem=settings["problem"],
        params=params,
        test=settings["test"],
        kind=settings["kind"],
        kernel=settings["kernel"],
        bandwidth=bandwidth,
        imq_c=settings["imq_c"],
        imq_beta=settings["imq_beta"],
        alpha=settings["alpha"],
        trials=int(settings["trials"]),
        n=int(ns[0]),
        rho=settings["rho"],
        seed=int(settings["seed"]),
        jobs=int(settings["jobs"]),
        out=settings["out"],
    )
    try:
        cfg.validate()
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from exc
    settings["ns"] = [int(n) for n in ns]
    return cfg, settings


def _cmd_bench(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg, settings = _make_config(args, file_cfg, {"problem": None, "trials": 100, "n": [500]})
    try:
        rows = run_bench(cfg, ns=settings["ns"])
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from exc
    if cfg.out:
        write_metrics_csv(cfg.out, rows)
        print(f"wrote {len(rows)} row(s) to {cfg.out}", file=sys.stderr)
    else:
        for row in rows:
            print(json.dumps(row))
    return 0


def _cmd_calibrate(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg, _ = _make_config(args, file_cfg, {"problem": None, "trials": 500, "n": 1000})
    try:
        pvals, ks = run_calibrate(cfg)
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from exc
    if cfg.out:
        write_calibration_csv(cfg.out, pvals)
    print(f"kolmogorov_distance={ks:.6f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_calibrate(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
