"""Command-line front end: ``mpclt {mp,limits,simulate,bernstein,verify}``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
numerical error. CSV files use ``.`` decimals, 17 significant digits and LF
line endings; each CSV gets a ``<name>.manifest.json`` sidecar, JSON outputs
embed their manifest under ``"manifest"``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, bernstein
from .acceptance import run_all
from .clt_limits import (
    MomentParams,
    covariance_matrix,
    cov_contour,
    default_contours,
    limiting_mean,
    mean_contour,
)
from .errors import DomainError, MPCLTError
from .functions import builtin
from .mp_core import MPModel, boundary_s, cdf, density, k_function, stieltjes_s
from .rmt_sim import KINDS, SimConfig, run


class ConfigError(Exception):
    pass


@dataclasses.dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list = dataclasses.field(default_factory=list)

    def as_dict(self):
        return dataclasses.asdict(self)


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _num(v) -> str:
    v = float(v) + 0.0  # drops the sign of -0.0
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def _clean(obj):
    """Make ``obj`` strict-JSON: NaN/inf become null, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(obj, path):
    text = json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _write_csv(header, rows, path, manifest: RunManifest):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _num(c) if isinstance(c, float) else c for c in row])
    if path is None:
        sys.stdout.write(buf.getvalue())
        return
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    manifest.outputs.append(str(path))
    manifest.finished = _now()
    _dump_json(manifest.as_dict(), path.with_name(path.name + ".manifest.json"))


def _functions(text):
    names = [t for t in (s.strip() for s in text.split(",")) if t]
    if not names:
        raise ConfigError("no functions given")
    try:
        return [builtin(n) for n in names]
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


# -- commands ----------------------------------------------------------------


def cmd_mp(args):
    if not args.y > 0 or not math.isfinite(args.y):
        raise ConfigError(f"--y must be positive, got {args.y}")
    if args.grid < 2:
        raise ConfigError("--grid must be at least 2")
    model = MPModel(args.y)
    manifest = RunManifest("mp", {"y": args.y, "grid": args.grid}, args.seed, started=_now())
    xs = np.linspace(model.a, model.b, args.grid)
    rows = []
    for x in xs:
        try:
            if model.a < x < model.b:
                s = complex(boundary_s(model, x))
            else:
                s = complex(stieltjes_s(model, complex(x)))
            k = complex(k_function(model, float(x)))
        except MPCLTError:
            s = k = complex(math.nan, math.nan)
        rows.append([float(x), float(density(model, x)), float(cdf(model, x)),
                     s.real, s.imag, k.real, k.imag])
    _write_csv(["x", "density", "cdf", "re_s", "im_s", "re_k", "im_k"], rows, args.out, manifest)


def cmd_limits(args):
    fns = _functions(args.functions)
    if not 0 < args.y < 1:
        raise ConfigError(f"--y must lie in (0, 1) for the limit formulas, got {args.y}")
    try:
        mom = MomentParams(args.kappa1, args.kappa2)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    model = MPModel(args.y)
    cfg = {"y": args.y, "functions": [f.name for f in fns], "kappa1": args.kappa1,
           "kappa2": args.kappa2, "m": args.m}
    manifest = RunManifest("limits", cfg, args.seed, started=_now())
    diag = {}
    means = {f.name: limiting_mean(f, model, mom, diag=diag) for f in fns}
    cov = covariance_matrix(fns, model, mom, diag=diag)
    out = {"y": args.y, "kappa1": args.kappa1, "kappa2": args.kappa2,
           "functions": [f.name for f in fns], "mean": means, "covariance": cov,
           "diagnostics": {"quadrature_max_abs_err": diag.get("max_abs_err", 0.0)}}
    if args.m > 0:
        outer, inner = default_contours(model, args.m)
        approx = {}
        for f in fns:
            eps = bernstein.fit_eps(f, outer.a_l, outer.b_r)
            approx[f.name] = bernstein.corrected(f, outer.a_l, outer.b_r, eps, args.m)
        cdiag = {}
        mean_res = {f.name: mean_contour(approx[f.name], model, mom, outer, cdiag) - means[f.name] for f in fns}
        cov_res = [[cov_contour(approx[f.name], approx[g.name], model, mom, outer, inner, cdiag) - cov[i, j]
                    for j, g in enumerate(fns)] for i, f in enumerate(fns)]
        out["contour_check"] = {"m": args.m, "mean_residual": mean_res, "covariance_residual": cov_res,
                                "imag_residue": max(cdiag.values(), default=0.0)}
    manifest.finished = _now()
    if args.out:
        manifest.outputs.append(str(args.out))
    _dump_json({"manifest": manifest.as_dict(), **out}, args.out)


_SIM_KEYS = {f.name for f in dataclasses.fields(SimConfig)} | {"write_replicates"}


def load_sim_config(path, seed=None):
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _SIM_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("p", "n"):
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")
    write_replicates = bool(raw.pop("write_replicates", True))
    if seed is not None:
        raw["seed"] = seed
    if "dist" in raw and raw["dist"] not in KINDS:
        raise ConfigError(f"unknown dist {raw['dist']!r}; known: {', '.join(KINDS)}")
    try:
        cfg = SimConfig(**raw)
    except (DomainError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, write_replicates


def cmd_simulate(args):
    if not args.config:
        raise ConfigError("simulate needs --config")
    if not args.out:
        raise ConfigError("simulate needs --out (an output directory)")
    cfg, write_reps = load_sim_config(args.config, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict = dataclasses.asdict(cfg)
    cfg_dict["dist"] = cfg.dist.kind
    manifest = RunManifest("simulate", cfg_dict, cfg.seed, started=_now())
    summary = run(cfg)
    if write_reps:
        rows = [[r.index, name, float(val)] for r in summary.replicate_results if r.error is None
                for name, val in r.gn_values.items()]
        _write_csv(["replicate", "function", "gn_value"], rows, out_dir / "replicates.csv",
                   dataclasses.replace(manifest, outputs=[]))
        manifest.outputs.append(str(out_dir / "replicates.csv"))
    manifest.outputs.append(str(out_dir / "summary.json"))
    manifest.finished = _now()
    body = {
        "manifest": manifest.as_dict(),
        "replicates": summary.replicates,
        "rejected": summary.rejected,
        "y_n": cfg.y_n,
        "kappa1": cfg.dist.moments.kappa1,
        "kappa2": cfg.dist.moments.kappa2,
        "functions": [fs.as_dict() for fs in summary.functions],
        "empirical_covariance": summary.empirical_cov,
        "predicted_covariance": summary.predicted_cov,
    }
    _dump_json(body, out_dir / "summary.json")


def cmd_bernstein(args):
    fns = _functions(args.functions)
    try:
        degrees = [int(d) for d in args.degrees.split(",") if d.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --degrees: {exc}") from exc
    if not degrees or min(degrees) < 1:
        raise ConfigError("--degrees must be positive integers")
    if not 0 < args.y < 1:
        raise ConfigError(f"--y must lie in (0, 1), got {args.y}")
    model = MPModel(args.y)
    a_l, b_r = bernstein.default_interval(model.a, model.b)
    manifest = RunManifest("bernstein", {"y": args.y, "functions": [f.name for f in fns],
                                         "degrees": degrees, "grid": args.grid}, args.seed, started=_now())
    x = np.linspace(a_l, b_r, args.grid)
    rows = []
    for f in fns:
        eps = bernstein.fit_eps(f, a_l, b_r)
        exact = f(x)
        for m in degrees:
            plain = np.max(np.abs(bernstein.build(f, a_l, b_r, eps, m)(x) - exact))
            corr = np.max(np.abs(bernstein.corrected(f, a_l, b_r, eps, m)(x) - exact))
            rows.append([f.name, m, float(eps), float(plain), float(corr)])
    _write_csv(["function", "m", "eps", "sup_error", "sup_error_corrected"], rows, args.out, manifest)


def cmd_verify(args):
    manifest = RunManifest("verify", {"level": args.level}, args.seed, started=_now())
    results = run_all(args.level, echo=lambda line: print(line, file=sys.stderr))
    manifest.finished = _now()
    failed = [r for r in results if not r.passed and not r.skipped]
    report = {"manifest": manifest.as_dict(), "level": args.level,
              "passed": not failed, "criteria": [r.as_dict() for r in results]}
    _dump_json(report, args.out)
    return 1 if failed else 0


# -- entry point -------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="mpclt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output path (stdout when omitted)")
        p.add_argument("--seed", type=int, default=None, help="random seed, recorded in the manifest")

    p = sub.add_parser("mp", help="tabulate density, cdf, s and k over the support")
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--grid", type=int, default=101)
    common(p)
    p.set_defaults(func=cmd_mp)

    p = sub.add_parser("limits", help="limiting mean and covariance of G_n(f)")
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--functions", default="poly1,poly2,log")
    p.add_argument("--kappa1", type=float, default=1.0)
    p.add_argument("--kappa2", type=float, default=0.0)
    p.add_argument("--m", type=int, default=128, help="Bernstein degree of the contour cross-check (0 disables)")
    common(p)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("simulate", help="Monte Carlo run from a JSON config")
    p.add_argument("--config", required=False)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bernstein", help="sup-norm Bernstein errors versus degree")
    p.add_argument("--y", type=float, default=0.25)
    p.add_argument("--functions", default="poly3,poly4,log")
    p.add_argument("--degrees", default="16,32,64,128,256")
    p.add_argument("--grid", type=int, default=1000)
    common(p)
    p.set_defaults(func=cmd_bernstein)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"mpclt {args.command}: {exc}", file=sys.stderr)
        return 2
    except (MPCLTError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mpclt {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
