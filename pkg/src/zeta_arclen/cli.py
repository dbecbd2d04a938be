"""Command-line driver: ``zeta-arclen {eval,arclength,simulate,predict,compare,verify}``.

Exit codes: 0 success, 2 invalid configuration, 3 numeric-consistency
failure (including failed acceptance criteria), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import acceptance
from . import riemann_core as rc
from . import special_fn as sf
from . import stochastic_model as sm
from .records import (
    CriticalPointCache,
    ResultRecord,
    config_echo,
    default_cache_dir,
    record_to_csv,
    table_to_csv,
    write_text,
)
from .window import T_MIN, ConsistencyError, DomainError, EvalWindow, QuadratureError

log = logging.getLogger("zeta_arclen")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("eval", "arclength", "simulate", "predict", "compare", "verify")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    T: float = 1e6
    U: float = 1.0
    samples: int | None = None
    seed: int = acceptance.DEFAULT_SEED
    quad_tol: float | None = None
    format: str = "json"
    out: str | None = None
    cache: str | None = None
    grid: int = 101
    workers: int = 1
    phi2: bool = False
    inject_fault: str | None = None

    def __post_init__(self):
        def bad(msg):
            raise ConfigError(msg)

        if self.command not in COMMANDS:
            bad(f"command must be one of {COMMANDS}, got {self.command!r}")
        if not (math.isfinite(self.T) and self.T >= T_MIN):
            bad(f"T >= {T_MIN} required, got {self.T!r}")
        if not (0 < self.U <= math.sqrt(self.T)):
            bad(f"0 < U <= sqrt(T) required, got U={self.U!r}")
        if self.samples is not None and self.samples < 2:
            bad(f"samples >= 2 required, got {self.samples!r}")
        if self.command == "simulate" and self.samples is not None and self.samples < 1000:
            bad("simulate needs samples >= 1000 for the distribution check")
        if not 0 <= self.seed < 2**64:
            bad(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.quad_tol is not None and not self.quad_tol > 0:
            bad(f"quad_tol > 0 required, got {self.quad_tol!r}")
        if self.format not in ("csv", "json"):
            bad(f"format must be csv or json, got {self.format!r}")
        if self.grid < 1:
            bad(f"grid >= 1 required, got {self.grid!r}")
        if self.workers < 1:
            bad(f"workers >= 1 required, got {self.workers!r}")
        if self.inject_fault not in (None, "bessel"):
            bad(f"unknown fault {self.inject_fault!r}")

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @property
    def window(self) -> EvalWindow:
        return EvalWindow(self.T, self.U)

    def mc(self, default: int) -> sm.McConfig:
        return sm.McConfig(self.samples or default, self.seed, workers=self.workers)


def cmd_eval(cfg: RunConfig) -> tuple[ResultRecord, str]:
    w = cfg.window
    t = np.linspace(w.T, w.end, cfg.grid) if cfg.grid > 1 else np.array([w.T])
    cols = ["t", "theta", "Z", "Zprime"]
    th, z, d = rc.theta(t), rc.z_main(t, w), rc.z1(t, w)
    rows = [[float(a), float(b), float(c), float(e)] for a, b, c, e in zip(t, th, z, d)]
    rec = ResultRecord("eval", config_echo(cfg), {"columns": cols, "rows": rows, "P": w.P}, seed=cfg.seed)
    text = table_to_csv(cols, rows) if cfg.format == "csv" else rec.to_json()
    return rec, text


def _arc_report(cfg: RunConfig) -> rc.ArcLengthReport:
    w = cfg.window
    cache_dir = cfg.cache or default_cache_dir()
    scan = {"step": rc.scan_step(w), "tol": 1e-10, "max_refinements": 3}
    points = None
    if cache_dir:
        cache = CriticalPointCache(cache_dir)
        key = cache.make_key(w.T, w.U, scan)
        points = cache.get(key)
        if points is None:
            points, notes = rc.scan_critical_points(w, **scan)
            if not notes:
                cache.put(key, points)
    return rc.arc_length_numeric(w, tol=cfg.quad_tol, points=points, scan_kwargs=scan)


def _arc_results(rep: rc.ArcLengthReport) -> dict:
    return {
        "P": rep.window.P,
        "L_numeric": rep.L_numeric,
        "extrema_sum": rep.extrema_sum,
        "residual": rep.residual,
        "theta_proxy": rep.theta_proxy,
        "theta_proxy_in_unit_interval": 0.0 < rep.theta_proxy < 1.0,
        "quad_error_estimate": rep.quad_error_estimate,
        "zero_count": rep.zero_count(),
        "extremum_count": len(rep.critical_points) - rep.zero_count(),
    }


def cmd_arclength(cfg: RunConfig) -> tuple[ResultRecord, str]:
    rep = _arc_report(cfg)
    res = _arc_results(rep)
    res["critical_points"] = [[p.location, p.kind.value, p.value_at] for p in rep.critical_points]
    diag = {"warnings": rep.warnings, "quad_evals": rep.quad_evals}
    rec = ResultRecord("arclength", config_echo(cfg), res, seed=cfg.seed, diagnostics=diag)
    return rec, _render(cfg, rec)


def cmd_simulate(cfg: RunConfig) -> tuple[ResultRecord, str]:
    w = cfg.window
    mc = cfg.mc(10_000)
    res: dict = {
        "P": w.P,
        "variance_exact": sm.variance_exact(w),
        "variance_asymptotic": sm.variance_asymptotic(w),
        "third_moment_sum": sm.third_moment_sum(w),
        "third_moment_bound": sm.third_moment_bound(w),
        "lyapunov_ratio": sm.lyapunov_ratio(w),
        "ks_threshold": sm.KS_THRESHOLD,
    }
    for label, t in (("t_start", w.T), ("t_mid", w.T + 0.5 * w.U)):
        x = sm.phi1_samples(t, w, mc)
        est = sm.McEstimate.from_values(x)
        se_var = sm.variance_std_error(x)
        res[label] = {
            "t": t,
            "mean": est.mean,
            "variance": est.variance,
            "std_error": est.std_error,
            "count": est.count,
            "mean_z": est.mean / est.std_error,
            "variance_z": (est.variance - res["variance_exact"]) / se_var,
            "ks": sm.ks_distance(x, res["variance_exact"]),
        }
    if cfg.phi2:
        est = sm.phi2_mc(w, mc, tol=cfg.quad_tol)
        res["phi2"] = {"mean": est.mean, "variance": est.variance, "std_error": est.std_error,
                       "count": est.count, "failures": est.failures}
    rec = ResultRecord("simulate", config_echo(cfg), res, seed=cfg.seed)
    return rec, _render(cfg, rec)


def cmd_predict(cfg: RunConfig) -> tuple[ResultRecord, str]:
    p = sf.predict(cfg.window)
    res = {
        "P": p.window.P,
        "log_P": p.window.log_P,
        "beta": p.beta,
        "f_closed": p.f_closed,
        "f_quad": p.f_quad,
        "f_rel_diff": abs(p.f_closed - p.f_quad) / p.f_quad,
        "e_inf_point": p.e_inf_point,
        "e_inf_arc": p.e_inf_arc,
        "theorem_asymptotic": p.theorem_asymptotic,
        "ratio_to_asymptotic": p.ratio_to_asymptotic,
        "point_over_log_T_constant": p.e_inf_point / math.log(cfg.T) ** 1.5,
    }
    rec = ResultRecord("predict", config_echo(cfg), res, seed=cfg.seed)
    return rec, _render(cfg, rec)


def cmd_compare(cfg: RunConfig) -> tuple[ResultRecord, str]:
    w = cfg.window
    rep = _arc_report(cfg)
    est = sm.phi2_mc(w, cfg.mc(200), tol=cfg.quad_tol)
    closed = sf.e_inf_phi2(w)
    res = _arc_results(rep)
    res.update({
        "phi2_mc_mean": est.mean,
        "phi2_mc_std_error": est.std_error,
        "phi2_mc_count": est.count,
        "e_inf_phi2": closed,
        "theorem_asymptotic": sf.theorem_asymptotic(w.T, w.U),
        "mc_vs_closed_z": (est.mean - closed) / est.std_error,
    })
    res["mc_within_3sigma"] = abs(res["mc_vs_closed_z"]) <= 3.0
    diag = {"warnings": rep.warnings, "quad_evals": rep.quad_evals, "phi2_failures": est.failures}
    rec = ResultRecord("compare", config_echo(cfg), res, seed=cfg.seed, diagnostics=diag)
    return rec, _render(cfg, rec)


@contextlib.contextmanager
def _fault(name: str | None):
    if name != "bessel":
        yield
        return
    saved = sf.EULER_GAMMA
    sf.EULER_GAMMA = saved * (1 + 1e-6)
    try:
        yield
    finally:
        sf.EULER_GAMMA = saved


def cmd_verify(cfg: RunConfig) -> tuple[ResultRecord, str, bool]:
    with _fault(cfg.inject_fault):
        results = acceptance.verify(cfg.seed, workers=max(cfg.workers, 4))
    for r in results:
        print(r.line(), file=sys.stderr)
    ok = all(r.passed for r in results)
    res = {
        "all_passed": ok,
        "criteria": [
            {"number": r.number, "name": r.name, "passed": r.numeric_ok, "values": r.values, "error": r.error}
            for r in results
        ],
    }
    diag = {"warnings": [], "timing": {str(r.number): r.elapsed_s for r in results}}
    rec = ResultRecord("verify", config_echo(cfg), json.loads(json.dumps(res, default=acceptance._jsonable)),
                       seed=cfg.seed, diagnostics=diag)
    return rec, _render(cfg, rec), ok


def _render(cfg: RunConfig, rec: ResultRecord) -> str:
    return record_to_csv(rec) if cfg.format == "csv" else rec.to_json()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zeta-arclen", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig keys (flags override)")
        p.add_argument("--T", type=float, dest="T")
        p.add_argument("--U", type=float, dest="U")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--quad-tol", type=float, dest="quad_tol")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out")
        p.add_argument("--cache", help="critical-point cache directory (default $ZETA_ARCLEN_CACHE)")
        p.add_argument("--grid", type=int)
        p.add_argument("--workers", type=int)
        if name == "simulate":
            p.add_argument("--phi2", action="store_true", default=None, help="also estimate E(Phi2)")
        p.add_argument("--inject-fault", dest="inject_fault", help=argparse.SUPPRESS)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    data["command"] = args.command
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if f.name != "command" and value is not None:
            data[f.name] = value
    return RunConfig.from_mapping(data)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.command == "verify":
            rec, text, ok = cmd_verify(cfg)
            write_text(text, cfg.out)
            return EXIT_OK if ok else EXIT_NUMERIC
        handler = {
            "eval": cmd_eval,
            "arclength": cmd_arclength,
            "simulate": cmd_simulate,
            "predict": cmd_predict,
            "compare": cmd_compare,
        }[cfg.command]
        rec, text = handler(cfg)
        for w in rec.diagnostics.get("warnings", []):
            log.warning(w)
        write_text(text, cfg.out)
        return EXIT_OK
    except (ConfigError, DomainError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConsistencyError, QuadratureError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
