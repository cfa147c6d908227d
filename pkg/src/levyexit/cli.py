"""Command line front end: ``levyexit SUBCOMMAND --config FILE [--out FILE]``.

Config files are flat ``section.key = value`` lines; ``#`` starts a comment.
A bare name such as ``example1`` refers to a bundled preset.

Exit status: 0 success, 1 configuration error, 2 numerical failure,
3 quality gate (censoring, failed or inconclusive checks).
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import _backend
from .asymptotics import (INCONCLUSIVE, MODELS, fit_model, fit_scaling_law, predict_mean_exit,
                          stable_limit_mass)
from .conditions import (PASS, ScaleFunction, check_condition_A, check_condition_B,
                         check_condition_C, check_condition_D, check_condition_E)
from .dynamics import Domain, Potential
from .dynkin import SolverGrid, solve_mean_exit_bvp
from .errors import CensoringError, ConfigError, NumericalFailure
from .estimator import ExitExperimentConfig, read_csv, sweep, write_csv
from .measures import (LOG_PERTURBED_STABLE, STABLE, LevyTriplet, expression_measure, load_tabulated_measure,
                       log_perturbed_stable_measure, stable_measure)
from .sampling import NoiseSampler, validate_sampler

OK, CONFIG_ERROR, NUMERICAL_FAILURE, QUALITY_GATE = 0, 1, 2, 3

_float = float


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _floats(s):
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def _opt_float(s):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _opt_str(s):
    return None if s.strip().lower() in ("", "none", "auto") else s.strip()


# dotted key -> (parser, default)
KEYS = {
    "noise.kind": (str, "stable"),
    "noise.alpha": (_float, 1.0),
    "noise.d": (_float, 0.0),
    "noise.drift": (_float, 0.0),
    "noise.expression": (str, ""),
    "noise.table": (str, ""),
    "noise.symmetric": (_bool, False),
    "noise.delta_cut": (_float, 1e-3),
    "noise.small_jump_mode": (_opt_str, None),
    "noise.method": (str, "auto"),
    "potential.kind": (str, "quadratic"),
    "potential.stiffness": (_float, 1.0),
    "potential.coefficients": (_floats, (0.0, 1.0)),
    "domain.a": (_float, 1.0),
    "domain.b": (_float, 1.0),
    "domain.delta": (_float, 0.0),
    "domain.x0": (_float, 0.0),
    "domain.require_well": (_bool, True),
    "mc.n_paths": (_int, 10_000),
    "mc.dt": (_float, 1e-3),
    "mc.t_cap": (_opt_float, None),
    "mc.seed": (_int, 0),
    "sweep.epsilon": (_floats, (0.1,)),
    "conditions.g1": (str, "power"),
    "conditions.g2": (str, "power"),
    "conditions.g3": (str, "power"),
    "conditions.gamma": (_floats, (0.5, 1.0, 2.0, 4.0)),
    "conditions.delta": (_float, 0.1),
    "conditions.eps_max": (_float, 1e-1),
    "conditions.eps_min": (_float, 1e-8),
    "conditions.n_eps": (_int, 15),
    "solver.n": (_int, 2000),
    "solver.rho": (_opt_float, None),
    "validate.t": (_float, 0.01),
    "validate.n": (_int, 100_000),
    "validate.lambdas": (_floats, (2.0, 5.0, 10.0, 20.0)),
}


@dataclass
class RunConfig:
    """Parsed config: values by dotted key plus the line each came from."""

    values: dict
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def __getitem__(self, key):
        return self.values[key]

    def where(self, key):
        line = self.lines.get(key)
        return f"{self.source}:{line}" if line else f"{self.source}"

    def error(self, key, msg):
        return ConfigError(f"{self.where(key)}: {key}: {msg}")

    # built objects -------------------------------------------------------

    def jump_measure(self):
        kind = self["noise.kind"]
        alpha = self["noise.alpha"]
        if kind == "stable":
            return stable_measure(alpha)
        if kind == "log_perturbed_stable":
            return log_perturbed_stable_measure(alpha)
        if kind == "expression":
            return expression_measure(self["noise.expression"], symmetric=self["noise.symmetric"])
        if kind == "table":
            return load_tabulated_measure(self["noise.table"])
        if kind in ("gaussian", "none"):
            return None
        raise ValueError(f"unknown kind {kind!r}")

    def triplet(self):
        return LevyTriplet(self["noise.drift"], self["noise.d"], self.jump_measure())

    def potential(self):
        if self["potential.kind"] == "quadratic":
            return Potential.quadratic(self["potential.stiffness"])
        if self["potential.kind"] == "polynomial":
            return Potential.polynomial(self["potential.coefficients"])
        raise ValueError(f"unknown kind {self['potential.kind']!r}")

    def domain(self):
        return Domain(self["domain.a"], self["domain.b"], self["domain.delta"])

    def scale_function(self, which):
        spec = self[f"conditions.{which}"].strip()
        name, _, arg = spec.partition(":")
        if name == "power":
            return ScaleFunction.power(float(arg) if arg else self["noise.alpha"])
        if name == "power_over_log":
            return ScaleFunction.power_over_log(float(arg) if arg else self["noise.alpha"])
        if name == "expr":
            return ScaleFunction.expression(arg)
        raise ValueError(f"unknown scale function {spec!r}")

    def experiment(self, threads=None, epsilons=None):
        return ExitExperimentConfig(
            noise=self.triplet(), potential=self.potential(), domain=self.domain(),
            x0=self["domain.x0"], epsilons=epsilons or self["sweep.epsilon"],
            n_paths=self["mc.n_paths"], dt=self["mc.dt"], t_cap=self["mc.t_cap"],
            seed=self["mc.seed"], delta_cut=self["noise.delta_cut"],
            small_jump_mode=self["noise.small_jump_mode"], method=self["noise.method"],
            threads=threads, require_well=self["domain.require_well"])

    def eps_grid(self):
        return tuple(np.geomspace(self["conditions.eps_max"], self["conditions.eps_min"],
                                  self["conditions.n_eps"]))


def parse_config(text, source="<config>") -> RunConfig:
    """Parse and validate config text; errors name the file, line and key."""
    values = {k: d for k, (_, d) in KEYS.items()}
    lines = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'section.key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        try:
            values[key] = KEYS[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{no}: {key}: {exc}") from None
        lines[key] = no
    cfg = RunConfig(values, lines, source)
    _validate(cfg)
    return cfg


def _check(cfg, key, ok, msg):
    if not ok:
        raise cfg.error(key, msg)


def _validate(cfg: RunConfig):
    v = cfg.values
    _check(cfg, "domain.a", v["domain.a"] > 0, f"must be positive, got {v['domain.a']}")
    _check(cfg, "domain.b", v["domain.b"] > 0, f"must be positive, got {v['domain.b']}")
    _check(cfg, "domain.delta", 0 <= v["domain.delta"] < min(v["domain.a"], v["domain.b"]),
           "must lie in [0, min(a, b))")
    _check(cfg, "domain.x0", -v["domain.b"] <= v["domain.x0"] <= v["domain.a"],
           "must lie in [-b, a]")
    _check(cfg, "noise.d", v["noise.d"] >= 0, "variance must be nonnegative")
    if v["noise.kind"] in ("stable", "log_perturbed_stable"):
        _check(cfg, "noise.alpha", 0 < v["noise.alpha"] < 2, "must lie in (0, 2)")
    _check(cfg, "noise.delta_cut", v["noise.delta_cut"] > 0, "must be positive")
    _check(cfg, "mc.n_paths", v["mc.n_paths"] >= 100, "must be at least 100")
    _check(cfg, "mc.dt", v["mc.dt"] > 0, "must be positive")
    eps = v["sweep.epsilon"]
    _check(cfg, "sweep.epsilon", len(eps) > 0 and all(e > 0 for e in eps), "need positive values")
    _check(cfg, "sweep.epsilon", all(e1 > e2 for e1, e2 in zip(eps, eps[1:])),
           "values must be strictly decreasing")
    _check(cfg, "conditions.eps_min", 0 < v["conditions.eps_min"] < v["conditions.eps_max"] < 1,
           "need 0 < eps_min < eps_max < 1")
    _check(cfg, "conditions.n_eps", v["conditions.n_eps"] >= 4, "need at least 4 points")
    _check(cfg, "solver.n", v["solver.n"] >= 3, "need at least 3 nodes")
    for key, build in (("noise.kind", cfg.jump_measure), ("noise.d", cfg.triplet),
                       ("potential.kind", cfg.potential), ("domain.a", cfg.domain)):
        try:
            build()
        except (ValueError, NumericalFailure, OSError) as exc:
            raise cfg.error(key, str(exc)) from None
    for which in ("g1", "g2", "g3"):
        try:
            cfg.scale_function(which)
        except (ValueError, SyntaxError) as exc:
            raise cfg.error(f"conditions.{which}", str(exc)) from None
    if v["domain.require_well"]:
        try:
            cfg.experiment()
        except ValueError as exc:
            key = "domain.x0" if "G^delta" in str(exc) else "potential.kind"
            raise cfg.error(key, str(exc)) from None


def preset_path(name):
    return resources.files("levyexit") / "presets" / f"{name}.cfg"


def load_config(path_or_name) -> RunConfig:
    p = Path(path_or_name)
    if not p.exists() and not p.suffix:
        pre = preset_path(path_or_name)
        if pre.is_file():
            return parse_config(pre.read_text(), f"preset:{path_or_name}")
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path_or_name}: {exc}") from None
    return parse_config(text, str(p))


def _g(x):
    return f"{x:.12g}"


# subcommands ---------------------------------------------------------------


def _epsilons(cfg, args):
    return (args.epsilon,) if args.epsilon is not None else cfg["sweep.epsilon"]


def cmd_exit_mc(cfg, args, out):
    exp = cfg.experiment(args.threads, _epsilons(cfg, args))
    progress = lambda j, e: print(f"eps={e.epsilon:g}: mean={e.mean:.6g} +- {e.stderr:.3g}",
                                  file=sys.stderr)
    est = sweep(exp, progress, backend=args.backend)
    write_csv(est, exp.dt, exp.seed, out)
    if any(e.error is not None and "censored" not in e.error for e in est):
        return NUMERICAL_FAILURE
    if any(e.error is not None or not e.reliable for e in est):
        return QUALITY_GATE
    return OK


def cmd_solve(cfg, args, out):
    eps = _epsilons(cfg, args)[0]
    sol = solve_mean_exit_bvp(cfg.potential(), cfg.triplet(), eps, cfg.domain(),
                              SolverGrid(cfg["solver.n"], cfg["solver.rho"]))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("x", "u"))
    w.writerows((_g(x), _g(u)) for x, u in zip(sol.x, sol.u))
    out.write(f"# u(x0={_g(cfg['domain.x0'])}) = {_g(float(sol(cfg['domain.x0'])))}\n")
    return OK


def cmd_predict(cfg, args, out):
    m = cfg.jump_measure()
    if m is None:
        raise ValueError("the predictor needs a jump measure")
    g = cfg.scale_function("g1")
    a, b = cfg["domain.a"], cfg["domain.b"]
    natural = {STABLE: "power", LOG_PERTURBED_STABLE: "power_over_log"}.get(m.kind)
    if natural == g.kind and g.alpha == m.alpha and m.scale == 1.0:
        m = stable_limit_mass(m.alpha, a, b)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("epsilon", "predicted_mean_exit"))
    for eps in _epsilons(cfg, args):
        w.writerow((_g(eps), _g(predict_mean_exit(m, g, eps, a, b))))
    return OK


def cmd_conditions(cfg, args, out):
    m = cfg.jump_measure()
    grid = cfg.eps_grid()
    g1, g2, g3 = (cfg.scale_function(w) for w in ("g1", "g2", "g3"))
    gam = cfg["conditions.gamma"]
    reports = []
    if m is not None:
        reports += [check_condition_A(m, g1, gam, grid),
                    check_condition_B(m, g1, cfg["conditions.delta"], grid),
                    check_condition_C(m, g1, gam, grid)]
    reports += [check_condition_D(m, cfg["noise.d"], g2, grid, g1),
                check_condition_E(m, g3, grid)]
    for rep in reports:
        if args.out and args.out != "-":
            p = Path(args.out)
            fh = open(p.with_name(f"{p.stem}_{rep.condition}{p.suffix or '.csv'}"), "w")
        else:
            fh = out
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("condition", "gamma_or_K", "epsilon", "ratio", "verdict"))
            w.writerows(rep.csv_rows())
        finally:
            if fh is not out:
                fh.close()
        consts = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                           for k, v in rep.constants.items())
        print(f"condition {rep.condition}: {rep.verdict} {consts} {rep.note}".rstrip(),
              file=sys.stderr)
    return OK if all(r.verdict == PASS for r in reports) else QUALITY_GATE


def cmd_fit(cfg, args, out):
    with open(args.input) as fh:
        pts = [p for p in read_csv(fh) if all(math.isfinite(v) for v in p)]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("model", "beta", "c", "residual", "r_squared", "verdict"))
    if len(pts) == 3:
        # too few points to select a law; report each fit on its own
        for name in MODELS:
            f = fit_model(pts, name)
            w.writerow((name, _g(f.beta), _g(f.c), _g(f.residual_sum), _g(f.r_squared),
                        "underdetermined"))
        print("3 points: per-model fits only, no model selection", file=sys.stderr)
        return QUALITY_GATE
    rep = fit_scaling_law(pts)
    for name, beta, c, res, r2, tag in rep.rows():
        w.writerow((name, _g(beta), _g(c), _g(res), _g(r2), tag))
    print(f"best model {rep.best.model} ({rep.verdict}; candidates {', '.join(rep.candidates)})",
          file=sys.stderr)
    return QUALITY_GATE if rep.verdict == INCONCLUSIVE else OK


def cmd_validate_sampler(cfg, args, out):
    t = cfg.triplet()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("epsilon", "lambda", "ecf_re", "ecf_im", "model_re", "model_im", "error",
                "threshold", "passed"))
    ok = True
    for eps in _epsilons(cfg, args):
        s = NoiseSampler(t, eps, cfg["noise.delta_cut"], cfg["noise.small_jump_mode"],
                         cfg["noise.method"])
        rep = validate_sampler(s, cfg["validate.t"], cfg["validate.n"], cfg["validate.lambdas"],
                               seed=cfg["mc.seed"], threads=args.threads, backend=args.backend)
        for lam, e, mo, err in zip(rep.lambdas, rep.ecf, rep.model, rep.errors):
            w.writerow((_g(eps), _g(lam), _g(e.real), _g(e.imag), _g(mo.real), _g(mo.imag),
                        _g(err), _g(rep.threshold), int(err < rep.threshold)))
        ok = ok and rep.passed
    return OK if ok else QUALITY_GATE


COMMANDS = {
    "exit-mc": cmd_exit_mc,
    "solve": cmd_solve,
    "predict": cmd_predict,
    "conditions": cmd_conditions,
    "fit": cmd_fit,
    "validate-sampler": cmd_validate_sampler,
}


def build_parser():
    p = argparse.ArgumentParser(prog="levyexit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None,
                        help="config file or preset name (example1, example2, gaussian)")
        sp.add_argument("--out", default="-", help="output CSV path (default: stdout)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores; results do not depend on it)")
        sp.add_argument("--epsilon", type=float, default=None, help="single eps overriding the sweep")
        sp.add_argument("--backend", choices=sorted(_backend.BACKENDS), default=None)
        if name == "fit":
            sp.add_argument("input", help="sweep CSV written by exit-mc")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return CONFIG_ERROR
    if args.epsilon is not None and not args.epsilon > 0:
        print("error: --epsilon must be positive", file=sys.stderr)
        return CONFIG_ERROR
    try:
        cfg = load_config(args.config) if args.config else parse_config("", "<defaults>")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    try:
        if args.out == "-" or args.command == "conditions":
            return COMMANDS[args.command](cfg, args, sys.stdout)
        with open(args.out, "w") as out:
            return COMMANDS[args.command](cfg, args, out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except CensoringError as exc:
        print(f"quality gate: {exc}", file=sys.stderr)
        return QUALITY_GATE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_FAILURE


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
