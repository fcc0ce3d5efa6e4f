"""Command-line front end.

    fracdelay solve          --solution NAME [--alpha F] [--out DIR]
    fracdelay verify         --solution NAME [--alpha F] [--out DIR]
    fracdelay invariance     --all [--seed N] [--out DIR]
    fracdelay oracle-compare --solution NAME [--alpha F] [--out DIR]

Every command also takes ``--config PATH`` (JSON, see ``DEFAULTS``) and
``--dump-config``, which prints the fully resolved configuration and exits;
feeding that output back through ``--config`` reproduces the run.  Command
line flags override the file.  Exit status: 0 success, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys

import numpy as np

from . import pde_verify
from .caputo import UniformGrid
from .delay_series import DelaySeriesProblem, HistoryFunction
from .errors import ConfigError, NumericalError, ValidationError
from .oracle import OracleSystem, compatible_step, solve_fdde, system_from_problem
from .subspace import (Cosine, ExpCosine, Exponential, ExpSine, Monomial, OperatorSpec,
                       Sine, Subspace, InvarianceReport, catalog, check_invariance,
                       reduce_to_fdde, DEFAULT_SEED)

SCHEMA_VERSION = 1
COMMANDS = ("solve", "verify", "invariance", "oracle-compare")

_COMMON = {"schema": SCHEMA_VERSION, "command": None, "seed": DEFAULT_SEED,
           "output": "fracdelay_out"}
_PROBLEM = {"solution": "exp1d_H1", "custom": None, "alpha": None, "params": {}}

DEFAULTS = {
    "solve": {**_COMMON, **_PROBLEM, "x_grid": [0.0, 1.0, 11], "t_grid": [0.0, 2.0, 81]},
    "verify": {**_COMMON, **_PROBLEM, "x_grid": [0.0, 1.0, 21],
               "steps": [1 / 256, 1 / 512, 1 / 1024], "T": None, "t_min": None},
    "invariance": {**_COMMON, "entries": "all", "samples": 1, "trials": 20,
                   "tol": 1e-9, "include_perturbed": False},
    "oracle-compare": {**_COMMON, **_PROBLEM, "h": 1 / 512, "T": None},
}

_CUSTOM_KEYS = {"form", "d_coeffs", "r_coeffs", "delta", "tau", "basis", "history"}
_BASIS = {"monomial": (Monomial, 1), "exp": (Exponential, 1), "cos": (Cosine, 1),
          "sin": (Sine, 1), "expcos": (ExpCosine, 2), "expsin": (ExpSine, 2)}


# ---------------------------------------------------------------- config

def _num(value, field, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field)
    if not math.isfinite(value):
        raise ConfigError("must be finite", field)
    if integer and int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", field)
    if positive and not value > 0:
        raise ConfigError(f"must be positive, got {value!r}", field)
    return int(value) if integer else float(value)


def _numlist(value, field, length=None, positive=False):
    if not isinstance(value, list):
        raise ConfigError(f"expected a list, got {value!r}", field)
    if length is not None and len(value) != length:
        raise ConfigError(f"expected {length} entries, got {len(value)}", field)
    return [_num(v, f"{field}[{i}]", positive=positive) for i, v in enumerate(value)]


def _grid(value, field):
    x0, x1, n = _numlist(value, field, length=3)
    if not x1 > x0:
        raise ConfigError("grid end must exceed grid start", field)
    _num(n, f"{field}[2]", integer=True)
    if n < 2:
        raise ConfigError("grid needs at least 2 points", f"{field}[2]")
    return [x0, x1, int(n)]


def _validate_params(name, params, field):
    if not isinstance(params, dict):
        raise ConfigError("expected an object", field)
    allowed = set(pde_verify.DEFAULTS[name]) | {"r"}
    for key, v in params.items():
        f = f"{field}.{key}"
        if key not in allowed:
            raise ConfigError(f"unknown parameter for {name}", f)
        if key == "alpha":
            a = _num(v, f)
            if not 0 < a <= 1:
                raise ConfigError(f"alpha must lie in (0, 1], got {a!r}", f)
        elif key == "tau":
            _numlist(v, f, positive=True)
        elif key == "history":
            if not isinstance(v, list) or not v:
                raise ConfigError("expected a list of coefficient lists", f)
            for i, row in enumerate(v):
                _numlist(row, f"{f}[{i}]")
        elif key in ("b", "delta", "r"):
            _numlist(v, f)
        else:
            _num(v, f)


def _validate_custom(custom, field):
    if not isinstance(custom, dict):
        raise ConfigError("expected an object", field)
    for key in custom:
        if key not in _CUSTOM_KEYS:
            raise ConfigError("unknown key", f"{field}.{key}")
    for key in _CUSTOM_KEYS:
        if key not in custom:
            raise ConfigError("missing key", f"{field}.{key}")
    if custom["form"] not in ("H1", "H2"):
        raise ConfigError("must be H1 or H2", f"{field}.form")
    _numlist(custom["d_coeffs"], f"{field}.d_coeffs")
    _numlist(custom["r_coeffs"], f"{field}.r_coeffs")
    delta = _numlist(custom["delta"], f"{field}.delta")
    _numlist(custom["tau"], f"{field}.tau", length=len(delta), positive=True)
    basis = custom["basis"]
    if not isinstance(basis, list) or not basis:
        raise ConfigError("expected a non-empty list", f"{field}.basis")
    for i, b in enumerate(basis):
        f = f"{field}.basis[{i}]"
        if not isinstance(b, list) or not b or b[0] not in _BASIS:
            raise ConfigError(f"expected [kind, params...] with kind in {sorted(_BASIS)}", f)
        if len(b) - 1 != _BASIS[b[0]][1]:
            raise ConfigError(f"{b[0]} takes {_BASIS[b[0]][1]} parameter(s)", f)
        _numlist(b[1:], f)
    hist = custom["history"]
    if not isinstance(hist, list) or len(hist) != len(basis):
        raise ConfigError("one history polynomial per basis function", f"{field}.history")
    for i, row in enumerate(hist):
        _numlist(row, f"{field}.history[{i}]")


def validate_config(cfg):
    """Check a resolved config in place-free fashion; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    cmd = cfg.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"must be one of {', '.join(COMMANDS)}", "command")
    allowed = DEFAULTS[cmd]
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"unknown key for command {cmd!r}", key)
    if cfg["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version (expected {SCHEMA_VERSION})", "schema")
    _num(cfg["seed"], "seed", integer=True)
    if not isinstance(cfg["output"], str) or not cfg["output"]:
        raise ConfigError("expected a directory path", "output")

    if "solution" in allowed:
        if cfg["custom"] is None:
            if cfg["solution"] not in pde_verify.NAMES:
                raise ConfigError(f"must be one of {', '.join(pde_verify.NAMES)}", "solution")
            _validate_params(cfg["solution"], cfg["params"], "params")
        else:
            if cmd == "verify":
                raise ConfigError("verify works on named solutions only", "custom")
            _validate_custom(cfg["custom"], "custom")
        if cfg["alpha"] is not None:
            a = _num(cfg["alpha"], "alpha")
            if not 0 < a <= 1:
                raise ConfigError(f"must lie in (0, 1], got {a!r}", "alpha")
    if cmd == "solve":
        _grid(cfg["x_grid"], "x_grid")
        g = _grid(cfg["t_grid"], "t_grid")
        if g[0] != 0.0:
            raise ConfigError("time grid must start at 0", "t_grid[0]")
    if cmd == "verify":
        _grid(cfg["x_grid"], "x_grid")
        steps = _numlist(cfg["steps"], "steps", positive=True)
        if not steps:
            raise ConfigError("at least one step is required", "steps")
        for key in ("T", "t_min"):
            if cfg[key] is not None:
                _num(cfg[key], key, positive=True)
    if cmd == "oracle-compare":
        _num(cfg["h"], "h", positive=True)
        if cfg["T"] is not None:
            _num(cfg["T"], "T", positive=True)
    if cmd == "invariance":
        ids = {e.entry_id for e in catalog()}
        if cfg["entries"] != "all":
            if not isinstance(cfg["entries"], list):
                raise ConfigError('expected "all" or a list of entry ids', "entries")
            for i, e in enumerate(cfg["entries"]):
                if e not in ids:
                    raise ConfigError(f"unknown catalog entry {e!r}", f"entries[{i}]")
        _num(cfg["samples"], "samples", positive=True, integer=True)
        t = _num(cfg["trials"], "trials", integer=True)
        if t < 10:
            raise ConfigError("at least 10 trials are required", "trials")
        _num(cfg["tol"], "tol", positive=True)
        if not isinstance(cfg["include_perturbed"], bool):
            raise ConfigError("expected true or false", "include_perturbed")
    return cfg


def resolve_config(command, file_cfg=None, overrides=None):
    """Defaults for ``command``, then the file, then command-line overrides."""
    if file_cfg is not None:
        if not isinstance(file_cfg, dict):
            raise ConfigError("configuration must be a JSON object")
        fc = file_cfg.get("command", command)
        if fc != command:
            raise ConfigError(f"config is for {fc!r}, not {command!r}", "command")
    cfg = copy.deepcopy(DEFAULTS[command])
    cfg["command"] = command
    for src in (file_cfg or {}), (overrides or {}):
        for key, v in src.items():
            if key not in cfg:
                raise ConfigError(f"unknown key for command {command!r}", key)
            cfg[key] = copy.deepcopy(v)
    if cfg.get("solution") is not None and cfg.get("custom") is None and cfg.get("params") is not None:
        # fill the named solution's defaults so the dump is self-contained
        name = cfg["solution"]
        if name in pde_verify.NAMES and isinstance(cfg["params"], dict):
            full = pde_verify.default_params(name)
            full.update(cfg["params"])
            cfg["params"] = full
    return validate_config(cfg)


# ---------------------------------------------------------------- helpers

def _fmt(v):
    return f"{v:.17g}"


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _named(cfg):
    params = dict(cfg["params"])
    if cfg["alpha"] is not None:
        params["alpha"] = cfg["alpha"]
    try:
        return pde_verify.named_solution(cfg["solution"], params)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc), "params") from exc


def _custom(cfg):
    c = cfg["custom"]
    try:
        basis = [_BASIS[b[0]][0](*[float(v) for v in b[1:]]) for b in c["basis"]]
        W = Subspace(basis)
        op = OperatorSpec(c["form"], c["d_coeffs"], c["r_coeffs"], c["delta"])
        alpha = 1.0 if cfg["alpha"] is None else float(cfg["alpha"])
        tau_star = max(c["tau"])
        hist = [HistoryFunction.polynomial(h, tau_star) for h in c["history"]]
        rep = check_invariance(op, W, seed=int(cfg["seed"]))
        if not rep.invariant:
            raise ConfigError(f"operator does not leave the span invariant "
                              f"(residual {rep.residual:.3g})", "custom")
        return op, W, reduce_to_fdde(op, W, alpha, c["tau"], hist, seed=int(cfg["seed"]))
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc), "custom") from exc


def _u_csv(x, t, u):
    lines = [",".join(["x"] + [_fmt(v) for v in t])]
    for xi, row in zip(x, u):
        lines.append(",".join([_fmt(xi)] + [_fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def _coef_csv(t, A):
    lines = [",".join(["t"] + [f"A{j + 1}" for j in range(A.shape[1])])]
    for ti, row in zip(t, A):
        lines.append(",".join([_fmt(ti)] + [_fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands

def cmd_solve(cfg, out):
    x = np.linspace(*cfg["x_grid"][:2], cfg["x_grid"][2])
    t = np.linspace(*cfg["t_grid"][:2], cfg["t_grid"][2])
    if cfg["custom"] is None:
        sol = _named(cfg)
        A = sol.coefficient_values(t)
        W = sol.subspace
    else:
        _, W, red = _custom(cfg)
        if isinstance(red, OracleSystem):
            h = compatible_step(float(t[1] - t[0]), [tau for tau, _ in red.delays])
            traj = solve_fdde(red, float(t[-1]), h)
            t, A = traj.t, traj.values
        else:
            A = np.column_stack([p.evaluate(t) for p in red])
    u = W.combine(A, x).T
    _write(os.path.join(out, "u.csv"), _u_csv(x, t, u))
    _write(os.path.join(out, "coefficients.csv"), _coef_csv(t, A))
    return f"wrote u.csv ({len(x)} x {len(t)}) and coefficients.csv to {out}"


def cmd_verify(cfg, out):
    sol = _named(cfg)
    xg = np.linspace(*cfg["x_grid"][:2], cfg["x_grid"][2])
    table = pde_verify.convergence_table(sol, hs=cfg["steps"], T=cfg["T"], xgrid=xg,
                                         t_min=cfg["t_min"])
    text = (f"alpha: {_fmt(sol.alpha)}\n" + table.summary()
            + f"monotone: {'yes' if table.monotone else 'no'}\n")
    _write(os.path.join(out, "residual_report.txt"), text)
    _write(os.path.join(out, "residual_field.csv"), table.rows[-1].to_csv())
    return text.rstrip()


def cmd_invariance(cfg, out):
    seed = int(cfg["seed"])
    rng = np.random.default_rng(seed)
    wanted = cfg["entries"]
    lines = [InvarianceReport.CSV_HEADER]
    n_ok = n_rows = 0
    for entry in catalog():
        if wanted != "all" and entry.entry_id not in wanted:
            continue
        for k in range(int(cfg["samples"])):
            p = entry.sample(rng)
            tag = entry.entry_id if cfg["samples"] == 1 else f"{entry.entry_id}#{k}"
            rep = check_invariance(*entry.build(p), trials=int(cfg["trials"]),
                                   tol=float(cfg["tol"]), seed=seed, entry_id=tag)
            lines.append(rep.csv_row())
            n_rows += 1
            n_ok += rep.invariant
            if cfg["include_perturbed"] and entry.perturb is not None:
                rep = check_invariance(*entry.build(entry.perturb(p)),
                                       trials=int(cfg["trials"]), tol=float(cfg["tol"]),
                                       seed=seed, entry_id=tag + "~perturbed")
                lines.append(rep.csv_row())
    _write(os.path.join(out, "invariance.csv"), "\n".join(lines) + "\n")
    return f"{n_ok}/{n_rows} catalog instances invariant; wrote invariance.csv to {out}"


def cmd_oracle_compare(cfg, out):
    if cfg["custom"] is None:
        sol = _named(cfg)
        problems = list(sol.coefficients)
        tau_star = sol.tau_star
    else:
        _, _, red = _custom(cfg)
        if isinstance(red, OracleSystem):
            raise ConfigError("no closed form for a nonlinear reduction; nothing to compare",
                              "custom")
        problems = red
        tau_star = problems[0].tau_star
    T = 2.0 * tau_star if cfg["T"] is None else float(cfg["T"])
    h = compatible_step(float(cfg["h"]), [tau for tau, _ in problems[0].delays])
    cols, header = [], []
    t = None
    worst = 0.0
    for j, pr in enumerate(problems):
        traj = solve_fdde(system_from_problem(pr), T, h)
        t = traj.t
        exact = pr.evaluate(t)
        approx = traj.values[:, 0]
        scale = max(float(np.max(np.abs(exact))), np.finfo(float).tiny)
        rel = np.abs(exact - approx) / scale
        worst = max(worst, float(np.max(rel)))
        cols += [exact, approx, rel]
        header += [f"A{j + 1}_closed", f"A{j + 1}_oracle", f"A{j + 1}_relerr"]
    lines = [",".join(["t"] + header)]
    for i, ti in enumerate(t):
        lines.append(",".join([_fmt(ti)] + [_fmt(c[i]) for c in cols]))
    _write(os.path.join(out, "oracle_compare.csv"), "\n".join(lines) + "\n")
    return (f"h = {_fmt(h)}, T = {_fmt(T)}, max relative error {worst:.3e} "
            f"(relative to each mode's max |A|); wrote oracle_compare.csv to {out}")


_RUNNERS = {"solve": cmd_solve, "verify": cmd_verify, "invariance": cmd_invariance,
            "oracle-compare": cmd_oracle_compare}


def run(cfg):
    """Run a resolved, validated configuration; returns the summary text."""
    return _RUNNERS[cfg["command"]](cfg, cfg["output"])


# ---------------------------------------------------------------- entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="random seed")
    common.add_argument("--dump-config", action="store_true",
                        help="print the resolved configuration and exit")
    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--solution", metavar="NAME", help=", ".join(pde_verify.NAMES))
    problem.add_argument("--alpha", type=float, metavar="F", help="fractional order in (0, 1]")

    parser = argparse.ArgumentParser(prog="fracdelay",
                                     description="Exact solutions of time-fractional "
                                                 "reaction-diffusion equations with delay")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common, problem], help="write u(x, t) on a grid")
    sub.add_parser("verify", parents=[common, problem], help="PDE residual report")
    inv = sub.add_parser("invariance", parents=[common], help="invariant-subspace catalog")
    inv.add_argument("--all", action="store_true", help="check every catalog entry")
    sub.add_parser("oracle-compare", parents=[common, problem],
                   help="closed form against the numerical delay-ODE solver")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        file_cfg = None
        if args.config:
            try:
                with open(args.config) as fh:
                    file_cfg = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}", "--config") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON ({exc.msg}, line {exc.lineno})",
                                  "--config") from exc
        over = {}
        if args.out is not None:
            over["output"] = args.out
        if args.seed is not None:
            over["seed"] = args.seed
        if getattr(args, "solution", None) is not None:
            over["solution"] = args.solution
        if getattr(args, "alpha", None) is not None:
            over["alpha"] = args.alpha
        if getattr(args, "all", False):
            over["entries"] = "all"
        cfg = resolve_config(args.command, file_cfg, over)
        if args.dump_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        print(run(cfg))
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
