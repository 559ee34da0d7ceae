"""Command-line front end.

Every subcommand takes the model either from flags or from an INI file
(``--config``).  Tables go to ``--out`` (or stdout) as CSV or JSON; errors
exit with 2 for bad input and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import sim
from .basis import PolyVec, pnphi
from .bernstein import decay_params, make_phi
from .coeigen import coeigen
from .errors import ConfigError, NumericalError
from .measure import density, density_mellin, has_density, moments
from .model import ModelSpec, PowerLawKernel, TabulatedKernel, ZeroKernel, validate
from .semigroup import apply, decay_report, default_bound_index
from .verify import run_all

KERNELS = ("zero", "power", "tabulated")
MODEL_KEYS = {"lambda", "mu", "kernel", "delta", "table_path", "tail_exponent"}
OUTPUT_KEYS = {"path", "format"}
# run-section keys per subcommand, mirroring the flags
RUN_KEYS = {
    "validate": set(),
    "moments": {"N"},
    "density": {"x"},
    "basis": {"N"},
    "coeigen": {"n", "x"},
    "semigroup": {"f", "t", "x"},
    "decay": {"m", "eps", "t"},
    "verify": {"all", "N", "m"},
    "simulate": {"paths", "dt", "T", "seed", "x0", "k"},
}
DEFAULT_X = "0.01:0.99:99"


# ----------------------------------------------------------------- parsing


def _number(text: str, what: str):
    """Decimal strings become exact fractions, so 4.5 stays 9/2."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{what} must be a number, got {text!r}") from None


def _float(text, what: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite")
    return value


def _int(text, what: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"{what} must be an integer, got {text!r}") from None


def parse_grid(text: str) -> np.ndarray:
    """Either ``lo:hi:count`` or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must look like lo:hi:count")
        lo, hi = _float(parts[0], "grid start"), _float(parts[1], "grid end")
        count = _int(parts[2], "grid size")
        if count < 1:
            raise ConfigError("grid size must be positive")
        return np.linspace(lo, hi, count)
    return np.array([_float(v, "grid point") for v in text.split(",") if v.strip()])


def parse_poly(text: str, phi_fn) -> PolyVec:
    """``P<n>`` for an eigenpolynomial, otherwise ascending coefficients ``c0,c1,...``."""
    text = str(text).strip()
    if text[:1] in "Pp" and text[1:].isdigit():
        return pnphi(int(text[1:]), phi_fn, "mp").astype("float")
    coeffs = [_float(v, "polynomial coefficient") for v in text.split(",") if v.strip()]
    if not coeffs:
        raise ConfigError("empty polynomial")
    return PolyVec(tuple(coeffs))


def read_config(path: str) -> dict[str, dict[str, str]]:
    """Sections ``model``, ``run`` and ``output``; a file without headers may use ``section.key = value``."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    text = p.read_text()
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        if not any(line.lstrip().startswith("[") for line in text.splitlines()):
            parser.read_string("[flat]\n" + text)
            out: dict[str, dict[str, str]] = {}
            for key, value in parser["flat"].items():
                section, dot, name = key.partition(".")
                if not dot:
                    raise ConfigError(f"flat config key {key!r} needs a section prefix")
                out.setdefault(section, {})[name] = value
            return out
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return {s: dict(parser[s]) for s in parser.sections()}


def _check_keys(config: dict, command: str) -> None:
    allowed = {"model": MODEL_KEYS, "run": RUN_KEYS[command], "output": OUTPUT_KEYS}
    for section, values in config.items():
        if section not in allowed:
            raise ConfigError(f"unknown config section {section!r}")
        unknown = set(values) - allowed[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")


def _merge(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file; flags win."""
    config = read_config(args.config) if args.config else {}
    _check_keys(config, args.command)
    model = config.get("model", {})
    for key, value in model.items():
        dest = {"lambda": "lambda1", "table_path": "table"}.get(key, key)
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)
    for key, value in config.get("run", {}).items():
        if getattr(args, key, None) in (None, False):
            if key == "all":
                value = value.strip().lower() in ("1", "true", "yes", "on")
            setattr(args, key, value)
    output = config.get("output", {})
    if args.out is None and "path" in output:
        args.out = output["path"]
    if args.format is None:
        args.format = output.get("format", "csv")
    if args.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {args.format!r}")
    if args.out is not None:
        parent = Path(args.out).resolve().parent
        if not parent.is_dir():
            raise ConfigError(f"output directory {parent} does not exist")
    return args


def build_model(args: argparse.Namespace):
    if args.lambda1 is None or args.mu is None:
        raise ConfigError("the model needs lambda and mu")
    kernel_name = (args.kernel or "zero").strip().lower()
    if kernel_name not in KERNELS:
        raise ConfigError(f"unknown kernel {kernel_name!r}; expected one of {', '.join(KERNELS)}")
    if kernel_name == "zero":
        kernel = ZeroKernel()
    elif kernel_name == "power":
        if args.delta is None:
            raise ConfigError("the power kernel needs delta")
        kernel = PowerLawKernel(_number(str(args.delta), "delta"))
    else:
        if args.table is None or args.tail_exponent is None:
            raise ConfigError("the tabulated kernel needs table_path and tail_exponent")
        if not Path(args.table).is_file():
            raise ConfigError(f"kernel table {args.table} not found")
        kernel = TabulatedKernel.from_csv(args.table, _float(args.tail_exponent, "tail_exponent"))
    spec = ModelSpec(_number(str(args.lambda1), "lambda"), _number(str(args.mu), "mu"), kernel)
    return validate(spec)


# ------------------------------------------------------------------ output


def _fmt(value) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating, Fraction)) or hasattr(value, "__float__"):
        return "%.17g" % float(value)
    return str(value)


def _plain(value):
    if isinstance(value, (bool, str, type(None))):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def emit_table(args, header: list[str], rows: list[list]) -> None:
    if args.format == "json":
        text = json.dumps([{h: _plain(v) for h, v in zip(header, row)} for row in rows], indent=1) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    _write(args, text)


def emit_report(args, report: dict) -> None:
    if args.format == "json":
        text = json.dumps({k: _plain(v) for k, v in report.items()}, indent=1) + "\n"
    else:
        text = "".join(f"{k}={_fmt(v)}\n" for k, v in report.items())
    _write(args, text)


def _write(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    with open(args.out, "w", newline="") as fh:
        fh.write(text)
    print(f"wrote {args.out}")


# ------------------------------------------------------------- subcommands


def cmd_validate(args, model) -> int:
    phi_fn = make_phi(model)
    emit_report(args, {
        "model": model.describe(),
        "hbar": model.hbar,
        "theta": phi_fn.theta,
        "vartheta": phi_fn.vartheta,
        "Delta": phi_fn.delta_index(),
        "d_phi": phi_fn.d_phi,
        "small_mu": model.small_mu,
    })
    return 0


def cmd_moments(args, model) -> int:
    n_max = _int(args.N, "N")
    if n_max < 0:
        raise ConfigError("N must be non-negative")
    seq = moments(make_phi(model), n_max, "auto")
    emit_table(args, ["n", "moment"], [[n, v] for n, v in enumerate(seq.values)])
    return 0


def cmd_density(args, model) -> int:
    x = parse_grid(args.x)
    if has_density(model):
        values = np.atleast_1d(density(model, x))
    else:
        phi_fn = make_phi(model)
        values = [density_mellin(phi_fn, float(v)) for v in x]
    emit_table(args, ["x", "density"], [[a, b] for a, b in zip(x, values)])
    return 0


def cmd_basis(args, model) -> int:
    n_max = _int(args.N, "N")
    if n_max < 0:
        raise ConfigError("N must be non-negative")
    phi_fn = make_phi(model)
    rows = []
    for n in range(n_max + 1):
        poly = pnphi(n, phi_fn, "mp")
        rows.extend([n, k, c] for k, c in enumerate(poly.coeffs))
    emit_table(args, ["n", "k", "coefficient"], rows)
    return 0


def cmd_coeigen(args, model) -> int:
    n = _int(args.n, "n")
    if n < 0:
        raise ConfigError("n must be non-negative")
    ce = coeigen(model, n)
    x = parse_grid(args.x)
    w = np.atleast_1d(ce.w(x))
    v = np.atleast_1d(ce.v(x))
    emit_table(args, ["x", "w_n", "V_n"], [[a, b, c] for a, b, c in zip(x, w, v)])
    return 0


def cmd_semigroup(args, model) -> int:
    if args.f is None:
        raise ConfigError("semigroup needs --f")
    phi_fn = make_phi(model)
    f = parse_poly(args.f, phi_fn)
    times = [_float(v, "t") for v in str(args.t).split(",") if v.strip()]
    x = parse_grid(args.x)
    rows = []
    for t in times:
        res = apply(f, t, phi_fn, x=x)
        rows.extend([a, t, b] for a, b in zip(x, res.values))
    emit_table(args, ["x", "t", "value"], rows)
    return 0


def _params(args, phi_fn):
    m = default_bound_index(phi_fn) if args.m is None else _number(str(args.m), "m")
    eps = getattr(args, "eps", None)
    eps = None if eps is None else _number(str(eps), "eps")
    return decay_params(phi_fn, m, eps)


def cmd_decay(args, model) -> int:
    phi_fn = make_phi(model)
    report = decay_report(_params(args, phi_fn), _float(args.t, "t"))
    emit_report(args, report.as_dict())
    return 0


def cmd_verify(args, model) -> int:
    phi_fn = make_phi(model)
    results = run_all(phi_fn, _params(args, phi_fn), _int(args.N, "N"))
    rows = [[r.name, r.residual, r.tol, r.mode, "pass" if r.passed else "FAIL"] for r in results]
    emit_table(args, ["identity", "max_residual", "tol", "mode", "status"], rows)
    return 0 if all(r.passed for r in results) else 1


def cmd_simulate(args, model) -> int:
    config = sim.SimConfig(dt=_float(args.dt, "dt"), T=_float(args.T, "T"), n_paths=_int(args.paths, "paths"),
                           seed=_int(args.seed, "seed"), x0=_float(args.x0, "x0"))
    k_max = _int(args.k, "k")
    if not 1 <= k_max <= sim.MAX_MOMENT:
        raise ConfigError(f"k must lie in 1..{sim.MAX_MOMENT}")
    stats = sim.ergodic_moments(config, model, k_max)
    targets = moments(make_phi(model), k_max, "float").values
    rows = [[k, stats.terminal[k - 1], stats.terminal_se[k - 1], targets[k]] for k in range(1, k_max + 1)]
    emit_table(args, ["k", "estimate", "stderr", "target"], rows)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "moments": cmd_moments,
    "density": cmd_density,
    "basis": cmd_basis,
    "coeigen": cmd_coeigen,
    "semigroup": cmd_semigroup,
    "decay": cmd_decay,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [model], [run] and [output] sections")
    common.add_argument("--out", help="write the table here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--lambda", dest="lambda1", help="lambda (> mu)")
    common.add_argument("--mu")
    common.add_argument("--kernel", help="zero, power or tabulated")
    common.add_argument("--delta", help="power-law exponent (kernel r^(-delta-1))")
    common.add_argument("--table", help="two-column CSV r,h for a tabulated kernel")
    common.add_argument("--tail-exponent", dest="tail_exponent")

    parser = argparse.ArgumentParser(prog="specjac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the model and print derived constants")
    p = sub.add_parser("moments", parents=[common], help="moments of the invariant law")
    p.add_argument("--N", default=None)
    p = sub.add_parser("density", parents=[common], help="invariant density on a grid")
    p.add_argument("--x", default=None)
    p = sub.add_parser("basis", parents=[common], help="eigenpolynomial coefficients")
    p.add_argument("--N", default=None)
    p = sub.add_parser("coeigen", parents=[common], help="co-eigenfunctions on a grid")
    p.add_argument("--n", default=None)
    p.add_argument("--x", default=None)
    p = sub.add_parser("semigroup", parents=[common], help="semigroup applied to a polynomial")
    p.add_argument("--f", default=None, help="P<n> or coefficients c0,c1,...")
    p.add_argument("--t", default=None, help="comma-separated times")
    p.add_argument("--x", default=None)
    p = sub.add_parser("decay", parents=[common], help="explicit convergence constants")
    p.add_argument("--m", default=None)
    p.add_argument("--eps", default=None)
    p.add_argument("--t", default=None)
    p = sub.add_parser("verify", parents=[common], help="check the operator identities")
    p.add_argument("--all", action="store_true", default=False, help="run every check (the default)")
    p.add_argument("--N", default=None)
    p.add_argument("--m", default=None)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo moments")
    p.add_argument("--paths", default=None)
    p.add_argument("--dt", default=None)
    p.add_argument("--T", default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--x0", default=None)
    p.add_argument("--k", default=None, help="highest moment (at most 4)")
    return parser


_RUN_DEFAULTS = {
    "N": {"moments": "10", "basis": "5", "verify": "30"},
    "x": DEFAULT_X,
    "n": "1",
    "t": {"semigroup": "1", "decay": "1"},
    "paths": str(sim.SimConfig.n_paths),
    "dt": str(sim.SimConfig.dt),
    "T": str(sim.SimConfig.T),
    "seed": str(sim.SimConfig.seed),
    "x0": str(sim.SimConfig.x0),
    "k": "2",
}


def _apply_defaults(args) -> None:
    for key, default in _RUN_DEFAULTS.items():
        if key in RUN_KEYS[args.command] and getattr(args, key, None) is None:
            setattr(args, key, default[args.command] if isinstance(default, dict) else default)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args = _merge(args)
        _apply_defaults(args)
        model = build_model(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args, model)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
