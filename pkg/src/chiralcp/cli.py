"""Command-line front end: eval, verify, asymptotics, sample.

Options come from flags and/or a flat key=value file (--config); flags win.
Every run that writes to --out also writes the fully resolved configuration
to <out>.config, which can be passed back with --config.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import itertools
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import asym, exact, mc, verify
from .errors import ConditioningError, ConfigError, ConvergenceError, DomainError, SingularMatrixError
from .exact import Degenerate, Distinct, EnsembleParams

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

EVAL_KINDS = ("inverse-cp", "cp", "ratio", "kernel", "d", "g")
VERIFY_SUITES = ("identities", "oracles", "mc")
SWEEP_KINDS = ("inverse-cp", "cp", "kernel", "g")

EVAL_COLUMNS = {
    "inverse-cp": ["y_re", "y_im"],
    "cp": ["z_re", "z_im"],
    "ratio": ["v_re", "v_im", "z_re", "z_im"],
    "kernel": ["x", "y"],
    "d": ["p"],
    "g": ["tau"],
}
VALUE_COLUMNS = ["value_re", "value_im", "abs_err", "meta"]
VERIFY_COLUMNS = ["suite", "case", "deviation", "tolerance", "required", "passed"]
SWEEP_COLUMNS = ["N", "finite", "limit", "rel_err"]

COLUMNS_HELP = f"""output columns:
  eval inverse-cp   {', '.join(EVAL_COLUMNS['inverse-cp'] + VALUE_COLUMNS)}
  eval cp           {', '.join(EVAL_COLUMNS['cp'] + VALUE_COLUMNS)}
  eval ratio        {', '.join(EVAL_COLUMNS['ratio'] + VALUE_COLUMNS)}
  eval kernel       {', '.join(EVAL_COLUMNS['kernel'] + VALUE_COLUMNS)}
  eval d            {', '.join(EVAL_COLUMNS['d'] + VALUE_COLUMNS)}
  eval g            {', '.join(EVAL_COLUMNS['g'] + VALUE_COLUMNS)}
  verify            {', '.join(VERIFY_COLUMNS)}
  asymptotics       {', '.join(SWEEP_COLUMNS)}
  sample            draw, x1..xN, log_weight
"""


# ---------------------------------------------------------------------------
# option parsing

def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _complex_list(text: str) -> list[complex]:
    return [complex(t.strip().replace(" ", "").replace("i", "j")) for t in text.split(",") if t.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (parser, help)
OPTIONS = {
    "n": (int, "matrix size N"),
    "l": (int, "deformation exponent L"),
    "omegas": (_float_list, "distinct source spectrum, comma separated"),
    "z": (float, "degenerate source Omega = z 1 (omega = z^2)"),
    "z_sq": (float, "degenerate source by |z|^2"),
    "y": (_complex_list, "inverse-cp arguments / kernel second argument"),
    "zarg": (_complex_list, "cp / ratio denominator arguments"),
    "v": (_complex_list, "ratio numerator arguments"),
    "x": (_float_list, "kernel first argument"),
    "p": (_float_list, "connection-function arguments p > 0"),
    "tau": (_float_list, "G arguments in (0, 1)"),
    "rel_tol": (float, "relative tolerance of the quadratures"),
    "radius": (float, "contour radius override"),
    "method": (str, "evaluation route (kind specific)"),
    "r": (float, "source scaling |z|^2 = N r, 0 < r < 1"),
    "xi": (float, "scaled CP argument"),
    "alpha": (float, "scaled kernel first argument"),
    "beta": (float, "scaled kernel second argument"),
    "a": (float, "tau = 1 - a/N for G"),
    "w": (float, "rho = N w^2 for G"),
    "n_list": (_int_list, "ascending list of N"),
    "convention": (str, "cp sweep argument scaling: statement or proof"),
    "max_n": (int, "largest N in the oracle suite"),
    "samples": (int, "Monte Carlo draws per grid point"),
    "count": (int, "number of draws"),
    "seed": (int, "64-bit seed"),
    "threads": (int, "worker cap (default $CHIRALCP_THREADS or 1)"),
    "out": (str, "output path (default stdout)"),
    "format": (str, "csv or json"),
    "no_timestamp": (_bool, "omit the timestamp header"),
    "require_decreasing": (_bool, "exit 4 unless rel_err strictly decreases"),
}
DEFAULTS = {"format": "csv", "no_timestamp": False, "require_decreasing": False,
            "convention": "statement", "max_n": 6, "samples": 100000, "seed": 0}


@dataclass
class RunConfig:
    command: str
    kind: str | None
    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, DEFAULTS.get(key, default))

    def require(self, key):
        val = self.get(key)
        if val is None:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        return val

    def to_text(self) -> str:
        lines = [f"command={self.command}"]
        if self.kind:
            lines.append(f"kind={self.kind}")
        merged = {**DEFAULTS, **self.values}
        for key in sorted(merged):
            val = merged[key]
            if isinstance(val, list):
                text = ",".join(_fmt_scalar(v) for v in val)
            else:
                text = _fmt_scalar(val)
            lines.append(f"{key}={text}")
        return "\n".join(lines) + "\n"


def load_config_file(path: str) -> dict:
    """Parse key=value lines ('#' comments, blank lines ignored)."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = load_config_file(args.config) if args.config else {}
    command = args.command
    kind = getattr(args, "kind", None)
    for meta_key, current in (("command", command), ("kind", kind)):
        if meta_key in raw and current is not None and raw[meta_key] != current:
            raise ConfigError(f"config file is for {meta_key} {raw[meta_key]!r}, not {current!r}")
        raw.pop(meta_key, None)
    values = {}
    for key, text in raw.items():
        if key not in OPTIONS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = OPTIONS[key][0](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r}") from exc
    for key in OPTIONS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    if values.get("format", "csv") not in ("csv", "json"):
        raise ConfigError("--format must be csv or json")
    return RunConfig(command, kind, values)


def _add_options(parser: argparse.ArgumentParser, names):
    for name in names:
        parse, text = OPTIONS[name]
        flag = "--" + name.replace("_", "-")
        if parse is _bool:
            parser.add_argument(flag, dest=name, action="store_true", default=None, help=text)
        else:
            parser.add_argument(flag, dest=name, default=None, help=text,
                                type=_argtype(parse, flag))


def _argtype(parse, flag):
    def conv(text):
        try:
            return parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad value for {flag}: {text!r}") from exc

    return conv


SOURCE_OPTS = ["n", "l", "omegas", "z", "z_sq"]
OUTPUT_OPTS = ["out", "format", "no_timestamp", "threads"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chiralcp",
        description="Averages of characteristic polynomials for the deformed chiral ensemble with a source.",
        epilog=COLUMNS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="flat key=value file; flags override it")

    p_eval = sub.add_parser("eval", help="evaluate an average on a grid", epilog=COLUMNS_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
    p_eval.add_argument("kind", choices=EVAL_KINDS)
    common(p_eval)
    _add_options(p_eval, SOURCE_OPTS + ["y", "zarg", "v", "x", "p", "tau", "rel_tol", "radius",
                                        "method"] + OUTPUT_OPTS)

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("kind", choices=VERIFY_SUITES)
    common(p_ver)
    _add_options(p_ver, ["max_n", "samples", "seed"] + OUTPUT_OPTS)

    p_asym = sub.add_parser("asymptotics", help="finite-N convergence sweep to the large-N limit")
    p_asym.add_argument("kind", choices=SWEEP_KINDS)
    common(p_asym)
    _add_options(p_asym, ["l", "r", "xi", "alpha", "beta", "a", "w", "n_list", "convention",
                          "require_decreasing"] + OUTPUT_OPTS)

    p_samp = sub.add_parser("sample", help="dump Monte Carlo draws and log weights")
    common(p_samp)
    _add_options(p_samp, SOURCE_OPTS + ["count", "seed"] + OUTPUT_OPTS)
    return parser


# ---------------------------------------------------------------------------
# output

def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, complex):
        return format(v.real, ".17g") + ("+" if v.imag >= 0 or math.isnan(v.imag) else "") + \
            format(v.imag, ".17g") + "j"
    return str(v)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def render(columns, rows, fmt: str, timestamp: bool) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds") if timestamp else None
    if fmt == "json":
        doc = {}
        if stamp:
            doc["generated"] = stamp
        doc["columns"] = list(columns)
        doc["rows"] = [{c: _json_value(v) for c, v in zip(columns, row)} for row in rows]
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    if stamp:
        buf.write(f"# generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt_scalar(v) for v in row])
    return buf.getvalue()


def emit(cfg: RunConfig, columns, rows):
    text = render(columns, rows, cfg.get("format"), not cfg.get("no_timestamp"))
    out = cfg.get("out")
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    with open(out + ".config", "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())


# ---------------------------------------------------------------------------
# commands

def params_from_config(cfg: RunConfig) -> EnsembleParams:
    l = cfg.require("l")
    omegas, z, z_sq = cfg.get("omegas"), cfg.get("z"), cfg.get("z_sq")
    given = sum(v is not None for v in (omegas, z, z_sq))
    if given != 1:
        raise ConfigError("give exactly one source: --omegas, --z or --z-sq")
    n = cfg.get("n")
    if omegas is not None:
        if n is None:
            n = len(omegas)
        return EnsembleParams(n, l, Distinct(tuple(omegas)))
    n = cfg.require("n")
    rho = z * z if z is not None else z_sq
    return EnsembleParams(n, l, Degenerate(rho, n))


def _meta_text(meta: dict) -> str:
    return json.dumps({k: _json_value(v) for k, v in sorted(meta.items())}, sort_keys=True)


def _value_row(res: exact.EvalResult):
    val = complex(res.value)
    return [val.real, val.imag, float(res.abs_err), _meta_text(res.meta)]


def cmd_eval(kind: str, cfg: RunConfig) -> int:
    params = params_from_config(cfg)
    rel_tol = cfg.get("rel_tol")
    radius = cfg.get("radius")
    method = cfg.get("method")
    rows = []
    if kind == "inverse-cp":
        kw = {} if rel_tol is None else {"rel_tol": rel_tol}
        for y in cfg.require("y"):
            res = exact.inverse_cp(params, y, radius=radius, **kw) if method is None else \
                exact.inverse_cp(params, y, radius=radius, method=method, **kw)
            rows.append([y.real, y.imag] + _value_row(res))
    elif kind == "cp":
        for z in cfg.require("zarg"):
            res = exact.cp(params, z, method=method or "moments")
            rows.append([z.real, z.imag] + _value_row(res))
    elif kind == "ratio":
        kw = {} if rel_tol is None else {"rel_tol": rel_tol}
        for v, z in itertools.product(cfg.require("v"), cfg.require("zarg")):
            res = exact.ratio_cp(params, v, z, radius=radius, **kw)
            rows.append([v.real, v.imag, z.real, z.imag] + _value_row(res))
    elif kind == "kernel":
        ys = cfg.require("y")
        if any(y.imag != 0 for y in ys):
            raise ConfigError("kernel arguments must be real")
        for x, y in itertools.product(cfg.require("x"), [y.real for y in ys]):
            res = exact.kernel(params, x, y, radius=radius)
            rows.append([x, y] + _value_row(res))
    elif kind in ("d", "g"):
        if not params.degenerate:
            raise ConfigError(f"eval {kind} needs a degenerate source (--z or --z-sq)")
        rho = params.source.z_sq
        if kind == "d":
            for p in cfg.require("p"):
                res = exact.d_function(params.n, params.l, rho, p)
                rows.append([p] + _value_row(res))
        else:
            for tau in cfg.require("tau"):
                res = exact.g_function(params.n, params.l, rho, tau, method=method or "auto")
                rows.append([tau] + _value_row(res))
    emit(cfg, EVAL_COLUMNS[kind] + VALUE_COLUMNS, rows)
    return EXIT_OK


def cmd_verify(suite: str, cfg: RunConfig) -> int:
    if suite == "identities":
        checks = verify.identity_checks()
    elif suite == "oracles":
        checks = verify.oracle_checks(cfg.get("max_n"))
    else:
        checks = verify.mc_checks(cfg.get("samples"), cfg.get("seed"), cfg.get("threads"))
    rows = [[c.suite, c.case, c.deviation, c.tolerance, c.required, c.passed] for c in checks]
    emit(cfg, VERIFY_COLUMNS, rows)
    ok = verify.suite_passed(checks)
    failed = sum(1 for c in checks if c.required and not c.passed)
    print(f"verify {suite}: {'PASS' if ok else 'FAIL'} ({len(checks) - failed}/{len(checks)} checks)",
          file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_asymptotics(kind: str, cfg: RunConfig) -> int:
    kw = {k: cfg.get(k) for k in ("xi", "alpha", "beta", "a", "w") if cfg.get(k) is not None}
    scaling = asym.ScalingParams(r=cfg.require("r"), **kw)
    table = asym.convergence_sweep(kind.replace("-", "_"), cfg.require("l"), scaling,
                                   cfg.require("n_list"), convention=cfg.get("convention"))
    rows = [[r.n, r.finite, r.limit, r.rel_err] for r in table.rows]
    emit(cfg, SWEEP_COLUMNS, rows)
    for n, why in table.dropped:
        print(f"row N={n} dropped: {why}", file=sys.stderr)
    if not table.decreasing:
        print("warning: rel_err is not strictly decreasing", file=sys.stderr)
        if cfg.get("require_decreasing"):
            return EXIT_VERIFY
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    params = params_from_config(cfg)
    count, seed = cfg.require("count"), cfg.require("seed")
    batch = mc.sample_batch(params, mc.source_matrix(params), count, seed, cfg.get("threads"))
    cols = ["draw"] + [f"x{i + 1}" for i in range(params.n)] + ["log_weight"]
    rows = [[i] + list(map(float, batch.x[i])) + [float(batch.log_weight[i])] for i in range(len(batch))]
    emit(cfg, cols, rows)
    return EXIT_OK


_NEGATIVE_VALUE = re.compile(r"^-[0-9.]")


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Join '--opt -1,2' into '--opt=-1,2'; argparse would read '-1,2' as a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve_config(args)
        if cfg.get("threads") is None and os.environ.get("CHIRALCP_THREADS"):
            cfg.values["threads"] = int(os.environ["CHIRALCP_THREADS"])
        if args.command == "eval":
            return cmd_eval(args.kind, cfg)
        if args.command == "verify":
            return cmd_verify(args.kind, cfg)
        if args.command == "asymptotics":
            return cmd_asymptotics(args.kind, cfg)
        return cmd_sample(cfg)
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"chiralcp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ConditioningError, SingularMatrixError, OverflowError) as exc:
        print(f"chiralcp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
