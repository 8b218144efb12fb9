"""Command-line front end.

Every subcommand resolves its configuration from built-in defaults, then an
optional ``key = value`` file (``--config``), then explicit flags, and
embeds the resolved configuration plus a schema tag in its output.  JSON is
written with sorted keys and rationals as ``[numerator, denominator]``
pairs, so equal inputs give byte-identical files.

Exit codes: 0 success, 2 usage error, 3 audit or verification failure.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import mpmath

from .geometry import DEFAULT_PREC, PiecewiseConstant, StepFunction

__all__ = ["main", "parse_rational", "read_config", "EXIT_OK", "EXIT_USAGE", "EXIT_FAILED"]

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 2, 3
SCHEMA = "czweights.run/1"

_POW = re.compile(r"^\s*([+-]?\d+)\s*\^\s*\(?\s*([+-]?\d+)\s*\)?\s*$")


class UsageError(Exception):
    pass


def parse_rational(text) -> Fraction:
    """``"2^-10"``, ``"1/1024"``, ``"0.5"`` or ``"3"`` as an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    s = str(text).strip()
    m = _POW.match(s)
    try:
        if m:
            return Fraction(int(m.group(1))) ** int(m.group(2))
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a rational number: {text!r}") from exc


def parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from exc


def read_config(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# defaults per command; every key is also a flag
_BUILD = {"n": None, "delta": "2^-10", "epsilon": None, "p_hint": "3", "teeth": "pow2", "whitney_depth": None}
_SEARCH = {"items": "256", "zoom_scales": "3"}
DEFAULTS = {
    "build": dict(_BUILD),
    "ar": {**_BUILD, "bundle": None, "r": "2,3", **_SEARCH},
    "certify": {**_BUILD, "bundle": None, "p": "3", "s": "1", "gamma": "10", "tests": "100"},
    "sweep": {"p": "3", "s": "1", "gamma": "10", "n_max": "25", "delta": "2^-10", "r": "", "control": "true"},
    "solve": {"w": None, "F": None, "p": "2", "s": "1", "allow_other_s": "false"},
}
COMMON = {"seed": "0", "prec": str(DEFAULT_PREC), "out": None}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="czweights", description="Muckenhoupt-weight counterexample toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "build": "build and audit a construction bundle",
        "ar": "A_r characteristic estimates of a construction",
        "certify": "blow-up certificate for one construction",
        "sweep": "certificates over N = 1..n_max with a (p, s) = (2, 1) control",
        "solve": "exact solve of the 1-D problem for given w and F",
    }
    for name, keys in DEFAULTS.items():
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", help="key = value file; flags win")
        for key in list(keys) + list(COMMON):
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None, help=f"default {DEFAULTS[name].get(key, COMMON.get(key))}")
    return ap


def _resolve(args: argparse.Namespace) -> dict:
    cfg = {**DEFAULTS[args.command], **COMMON}
    if args.config:
        try:
            extra = read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        unknown = set(extra) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(extra)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _int(cfg, key) -> Optional[int]:
    v = cfg.get(key)
    if v is None:
        return None
    try:
        return int(v)
    except ValueError as exc:
        raise UsageError(f"{key} must be an integer, got {v!r}") from exc


def _bool(cfg, key) -> bool:
    return str(cfg.get(key)).lower() in ("1", "true", "yes", "on")


def _num(cfg, key) -> float:
    """Exponents are kept as floats when non-integral and as ints otherwise."""
    q = parse_rational(cfg[key])
    return int(q) if q.denominator == 1 else float(q)


def _config_json(cfg: dict) -> dict:
    out = {}
    for k, v in sorted(cfg.items()):
        if k == "out":
            continue  # where results go does not change them
        if k in ("delta", "epsilon") and v is not None:
            q = parse_rational(v)
            out[k] = [q.numerator, q.denominator]
        else:
            out[k] = v
    return out


def _emit(cfg: dict, name: str, text: str) -> None:
    if cfg.get("out"):
        d = Path(cfg["out"])
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _build_params(cfg: dict):
    from .construct import BuildParams

    n = _int(cfg, "n")
    if n is None:
        raise UsageError("--n is required (or --bundle where accepted)")
    try:
        return BuildParams(
            N=n,
            delta=parse_rational(cfg["delta"]),
            epsilon=None if cfg.get("epsilon") is None else parse_rational(cfg["epsilon"]),
            p_hint=_num(cfg, "p_hint"),
            teeth=cfg.get("teeth") or "pow2",
            whitney_depth=_int(cfg, "whitney_depth"),
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _construction(cfg: dict):
    from .construct import Construction, build

    if cfg.get("bundle"):
        try:
            doc = json.loads(Path(cfg["bundle"]).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read bundle: {exc}") from exc
        return Construction.from_json(doc.get("construction", doc))
    return build(_build_params(cfg), check=False)


def cmd_build(cfg: dict) -> int:
    from .construct import audit, build

    params = _build_params(cfg)
    c = build(params, check=False)
    report = audit(c)
    doc = {"schema": SCHEMA, "command": "build", "config": _config_json(cfg), "construction": c.to_json(), "audit": report.to_json()}
    _emit(cfg, "build.json", _dump(doc))
    if not report.passed:
        print(f"audit failed: {[ch.name for ch in report.failures()]}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_ar(cfg: dict) -> int:
    from .muckenhoupt import SearchConfig, ar_characteristic, theoretical_bound

    c = _construction(cfg)
    rs = parse_list(cfg["r"])
    if not rs or any(r <= 1 for r in rs):
        raise UsageError("every r must exceed 1")
    search = SearchConfig(items=_int(cfg, "items"), zoom_scales=_int(cfg, "zoom_scales"), prec=_int(cfg, "prec"))
    rows = []
    for r in rs:
        rep = ar_characteristic(c, r, search)
        if r > 2:
            rep.theoretical_bound = theoretical_bound(r, c.N, c.table)
        rows.append(rep.to_json())
    doc = {"schema": SCHEMA, "command": "ar", "config": _config_json(cfg), "N": c.N, "reports": rows}
    _emit(cfg, "ar.json", _dump(doc))
    return EXIT_OK


def cmd_certify(cfg: dict) -> int:
    from .certify import blowup_ratio, make_forcing, pde_residual
    from .sequences import frac_to_json

    c = _construction(cfg)
    p, s = _num(cfg, "p"), _num(cfg, "s")
    try:
        rep = blowup_ratio(c, p, s, float(parse_rational(cfg["gamma"])), prec=_int(cfg, "prec"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    F = make_forcing(c)
    res = pde_residual(c, F, _int(cfg, "tests"), _int(cfg, "seed"))
    doc = {
        "schema": SCHEMA,
        "command": "certify",
        "config": _config_json(cfg),
        "certificate": rep.to_json(),
        "forcing": F.to_json(),
        "residual": {
            "per_piece_ok": res.per_piece_ok,
            "tests": len(res.tests),
            "max_test_residual": frac_to_json(res.max_test_residual),
            "passed": res.passed,
        },
    }
    _emit(cfg, "certify.json", _dump(doc))
    return EXIT_OK if res.passed else EXIT_FAILED


def cmd_sweep(cfg: dict) -> int:
    from .certify import find_N, sweep_csv

    p, s = _num(cfg, "p"), _num(cfg, "s")
    if p < 2 or s < 1:
        raise UsageError("need p >= 2 and s >= 1")
    n_max = _int(cfg, "n_max")
    if n_max is None or n_max < 1:
        raise UsageError("n_max must be a positive integer")
    rs = parse_list(cfg["r"]) if cfg.get("r") else []
    if any(r <= 1 for r in rs):
        raise UsageError("every r must exceed 1")
    res = find_N(
        p, s, float(parse_rational(cfg["gamma"])), n_max,
        delta=parse_rational(cfg["delta"]), control=_bool(cfg, "control"), r_list=rs, prec=_int(cfg, "prec"),
    )
    header = [f"schema={SCHEMA}", "command=sweep"] + [f"config.{k}={v}" for k, v in sorted(cfg.items()) if k != "out"]
    _emit(cfg, "sweep.csv", sweep_csv(res, rs, header_lines=header))
    return EXIT_OK


def read_step_function(path, positive: bool = False) -> StepFunction:
    """JSON piecewise document, or text lines ``a b value`` covering consecutive intervals."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        cls = PiecewiseConstant if positive else StepFunction
        return cls.from_json(doc)
    xs, vs = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise UsageError(f"{path}:{lineno}: expected 'a b value'")
        a, b, v = (parse_rational(t) for t in parts)
        if xs and xs[-1] != a:
            raise UsageError(f"{path}:{lineno}: intervals must be consecutive")
        if not xs:
            xs.append(a)
        xs.append(b)
        vs.append(v)
    if positive:
        return PiecewiseConstant(xs, vs)
    return StepFunction(tuple(xs), tuple(vs))


def cmd_solve(cfg: dict) -> int:
    from .positive import cz_check, solve

    if not cfg.get("w") or not cfg.get("F"):
        raise UsageError("--w and --F files are required")
    try:
        w = read_step_function(cfg["w"], positive=True)
        F = read_step_function(cfg["F"])
        res = solve(w, F)
        ratio = cz_check(res, _num(cfg, "p"), _num(cfg, "s"), allow_other_s=_bool(cfg, "allow_other_s"), prec=_int(cfg, "prec"))
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    doc = {"schema": SCHEMA, "command": "solve", "config": _config_json(cfg), "solution": res.to_json()}
    doc["solution"]["ratio"] = mpmath.nstr(ratio, 30)
    _emit(cfg, "solve.json", _dump(doc))
    return EXIT_OK if res.boundary_ok and res.flux_ok else EXIT_FAILED


COMMANDS = {"build": cmd_build, "ar": cmd_ar, "certify": cmd_certify, "sweep": cmd_sweep, "solve": cmd_solve}


def main(argv: Optional[list] = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = _resolve(args)
        for key in ("seed", "prec"):
            if _int(cfg, key) is None:
                raise UsageError(f"{key} must be given")
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"czweights {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
