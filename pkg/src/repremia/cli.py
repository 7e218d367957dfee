"""Command-line front end.

Every subcommand reads a JSON scenario (see :mod:`repremia.scenario`) and
writes deterministic tables.  CSV files start with a ``# config:`` line
echoing the resolved configuration; JSON files carry it under ``config``.

Exit codes: 0 success, 2 configuration error, 3 success with solver
warnings, 4 numerical failure or failed verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import scenario as scn
from .bowley import beta_curve, insurer_rows, sweep
from .errors import ConfigError, ReinsuranceError
from .insurer_solver import solve_insurer
from .oracle import run_verification
from .premium import premium_branch, realized_premium

log = logging.getLogger("repremia")

EXIT_OK, EXIT_CONFIG, EXIT_WARN, EXIT_FAIL = 0, 2, 3, 4


class _Outcome:
    """Collects files to emit and the worst status seen."""

    def __init__(self, args, sc: scn.Scenario):
        self.args = args
        self.sc = sc
        self.files: list[tuple[str, str]] = []
        self.code = EXIT_OK

    def flag(self, code: int):
        self.code = max(self.code, code)

    def add(self, name: str, text: str):
        self.files.append((name, text))


# -- formatting ---------------------------------------------------------------


def fmt(x) -> str:
    """Fixed 12-significant-digit rendering used in every CSV."""
    if x is None:
        return "inf"
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(payload: dict[str, Any], config: dict[str, Any]) -> str:
    body = {"config": config}
    body.update(payload)
    return json.dumps(_jsonable(body), indent=2) + "\n"


def write_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], config: dict[str, Any]) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_jsonable(config), separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _config(sc: scn.Scenario, command: str) -> dict[str, Any]:
    cfg = sc.resolved()
    cfg["command"] = command
    return cfg


# -- subcommands --------------------------------------------------------------


def _single_delta(sc: scn.Scenario) -> float:
    if len(sc.deltas) != 1:
        raise ConfigError("premium.delta: this command needs a single delta (use --delta)")
    return sc.deltas[0]


def cmd_premium(out: _Outcome):
    sc = out.sc
    delta = _single_delta(sc)
    p = sc.params(delta)
    t = p.thresholds(sc.eval_a)
    y = np.asarray(sc.eval_y, dtype=float)
    prem = np.atleast_1d(realized_premium(p, t, y)) if y.size else np.empty(0)
    branch = np.atleast_1d(premium_branch(p, t, y)) if y.size else np.empty(0, dtype=object)
    cfg = _config(sc, "premium")
    cfg["evaluation"] = {"a": sc.eval_a, "delta": delta}
    if out.args.format == "json":
        recs = [{"y": float(a), "premium": float(b), "branch": str(c)} for a, b, c in zip(y, prem, branch)]
        out.add("premium.json", dump_json({"rows": recs}, cfg))
    else:
        out.add("premium.csv", write_csv(("y", "premium", "branch"), list(zip(y, prem, branch)), cfg))


def cmd_solve(out: _Outcome):
    sc = out.sc
    if sc.insurer is None:
        raise ConfigError("insurer: required for this command")
    cfg = _config(sc, "solve")
    reports, summary = [], []
    for i, delta in enumerate(sc.deltas):
        p = sc.params(delta)
        rep = solve_insurer(sc.loss, p, sc.insurer, sc.outer_grid, sc.inner_grid)
        if rep.warnings:
            out.flag(EXIT_WARN)
        d = {"delta": delta, "theta1": p.theta1}
        d.update(rep.to_dict())
        reports.append(d)
        inner = rep.inner
        summary.append((delta, p.theta1, rep.a_star, inner.d1, inner.d2, rep.value, inner.branch))
        if out.args.out:
            trace = rep.trace_csv()
            tcfg = dict(cfg, delta=delta)
            out.add(f"trace_{i:04d}.csv", "# config: " + json.dumps(_jsonable(tcfg), separators=(",", ":")) + "\n" + trace)
    header = ("delta", "theta1", "a", "d1", "d2", "value", "branch")
    if out.args.out or out.args.format == "json":
        out.add("solve.json", dump_json({"results": reports}, cfg))
    if out.args.out or out.args.format == "csv":
        out.add("solve.csv", write_csv(header, summary, cfg))


def _row_values(r) -> list[Any]:
    return [r.delta, r.theta1, r.d1, r.dI, r.d2, r.a, r.insurer_value, r.reinsurer_value, r.branch]


SWEEP_HEADER = ("delta", "theta1", "d1", "dI", "d2", "a", "insurer_value", "reinsurer_value", "branch")


def _flag_rows(out: _Outcome, rows):
    if any(r.branch == "Failed" for r in rows):
        out.flag(EXIT_FAIL)
    elif any(r.warnings for r in rows):
        out.flag(EXIT_WARN)


def cmd_bowley(out: _Outcome):
    sc = out.sc
    if sc.reinsurer is None:
        raise ConfigError("reinsurer: required for this command")
    bc = sc.bowley_config(out.args.threads)
    rep = sweep(bc)
    _flag_rows(out, rep.rows)
    cfg = _config(sc, "bowley")
    rows = [_row_values(r) for r in rep.rows]
    if out.args.out or out.args.format == "json":
        out.add("bowley.json", dump_json({"summary": rep.summary()}, cfg))
    if out.args.out or out.args.format == "csv":
        out.add("sweep.csv", write_csv(SWEEP_HEADER, rows, cfg))


def cmd_sweep(out: _Outcome):
    sc = out.sc
    bc = sc.bowley_config(out.args.threads)
    if sc.reinsurer is not None:
        rows = sweep(bc).rows
    else:
        rows = insurer_rows(bc)
    _flag_rows(out, rows)
    cfg = _config(sc, "sweep")
    table = [_row_values(r) for r in rows]
    if out.args.format == "json":
        recs = [dict(zip(SWEEP_HEADER, _jsonable(v))) for v in table]
        out.add("sweep.json", dump_json({"rows": recs}, cfg))
    else:
        out.add("sweep.csv", write_csv(SWEEP_HEADER, table, cfg))


def cmd_beta_curve(out: _Outcome):
    sc = out.sc
    if not sc.betas:
        raise ConfigError("betas: required for this command")
    bc = sc.bowley_config(out.args.threads)
    rows = insurer_rows(bc)
    _flag_rows(out, rows)
    kind = sc.reinsurer.kind if sc.reinsurer is not None else "tvar"
    try:
        curve = beta_curve(bc, sc.betas, kind=kind, rows=rows)
    except ValueError as exc:
        raise ConfigError(f"betas: {exc}") from exc
    cfg = _config(sc, "beta-curve")
    cfg["beta_kind"] = kind
    header = ("beta", "delta_min", "delta_max")
    if out.args.format == "json":
        recs = [dict(zip(header, r)) for r in curve]
        out.add("beta_curve.json", dump_json({"rows": recs}, cfg))
    else:
        out.add("beta_curve.csv", write_csv(header, curve, cfg))


def _junit(cases: list[tuple[float, Any]], cfg: dict[str, Any]) -> str:
    suite = ET.Element("testsuite", name="repremia-verify", tests=str(len(cases)),
                       failures=str(sum(not c.passed for _, c in cases)))
    props = ET.SubElement(suite, "properties")
    ET.SubElement(props, "property", name="config", value=json.dumps(_jsonable(cfg), separators=(",", ":")))
    for delta, c in cases:
        tc = ET.SubElement(suite, "testcase", classname=f"delta={fmt(delta)}", name=c.name)
        if not c.passed:
            f = ET.SubElement(tc, "failure", message=f"margin={fmt(c.margin)}")
            f.text = c.detail
    ET.indent(suite)
    return ET.tostring(suite, encoding="unicode") + "\n"


def cmd_verify(out: _Outcome):
    sc = out.sc
    if sc.insurer is None:
        raise ConfigError("insurer: required for this command")
    cases = []
    for delta in sc.deltas:
        res = run_verification(sc.loss, sc.params(delta), sc.insurer, sc.seed, sc.cases, sc.mc_samples)
        cases += [(delta, c) for c in res]
    if any(not c.passed for _, c in cases):
        out.flag(EXIT_FAIL)
    cfg = _config(sc, "verify")
    rows = [(d, c.name, "pass" if c.passed else "fail", c.margin, c.detail) for d, c in cases]
    margins = write_csv(("delta", "case", "status", "margin", "detail"), rows, cfg)
    if out.args.out:
        out.add("verify.xml", _junit(cases, cfg))
        out.add("margins.csv", margins)
    elif out.args.format == "json":
        recs = [dict(zip(("delta", "case", "status", "margin", "detail"), r)) for r in rows]
        out.add("verify.json", dump_json({"cases": recs}, cfg))
    else:
        out.add("margins.csv", margins)


COMMANDS = {
    "premium": (cmd_premium, "evaluate the realized premium on a grid of ceded amounts"),
    "solve": (cmd_solve, "solve the insurer's problem for each delta"),
    "bowley": (cmd_bowley, "leader-follower choice of delta: summary and sweep table"),
    "sweep": (cmd_sweep, "per-delta best responses as a table"),
    "beta-curve": (cmd_beta_curve, "optimal delta range for each reinsurer level"),
    "verify": (cmd_verify, "run the cross-check suite"),
}


# -- argument handling --------------------------------------------------------


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON file")
    common.add_argument("--out", help="output directory (default: print to stdout)")
    common.add_argument("--seed", type=_seed, help="override solver.seed")
    common.add_argument("--threads", type=_positive, help="worker processes for per-delta rows")
    grp = common.add_mutually_exclusive_group()
    grp.add_argument("--delta", type=float, help="single scheme slope")
    grp.add_argument("--delta-grid", metavar="START:END:STEP", help="inclusive grid of slopes")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="stdout format")

    parser = argparse.ArgumentParser(prog="repremia", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def _apply_overrides(sc: scn.Scenario, args) -> scn.Scenario:
    if args.seed is not None:
        sc.seed = args.seed
    if args.threads is not None:
        sc.threads = args.threads
    if args.delta is not None:
        sc.deltas = [float(args.delta)]
    elif args.delta_grid is not None:
        sc.deltas = scn.parse_grid(args.delta_grid, "--delta-grid")
    for d in sc.deltas:
        sc.params(d)
    return sc


def _default_format(command: str) -> str:
    return "json" if command in ("bowley", "solve") else "csv"


def _emit(out: _Outcome, stdout) -> None:
    target = out.args.out or out.sc.out_dir
    if target:
        path = Path(target)
        path.mkdir(parents=True, exist_ok=True)
        for name, text in out.files:
            (path / name).write_text(text)
            log.info("wrote %s", path / name)
    else:
        for _, text in out.files:
            stdout.write(text)


def _setup_logging():
    level = os.environ.get("REPREMIA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None, stdout=None) -> int:
    _setup_logging()
    stdout = sys.stdout if stdout is None else stdout
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = _default_format(args.command)
    try:
        sc = _apply_overrides(scn.load(args.scenario), args)
        if args.out is None and sc.out_dir is not None:
            args.out = sc.out_dir
        out = _Outcome(args, sc)
        COMMANDS[args.command][0](out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReinsuranceError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(out, stdout)
    return out.code


if __name__ == "__main__":
    sys.exit(main())
