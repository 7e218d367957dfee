"""Scenario files: versioned JSON with a strict schema.

Example::

    {
      "schema": 1,
      "loss": {"kind": "pareto", "eta": 2.0, "zeta": 2.0},
      "premium": {"theta0": 1.0, "theta1_bar": 0.5, "theta2": 2.0,
                  "delta_grid": "0:1:0.001"},
      "insurer": {"kind": "tvar", "alpha": 0.1},
      "reinsurer": {"kind": "tvar", "beta": 0.05}
    }

Reinsurer blocks accept ``beta`` as an alias for the level of TVaR/VaR.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping


from .bowley import BowleyConfig, delta_grid, theta1_rule
from .dist import LossModel, from_config
from .errors import ConfigError, DomainError
from .premium import PremiumParams
from .riskmeasure import Distortion

SCHEMA_VERSION = 1
TOP_KEYS = {"schema", "loss", "premium", "insurer", "reinsurer", "solver", "betas", "evaluation", "output"}
PREMIUM_KEYS = {"theta0", "theta1", "theta1_bar", "theta2", "delta", "delta_grid"}
SOLVER_KEYS = {"outer_grid", "inner_grid", "eps_val", "seed", "mc_samples", "cases", "threads"}
EVAL_KEYS = {"a", "y"}
OUTPUT_KEYS = {"dir"}


@dataclass
class Scenario:
    loss: LossModel
    theta0: float
    theta1: float | None
    theta1_bar: float | None
    theta2: float
    deltas: list[float]
    insurer: Distortion | None
    reinsurer: Distortion | None = None
    betas: list[float] = field(default_factory=list)
    outer_grid: int = 200
    inner_grid: int = 200
    eps_val: float | None = None
    seed: int = 0
    mc_samples: int = 200_000
    cases: int = 20
    threads: int = 1
    eval_a: float = 1.0
    eval_y: list[float] = field(default_factory=list)
    out_dir: str | None = None
    raw: dict[str, Any] = field(default_factory=dict)

    def params(self, delta: float) -> PremiumParams:
        if self.theta1_bar is not None:
            t1 = theta1_rule(delta, self.theta0, self.theta1_bar)
        else:
            t1 = self.theta1
        try:
            return PremiumParams(delta, self.theta0, t1, self.theta2)
        except DomainError as exc:
            raise ConfigError(f"premium: {exc}") from exc

    def bowley_config(self, threads: int | None = None) -> BowleyConfig:
        if self.insurer is None:
            raise ConfigError("insurer: required for this command")
        bar = self.theta1_bar if self.theta1_bar is not None else self.theta1
        try:
            return BowleyConfig(
                loss=self.loss,
                theta0=self.theta0,
                theta1_bar=bar,
                theta2=self.theta2,
                insurer=self.insurer,
                reinsurer=self.reinsurer,
                deltas=tuple(self.deltas),
                eps_val=self.eps_val,
                outer_grid=self.outer_grid,
                inner_grid=self.inner_grid,
                threads=self.threads if threads is None else threads,
            )
        except DomainError as exc:
            raise ConfigError(f"premium: {exc}") from exc

    def resolved(self) -> dict[str, Any]:
        """Fully resolved configuration echoed into every output file."""
        out = {
            "schema": SCHEMA_VERSION,
            "loss": self.loss.to_config(),
            "premium": {
                "theta0": self.theta0,
                "theta1": self.theta1,
                "theta1_bar": self.theta1_bar,
                "theta2": self.theta2,
                "deltas": list(self.deltas),
            },
            "insurer": None if self.insurer is None else self.insurer.to_config(),
            "reinsurer": None if self.reinsurer is None else self.reinsurer.to_config(),
            "solver": {
                "outer_grid": self.outer_grid,
                "inner_grid": self.inner_grid,
                "eps_val": self.eps_val,
                "seed": self.seed,
                "mc_samples": self.mc_samples,
                "cases": self.cases,
            },
        }
        if self.betas:
            out["betas"] = list(self.betas)
        return out


def _check_keys(block: Any, allowed: set[str], where: str) -> Mapping[str, Any]:
    if not isinstance(block, Mapping):
        raise ConfigError(f"{where}: expected an object")
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"{where}.{sorted(extra)[0]}: unknown key")
    return block


def _number(block: Mapping[str, Any], key: str, where: str, default=None) -> float:
    if key not in block:
        if default is None:
            raise ConfigError(f"{where}.{key}: required key missing")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number")
    return float(v)


def _int(block: Mapping[str, Any], key: str, where: str, default: int, minimum: int = 1) -> int:
    if key not in block:
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{where}.{key}: expected an integer >= {minimum}")
    return v


def parse_grid(spec: Any, where: str = "premium.delta_grid") -> list[float]:
    """``"start:end:step"`` or ``[start, end, step]`` into an inclusive grid."""
    if isinstance(spec, str):
        parts = spec.split(":")
    elif isinstance(spec, (list, tuple)):
        parts = list(spec)
    else:
        raise ConfigError(f"{where}: expected 'start:end:step' or [start, end, step]")
    if len(parts) != 3:
        raise ConfigError(f"{where}: expected three fields start:end:step")
    try:
        start, end, step = (float(x) for x in parts)
        return [float(x) for x in delta_grid(start, end, step)]
    except (TypeError, ValueError, DomainError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _distortion(block: Any, where: str) -> Distortion:
    if isinstance(block, Mapping) and "beta" in block and block.get("kind") in ("tvar", "var"):
        block = {("alpha" if k == "beta" else k): v for k, v in block.items()}
    return Distortion.from_config(block, where)


def parse(doc: Any) -> Scenario:
    """Validate a decoded scenario document."""
    doc = _check_keys(doc, TOP_KEYS, "scenario")
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    if "loss" not in doc:
        raise ConfigError("loss: required key missing")
    loss = from_config(doc["loss"])
    prem = _check_keys(doc.get("premium"), PREMIUM_KEYS, "premium")
    theta0 = _number(prem, "theta0", "premium")
    theta2 = _number(prem, "theta2", "premium")
    if ("theta1" in prem) == ("theta1_bar" in prem):
        raise ConfigError("premium.theta1: give exactly one of theta1 or theta1_bar")
    theta1 = _number(prem, "theta1", "premium") if "theta1" in prem else None
    bar = _number(prem, "theta1_bar", "premium") if "theta1_bar" in prem else None
    if "delta" in prem and "delta_grid" in prem:
        raise ConfigError("premium.delta_grid: give either delta or delta_grid")
    if "delta" in prem:
        deltas = [_number(prem, "delta", "premium")]
    elif "delta_grid" in prem:
        deltas = parse_grid(prem["delta_grid"])
    else:
        deltas = [float(x) for x in delta_grid()]
    insurer = _distortion(doc["insurer"], "insurer") if "insurer" in doc else None
    reinsurer = _distortion(doc["reinsurer"], "reinsurer") if "reinsurer" in doc else None
    solver = _check_keys(doc.get("solver", {}), SOLVER_KEYS, "solver")
    evaluation = _check_keys(doc.get("evaluation", {}), EVAL_KEYS, "evaluation")
    output = _check_keys(doc.get("output", {}), OUTPUT_KEYS, "output")
    betas = doc.get("betas", [])
    if not isinstance(betas, list) or not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in betas):
        raise ConfigError("betas: expected a list of numbers")
    y = evaluation.get("y", [])
    if not isinstance(y, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0 for v in y):
        raise ConfigError("evaluation.y: expected a list of nonnegative numbers")
    eps = solver.get("eps_val")
    if eps is not None:
        eps = _number(solver, "eps_val", "solver")
    sc = Scenario(
        loss=loss,
        theta0=theta0,
        theta1=theta1,
        theta1_bar=bar,
        theta2=theta2,
        deltas=deltas,
        insurer=insurer,
        reinsurer=reinsurer,
        betas=[float(b) for b in betas],
        outer_grid=_int(solver, "outer_grid", "solver", 200, 3),
        inner_grid=_int(solver, "inner_grid", "solver", 200, 100),
        eps_val=eps,
        seed=_int(solver, "seed", "solver", 0, 0),
        mc_samples=_int(solver, "mc_samples", "solver", 200_000, 1000),
        cases=_int(solver, "cases", "solver", 20, 1),
        threads=_int(solver, "threads", "solver", 1, 1),
        eval_a=_number(evaluation, "a", "evaluation", 1.0),
        eval_y=[float(v) for v in y],
        out_dir=output.get("dir"),
        raw=dict(doc),
    )
    # validate every scheme on the grid up front
    for d in sc.deltas:
        sc.params(d)
    if sc.eval_a < 0:
        raise ConfigError("evaluation.a: expected a nonnegative number")
    return sc


def load(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"scenario: cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse(doc)
