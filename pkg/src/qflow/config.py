"""Run configuration: JSON parsing, validation and initial-data resolution."""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .errors import ConfigError
from .flow import FlowConfig
from .identities import ExtremalParams, extremal_metric
from .output import read_snapshot

DEFAULTS = dict(N=256, dt_max=1e-3, T=50.0, g2_stop=1e-12, safety=0.5)

# config key -> FlowConfig field
_FLOW_KEYS = {
    "alpha": "alpha",
    "N": "n",
    "dt_max": "dt_max",
    "T": "T",
    "g2_stop": "g2_stop",
    "safety": "safety",
    "sample_stride": "sample_stride",
    "snapshot_stride": "snapshot_stride",
    "orthogonality": "orthogonality",
}
_OTHER_KEYS = {"initial", "seed", "output"}


class InitialDataError(ValueError):
    """Initial data cannot be built or is not admissible."""


class ExpressionError(ConfigError, InitialDataError):
    """Malformed initial-data expression; carries the 0-based column when known."""

    def __init__(self, message: str, column: int | None = None):
        where = f" at column {column + 1}" if column is not None else ""
        super().__init__(f"{message}{where}")
        self.detail = message
        self.column = column


# --- expressions -----------------------------------------------------------

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": math.pi, "e": math.e}


def parse_expression(text: str):
    """Compile ``text`` into a function of ``theta``; only a tiny arithmetic grammar is allowed.

    ``^`` means power (same precedence as ``**``); error columns refer to ``text``.
    """
    src = text.strip()
    lead = len(text) - len(text.lstrip())
    carets = [i for i, ch in enumerate(src) if ch == "^"]
    # column in the rewritten source -> column in text
    shifted = [c + j for j, c in enumerate(carets)]

    def where(col):
        if col is None:
            return None
        return lead + col - sum(1 for c in shifted if c < col)

    try:
        tree = ast.parse(src.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(
            f"syntax error in {text!r}: {exc.msg}", where((exc.offset or 1) - 1)
        ) from None
    try:
        _validate(tree.body)
    except ExpressionError as exc:
        raise ExpressionError(exc.detail, where(exc.column)) from None
    return lambda theta: np.broadcast_to(_eval(tree.body, theta), np.shape(theta)).astype(float)


def _validate(node) -> None:
    col = getattr(node, "col_offset", None)
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINARY:
            raise ExpressionError(f"operator {type(node.op).__name__} is not allowed", col)
        _validate(node.left)
        _validate(node.right)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ExpressionError(f"operator {type(node.op).__name__} is not allowed", col)
        _validate(node.operand)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}", col)
    elif isinstance(node, ast.Name):
        if node.id != "theta" and node.id not in _CONSTS:
            raise ExpressionError(f"undefined symbol {node.id!r}", col)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            name = getattr(node.func, "id", "?")
            raise ExpressionError(f"unknown function {name!r}", col)
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument", col)
        _validate(node.args[0])
    else:
        raise ExpressionError(f"unsupported syntax {type(node).__name__}", col)


def _eval(node, theta):
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](_eval(node.left, theta), _eval(node.right, theta))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, theta))
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return theta if node.id == "theta" else _CONSTS[node.id]
    return _FUNCS[node.func.id](_eval(node.args[0], theta))


# --- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    flow: FlowConfig
    initial: object
    seed: int = 0
    output: str | None = None
    base_dir: str = "."
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = dict(self.raw)
        for key, name in _FLOW_KEYS.items():
            out[key] = getattr(self.flow, name)
        out["seed"] = self.seed
        return out


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse a JSON run configuration; unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(raw) - set(_FLOW_KEYS) - _OTHER_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    for key in ("alpha", "initial"):
        if key not in raw:
            raise ConfigError(f"{key}: required")
    if raw["alpha"] not in (1, 4) or isinstance(raw["alpha"], bool):
        raise ConfigError(f"alpha: must be 1 or 4, got {raw['alpha']!r}")
    kw = {}
    for key, name in _FLOW_KEYS.items():
        val = raw.get(key, DEFAULTS.get(key))
        if val is None:
            continue
        if key in ("N", "sample_stride", "snapshot_stride"):
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{key}: must be an integer, got {val!r}")
        elif key != "orthogonality" and (isinstance(val, bool) or not isinstance(val, (int, float))):
            raise ConfigError(f"{key}: must be a number, got {val!r}")
        kw[name] = val
    try:
        flow = FlowConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(_config_field_message(str(exc))) from None
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed: must be an integer, got {seed!r}")
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError(f"output: must be a string, got {output!r}")
    _check_initial(raw["initial"])
    return RunConfig(flow, raw["initial"], seed, output, str(base_dir), raw)


def _config_field_message(msg: str) -> str:
    # FlowConfig messages start with the field name; report the config key instead
    name, _, rest = msg.partition(" ")
    key = {v: k for k, v in _FLOW_KEYS.items()}.get(name)
    return f"{key}: {rest}" if key else msg


def _check_initial(desc) -> None:
    if isinstance(desc, str):
        parse_expression(desc)
        return
    if isinstance(desc, dict) and len(desc) == 1:
        (kind, body), = desc.items()
        if kind == "snapshot" and isinstance(body, str):
            return
        if kind == "extremal" and isinstance(body, dict):
            extra = set(body) - {"c", "lambda", "beta", "normalize_length"}
            if extra:
                raise ConfigError(f"initial.extremal: unknown key(s) {', '.join(sorted(extra))}")
            return
    raise ConfigError(
        "initial: expected an expression string, {\"snapshot\": path} or {\"extremal\": {...}}"
    )


def build_initial(cfg: RunConfig) -> np.ndarray:
    """Samples of the initial factor on the configured grid."""
    n = cfg.flow.n
    desc = cfg.initial
    if isinstance(desc, str):
        v = parse_expression(desc)(spectral.grid(n))
    elif "snapshot" in desc:
        snap = read_snapshot(Path(cfg.base_dir) / desc["snapshot"])
        v = snap["v"] if snap["n"] == n else spectral.interpolate(snap["v"], n)
    else:
        body = desc["extremal"]
        try:
            params = ExtremalParams(
                c=float(body.get("c", 1.0)),
                lam=float(body.get("lambda", 1.0)),
                beta=float(body.get("beta", 0.0)),
                alpha=cfg.flow.alpha,
            )
        except (TypeError, ValueError) as exc:
            raise InitialDataError(f"initial.extremal: {exc}") from None
        v = extremal_metric(params, n, bool(body.get("normalize_length", False))).v
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InitialDataError("initial data has non-finite samples")
    if not v.min() > spectral.POSITIVITY_FLOOR:
        raise InitialDataError(f"initial data must be positive; min is {v.min():.6g}")
    return v

