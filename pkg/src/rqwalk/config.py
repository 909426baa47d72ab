"""Run configuration: YAML files, presets and command-line overrides.

Precedence, lowest to highest: preset, config file, command-line flags.
Unknown keys are rejected. Angles may be written as expressions in ``pi``
(``pi/2``, ``2*pi``, ``-pi``).
"""

from __future__ import annotations

import ast
import copy
import hashlib
import json
import math
import operator
import os
from dataclasses import dataclass, field
from importlib import resources

import yaml

from .coins import (BinaryRandom, ContinuousRandom, CrwEmulation, ExplicitSequence, Fixed, PeriodicAlternating,
                    PeriodicSmooth, Uniform, named_coin)
from .errors import DomainError
from .evolution import RECORDABLE
from .state import SpinVector, gaussian, localized, spin_by_name, two_site

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_preset", "preset_names", "COMMANDS"]

COMMANDS = ("walk", "ensemble", "fit", "experiment", "crw-check")

_TOP_KEYS = {"command", "name", "description", "steps", "master_seed", "jobs", "out", "subsample", "record",
             "initial", "policy", "grid", "ensemble", "fit", "experiment", "crw"}
_INITIAL_KEYS = {"kind", "alpha_s", "beta_s", "alpha_p", "beta_p", "spin", "j0", "sigma", "cutoff"}
_POLICY_KEYS = {
    "fixed": {"coin"},
    "binary": {"c1", "c2", "p"},
    "continuous": {"q", "theta", "phi"},
    "periodic-smooth": {"T"},
    "periodic-alternating": {"T"},
    "sequence": {"sequence"},
    "crw-emulation": {"p"},
}
_GRID_KEYS = {
    "two_site": {"increment"},
    "localized_spin": {"increment", "j0"},
    "gaussian_set": {"sigmas", "spins", "cutoff"},
    "random_two_site": {"count", "seed"},
}
_ENSEMBLE_KEYS = {"realizations", "thresholds", "shared_sequence", "keep_members", "t_min"}
_FIT_KEYS = {"input", "column", "t_min", "t_max", "exponent"}
_EXPERIMENT_KEYS = {"sequence", "coin", "conditions", "search_trials", "search_p"}
_CRW_KEYS = {"p", "realizations"}
# output location and worker count do not affect any computed number
_UNHASHED_KEYS = {"out", "jobs"}


class ConfigError(Exception):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}" if key else reason)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_expr(node):
    if isinstance(node, ast.Expression):
        return _eval_expr(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_expr(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_expr(node.left), _eval_expr(node.right))
    raise ValueError("unsupported expression")


def _number(value, key) -> float:
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(_eval_expr(ast.parse(value.strip(), mode="eval")))
        except (SyntaxError, ValueError, ZeroDivisionError):
            pass
    raise ConfigError(key, f"expected a number or an expression in pi, got {value!r}")


def _integer(value, key, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {value}")
    return value


def _prob(value, key) -> float:
    p = _number(value, key)
    if not 0.0 <= p <= 1.0:
        raise ConfigError(key, f"probability must lie in [0, 1], got {p!r}")
    return p


def _block(raw, key, allowed) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(key, "expected a mapping")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"{key}.{unknown[0]}" if key else unknown[0], "unknown key")
    return raw


# -- block parsers --------------------------------------------------------------


def parse_policy(raw, key="policy"):
    if not isinstance(raw, dict):
        raise ConfigError(key, "expected a mapping with a 'kind' entry")
    kind = raw.get("kind")
    if kind not in _POLICY_KEYS:
        raise ConfigError(f"{key}.kind", f"expected one of {sorted(_POLICY_KEYS)}, got {kind!r}")
    _block(raw, key, _POLICY_KEYS[kind] | {"kind"})

    def coin(name, default):
        value = raw.get(name, default)
        try:
            return named_coin(value)
        except DomainError as exc:
            raise ConfigError(f"{key}.{name}", str(exc)) from None

    try:
        if kind == "fixed":
            return Fixed(coin("coin", "hadamard"))
        if kind == "binary":
            return BinaryRandom(coin("c1", "hadamard"), coin("c2", "fourier"), _prob(raw.get("p", 0.5), f"{key}.p"))
        if kind == "continuous":
            specs = {}
            defaults = {"q": [0, 1], "theta": [0, "pi"], "phi": [0, "2*pi"]}
            for name in ("q", "theta", "phi"):
                value = raw.get(name, defaults[name])
                if isinstance(value, (list, tuple)):
                    if len(value) != 2:
                        raise ConfigError(f"{key}.{name}", "a range must be [lo, hi]")
                    lo, hi = (_number(v, f"{key}.{name}") for v in value)
                    specs[name] = Uniform(lo, hi)
                else:
                    specs[name] = _number(value, f"{key}.{name}")
            try:
                return ContinuousRandom(**specs)
            except DomainError as exc:
                bad = next((n for n in ("q", "theta", "phi") if str(exc).startswith(n)), "")
                raise ConfigError(f"{key}.{bad}" if bad else key, str(exc)) from None
        if kind in ("periodic-smooth", "periodic-alternating"):
            T = _integer(raw.get("T"), f"{key}.T", minimum=1)
            return PeriodicSmooth(T) if kind == "periodic-smooth" else PeriodicAlternating(T)
        if kind == "sequence":
            seq = raw.get("sequence")
            if not isinstance(seq, str) or not seq.strip():
                raise ConfigError(f"{key}.sequence", "expected a string of coin labels such as 'HHF'")
            try:
                return ExplicitSequence.from_labels(seq)
            except DomainError as exc:
                raise ConfigError(f"{key}.sequence", str(exc)) from None
        return CrwEmulation(_prob(raw.get("p", 0.5), f"{key}.p"))
    except DomainError as exc:
        raise ConfigError(key, str(exc)) from None


def _spin(raw, key):
    if "spin" in raw:
        if "alpha_s" in raw or "beta_s" in raw:
            raise ConfigError(f"{key}.spin", "give either spin or alpha_s/beta_s, not both")
        try:
            return spin_by_name(raw["spin"])
        except DomainError as exc:
            raise ConfigError(f"{key}.spin", str(exc)) from None
    return SpinVector.from_angles(_number(raw.get("alpha_s", 0.0), f"{key}.alpha_s"),
                                  _number(raw.get("beta_s", 0.0), f"{key}.beta_s"))


def parse_initial(raw, key="initial"):
    raw = _block(raw, key, _INITIAL_KEYS)
    kind = raw.get("kind", "localized")
    allowed = {"localized": {"alpha_s", "beta_s", "spin", "j0"},
               "two_site": {"alpha_s", "beta_s", "alpha_p", "beta_p"},
               "gaussian": {"alpha_s", "beta_s", "spin", "sigma", "cutoff"}}
    if kind not in allowed:
        raise ConfigError(f"{key}.kind", f"expected one of {sorted(allowed)}, got {kind!r}")
    _block(raw, key, allowed[kind] | {"kind"})
    if kind == "localized":
        return localized(_spin(raw, key), _integer(raw.get("j0", 0), f"{key}.j0"))
    if kind == "two_site":
        angles = [_number(raw.get(n, 0.0), f"{key}.{n}") for n in ("alpha_s", "beta_s", "alpha_p", "beta_p")]
        return two_site(*angles)
    sigma = _number(raw.get("sigma"), f"{key}.sigma") if "sigma" in raw else None
    if sigma is None or not sigma > 0:
        raise ConfigError(f"{key}.sigma", "gaussian needs a positive sigma")
    cutoff = raw.get("cutoff")
    cutoff = None if cutoff is None else _integer(cutoff, f"{key}.cutoff", minimum=1)
    try:
        return gaussian(_spin(raw, key), sigma, cutoff)
    except DomainError as exc:
        raise ConfigError(f"{key}.cutoff", str(exc)) from None


def parse_grid(raw, key="grid"):
    from .ensemble import build_grid

    if not isinstance(raw, dict):
        raise ConfigError(key, "expected a mapping with a 'kind' entry")
    kind = raw.get("kind")
    if kind not in _GRID_KEYS:
        raise ConfigError(f"{key}.kind", f"expected one of {sorted(_GRID_KEYS)}, got {kind!r}")
    _block(raw, key, _GRID_KEYS[kind] | {"kind"})
    params = {}
    if "increment" in _GRID_KEYS[kind]:
        inc = _number(raw.get("increment", 0.0), f"{key}.increment")
        if not inc > 0:
            raise ConfigError(f"{key}.increment", f"must be positive, got {inc!r}")
        params["increment"] = inc
        if "j0" in raw:
            params["j0"] = _integer(raw["j0"], f"{key}.j0")
    if kind == "gaussian_set":
        sigmas = raw.get("sigmas")
        spins = raw.get("spins")
        if not isinstance(sigmas, list) or not sigmas:
            raise ConfigError(f"{key}.sigmas", "expected a non-empty list")
        if not isinstance(spins, list) or not spins:
            raise ConfigError(f"{key}.spins", "expected a non-empty list")
        params["sigmas"] = [_number(s, f"{key}.sigmas[{i}]") for i, s in enumerate(sigmas)]
        params["spins"] = [str(s) for s in spins]
        if raw.get("cutoff") is not None:
            params["cutoff"] = _integer(raw["cutoff"], f"{key}.cutoff", minimum=1)
    if kind == "random_two_site":
        params["count"] = _integer(raw.get("count"), f"{key}.count", minimum=1)
        params["seed"] = _integer(raw.get("seed", 0), f"{key}.seed", minimum=0)
    try:
        return build_grid(kind, **params)
    except DomainError as exc:
        raise ConfigError(key, str(exc)) from None


# -- run configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    raw: dict
    steps: int | None = None
    master_seed: int = 0
    jobs: int = 1
    out: str = "out"
    subsample: int = 1
    record: tuple[str, ...] = RECORDABLE
    initial: object = None
    policy: object = None
    grid: object = None
    ensemble: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    crw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the merged configuration, leaving out keys that cannot change results."""
        content = {k: v for k, v in self.raw.items() if k not in _UNHASHED_KEYS}
        blob = json.dumps(content, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def preset_names() -> list[str]:
    root = resources.files("rqwalk") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    path = resources.files("rqwalk") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return yaml.safe_load(path.read_text()) or {}


def _load_file(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_writable(out: str):
    probe = os.path.abspath(out)
    while not os.path.exists(probe):
        parent = os.path.dirname(probe)
        if parent == probe:
            break
        probe = parent
    if not os.path.isdir(probe) or not os.access(probe, os.W_OK):
        raise ConfigError("out", f"output location {out!r} is not writable")


def parse_config(path=None, *, command: str | None = None, preset: str | None = None,
                 overrides: dict | None = None) -> RunConfig:
    """Load, merge and validate a run configuration.

    ``overrides`` holds flag values (``steps``, ``master_seed``, ``jobs``,
    ``out``, ``subsample``, nested blocks such as ``{"fit": {"input": ...}}``);
    entries that are None are ignored.
    """
    raw: dict = {}
    if preset:
        raw = _merge(raw, load_preset(preset))
    if path is not None:
        raw = _merge(raw, _load_file(path))
    if overrides:
        raw = _merge(raw, {k: v for k, v in overrides.items() if v is not None})
    _block(raw, "", _TOP_KEYS)

    cmd = command or raw.get("command")
    if cmd not in COMMANDS:
        raise ConfigError("command", f"expected one of {COMMANDS}, got {cmd!r}")
    if command and raw.get("command") not in (None, command):
        raise ConfigError("command", f"config is for {raw.get('command')!r}, not {command!r}")
    raw["command"] = cmd

    cfg = RunConfig(command=cmd, raw=raw)
    if "steps" in raw:
        cfg.steps = _integer(raw["steps"], "steps", minimum=1)
    seed = raw.get("master_seed", 0)
    cfg.master_seed = _integer(seed, "master_seed", minimum=0)
    if cfg.master_seed >= 2**64:
        raise ConfigError("master_seed", "must fit in 64 bits")
    cfg.jobs = _integer(raw.get("jobs", 1), "jobs", minimum=1)
    cfg.subsample = _integer(raw.get("subsample", 1), "subsample", minimum=1)
    cfg.out = str(raw.get("out", os.path.join("out", cmd)))
    _check_writable(cfg.out)
    if "record" in raw:
        rec = raw["record"]
        if not isinstance(rec, list) or any(r not in RECORDABLE for r in rec):
            raise ConfigError("record", f"expected a list drawn from {RECORDABLE}")
        cfg.record = tuple(rec)

    if cmd == "walk":
        if cfg.steps is None:
            raise ConfigError("steps", "required for walk")
        if "policy" not in raw:
            raise ConfigError("policy", "required for walk")
        cfg.initial = parse_initial(raw.get("initial", {"kind": "localized", "spin": "up"}))
        cfg.policy = parse_policy(raw["policy"])
        if isinstance(cfg.policy, ExplicitSequence) and len(cfg.policy) < cfg.steps:
            raise ConfigError("policy.sequence", f"has {len(cfg.policy)} coins but steps = {cfg.steps}")
    elif cmd == "ensemble":
        if cfg.steps is None:
            raise ConfigError("steps", "required for ensemble")
        for name in ("policy", "grid"):
            if name not in raw:
                raise ConfigError(name, "required for ensemble")
        cfg.policy = parse_policy(raw["policy"])
        if isinstance(cfg.policy, ExplicitSequence) and len(cfg.policy) < cfg.steps:
            raise ConfigError("policy.sequence", f"has {len(cfg.policy)} coins but steps = {cfg.steps}")
        cfg.grid = parse_grid(raw["grid"])
        if cfg.subsample > 1:
            cfg.grid = cfg.grid.subsample(cfg.subsample)
        ens = _block(raw.get("ensemble"), "ensemble", _ENSEMBLE_KEYS)
        thresholds = ens.get("thresholds", [0.95, 0.97, 0.99])
        if not isinstance(thresholds, list) or not thresholds:
            raise ConfigError("ensemble.thresholds", "expected a non-empty list")
        thr = [_number(x, f"ensemble.thresholds[{i}]") for i, x in enumerate(thresholds)]
        if any(not 0.0 < x < 1.0 for x in thr):
            raise ConfigError("ensemble.thresholds", "values must lie in (0, 1)")
        cfg.ensemble = {
            "realizations": _integer(ens.get("realizations", 1), "ensemble.realizations", minimum=1),
            "thresholds": thr,
            "shared_sequence": bool(ens.get("shared_sequence", False)),
            "keep_members": bool(ens.get("keep_members", False)),
            "t_min": _integer(ens.get("t_min", 10), "ensemble.t_min", minimum=1),
        }
    elif cmd == "fit":
        fit = _block(raw.get("fit"), "fit", _FIT_KEYS)
        if not fit.get("input"):
            raise ConfigError("fit.input", "required for fit (or pass --input)")
        cfg.fit = {
            "input": str(fit["input"]),
            "column": str(fit.get("column", "mean_D")),
            "t_min": _integer(fit.get("t_min", 10), "fit.t_min", minimum=1),
            "t_max": None if fit.get("t_max") is None else _integer(fit["t_max"], "fit.t_max", minimum=1),
            "exponent": None if fit.get("exponent") is None else _number(fit["exponent"], "fit.exponent"),
        }
    elif cmd == "experiment":
        exp = _block(raw.get("experiment"), "experiment", _EXPERIMENT_KEYS)
        from .protocols import REFERENCE_CONDITIONS, REFERENCE_SEQUENCE, CoinLabelSequence

        try:
            seq = CoinLabelSequence(exp.get("sequence", REFERENCE_SEQUENCE))
        except DomainError as exc:
            raise ConfigError("experiment.sequence", str(exc)) from None
        conds = exp.get("conditions")
        if conds is None:
            conditions = list(REFERENCE_CONDITIONS)
        else:
            if not isinstance(conds, list) or not conds:
                raise ConfigError("experiment.conditions", "expected a list of [alpha_s, beta_s] pairs")
            conditions = []
            for i, c in enumerate(conds):
                if not isinstance(c, list) or len(c) != 2:
                    raise ConfigError(f"experiment.conditions[{i}]", "expected [alpha_s, beta_s]")
                conditions.append(tuple(_number(v, f"experiment.conditions[{i}]") for v in c))
        try:
            coin = named_coin(exp.get("coin", "hadamard"))
        except DomainError as exc:
            raise ConfigError("experiment.coin", str(exc)) from None
        cfg.experiment = {
            "sequence": seq,
            "coin": coin,
            "coin_name": str(exp.get("coin", "hadamard")),
            "conditions": conditions,
            "search_trials": _integer(exp.get("search_trials", 0), "experiment.search_trials", minimum=0),
            "search_p": _prob(exp.get("search_p", 0.5), "experiment.search_p"),
        }
        if cfg.steps is None:
            cfg.steps = len(seq)
        elif cfg.steps > len(seq):
            raise ConfigError("steps", f"sequence has only {len(seq)} labels")
    else:
        crw = _block(raw.get("crw"), "crw", _CRW_KEYS)
        cfg.crw = {"p": _prob(crw.get("p", 0.5), "crw.p"),
                   "realizations": _integer(crw.get("realizations", 10000), "crw.realizations", minimum=1)}
        if cfg.steps is None:
            cfg.steps = 100
    return cfg
