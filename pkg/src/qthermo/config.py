"""Experiment configuration: strict schema, defaults, round-trip serialization.

Configs are YAML/JSON mappings with sections `model`, `potential`, `base`,
`numerics` plus the command name.  Unknown keys are rejected (with a
suggestion), ranges are validated, and all violations are reported at once.
"""

import difflib
import json
from dataclasses import asdict, dataclass, fields

import yaml

from .base_driver import BaseSystem
from .errors import ConfigError
from .fiber_system import ModelSpec, PotentialSpec

COMMANDS = ("check-hypotheses", "solve-triple", "gibbs", "correlations",
            "pressure", "hyperbolic-times", "cylinder-count", "threshold")


@dataclass(frozen=True)
class Numerics:
    grid_n: int = 512
    burn_in: int = 48
    depth_check: int = 8
    burnin_tol: float = 1e-6
    window: int = 16
    eps: float = 0.02
    gamma: float = 0.15
    alpha: float = 0.1
    n_max: int = 24
    sample_size: int = 400
    orbit_count: int = 8
    bound_eps: float = 0.05
    anchor: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    command: object          # one of COMMANDS, or None until the CLI names it
    model: ModelSpec
    potential: PotentialSpec
    base: BaseSystem
    numerics: Numerics
    count: int = 4           # omega-ensemble size
    out_dir: str = "qthermo-out"


_MODEL_KEYS = {f.name for f in fields(ModelSpec)}
_POT_KEYS = {f.name for f in fields(PotentialSpec)}
_BASE_KEYS = {"kind", "seed", "angle", "probs", "truncation"}
_NUM_KEYS = {f.name for f in fields(Numerics)}
_TOP_KEYS = {"command", "model", "potential", "base", "numerics", "count", "out_dir"}


def _suggest(key, known):
    match = difflib.get_close_matches(key, sorted(known), n=1)
    return f" (did you mean {match[0]!r}?)" if match else ""


def _check_keys(section, data, known, errors):
    for k in data:
        if k not in known:
            path = f"{section}.{k}" if section else str(k)
            errors.append(f"unknown key {path}{_suggest(k, known)}")


def parse_config(text):
    """Parse and validate a config document; raises ConfigError listing all
    violations, or returns the fully-defaulted ExperimentConfig."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    errors = []
    _check_keys("", data, _TOP_KEYS, errors)

    command = data.get("command")
    if command is not None and command not in COMMANDS:
        errors.append(f"command must be one of {COMMANDS}, got {command!r}")

    mdata = dict(data.get("model") or {})
    _check_keys("model", mdata, _MODEL_KEYS, errors)
    pdata = dict(data.get("potential") or {})
    _check_keys("potential", pdata, _POT_KEYS, errors)
    bdata = dict(data.get("base") or {})
    _check_keys("base", bdata, _BASE_KEYS, errors)
    ndata = dict(data.get("numerics") or {})
    _check_keys("numerics", ndata, _NUM_KEYS, errors)

    numerics = None
    if not errors:
        for k, v in list(ndata.items()):
            want_int = isinstance(getattr(Numerics, k), int)
            try:
                ndata[k] = int(v) if want_int else float(v)
            except (TypeError, ValueError):
                errors.append(f"numerics.{k} must be numeric, got {v!r}")
    if not errors:
        try:
            numerics = Numerics(**ndata)
        except TypeError as exc:
            errors.append(f"numerics: {exc}")
    if numerics is not None:
        if numerics.grid_n < 64:
            errors.append(f"numerics.grid_n must be >= 64, got {numerics.grid_n}")
        if not 0.0 < numerics.eps <= 0.1:
            errors.append(f"numerics.eps must lie in (0, 0.1], got {numerics.eps}")
        if numerics.gamma <= 0.0:
            errors.append(f"numerics.gamma must be > 0, got {numerics.gamma}")
        if numerics.window < 1:
            errors.append(f"numerics.window must be >= 1, got {numerics.window}")
        if numerics.burn_in < 1:
            errors.append(f"numerics.burn_in must be >= 1, got {numerics.burn_in}")

    model = potential = base = None
    if not errors:
        try:
            if "degrees" in mdata:
                mdata["degrees"] = tuple(mdata["degrees"])
            if "dips" in mdata:
                mdata["dips"] = tuple(mdata["dips"])
            model = ModelSpec(**mdata)
        except (TypeError, ConfigError) as exc:
            errors.append(f"model: {exc}")
        try:
            potential = PotentialSpec(**pdata)
        except (TypeError, ConfigError) as exc:
            errors.append(f"potential: {exc}")
        try:
            kind = bdata.pop("kind", "rotation")
            if kind == "rotation":
                bdata.pop("probs", None)
                bdata.pop("truncation", None)
                base = BaseSystem.rotation(**bdata)
            else:
                trunc = bdata.pop("truncation", None)
                bdata.pop("angle", None)
                probs = bdata.pop("probs", (0.5, 0.5))
                if trunc is not None:
                    base = BaseSystem.bernoulli_countable(probs, trunc, **bdata)
                else:
                    base = BaseSystem.bernoulli(probs, **bdata)
        except (TypeError, ConfigError) as exc:
            errors.append(f"base: {exc}")

    count = data.get("count", 4)
    if not isinstance(count, int) or count < 1:
        errors.append(f"count must be a positive integer, got {count!r}")
    out_dir = data.get("out_dir", "qthermo-out")

    if errors:
        raise ConfigError("; ".join(errors))
    return ExperimentConfig(command=command, model=model, potential=potential,
                            base=base, numerics=numerics, count=count,
                            out_dir=out_dir)


def serialize_config(config):
    """Canonical JSON text; parse_config(serialize_config(c)) == c."""
    doc = {
        "command": config.command,
        "count": config.count,
        "out_dir": config.out_dir,
        "model": {k: (list(v) if isinstance(v, tuple) else v)
                  for k, v in asdict(config.model).items()},
        "potential": asdict(config.potential),
        "base": _base_doc(config.base),
        "numerics": asdict(config.numerics),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def _base_doc(base):
    if base.kind == "rotation":
        return {"kind": "rotation", "seed": base.seed, "angle": base.angle}
    return {"kind": "bernoulli", "seed": base.seed, "probs": list(base.probs)}


def config_with(config, **overrides):
    """A copy of the config with top-level overrides (seed goes to the base)."""
    base = config.base
    if "seed" in overrides:
        seed = overrides.pop("seed")
        if base.kind == "rotation":
            base = BaseSystem.rotation(angle=base.angle, seed=seed)
        else:
            base = BaseSystem.bernoulli(base.probs, seed=seed)
    kw = dict(command=config.command, model=config.model, potential=config.potential,
              base=base, numerics=config.numerics, count=config.count,
              out_dir=config.out_dir)
    kw.update(overrides)
    return ExperimentConfig(**kw)
