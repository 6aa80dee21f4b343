"""Experiment configuration files (YAML) with strict, line-anchored validation.

A config has these top-level sections; unknown keys anywhere are errors::

    experiment: {id: two_arm}
    instance:
      unique_optimum: true
      arms:
        - {law: bernoulli, mu: 0.5}
        - {law: scaled_beta, a: 2, b: 3}
    policy: {kind: thompson}
    run:
      horizon: 10000
      runs: 100
      seed: 7
      checkpoints: [1000, 10000]
      delay: {kind: fixed, d: 10}
      diagnostics: false
      workers: 1
    output: {path: regret.csv, diagnostics_path: diag.csv}
    sweep:                      # only read by the sweep subcommand
      base_mean: 0.5
      delta: [0.05, 0.1]
      horizon: [1000, 10000]
      policy: [thompson, ucb1]
      delay: [{kind: none}, {kind: fixed, d: 10}]
    bounds:                     # only read by the bounds subcommand
      horizons: [10, 100, e]
      kinds: [thm1, ucb1_auer]
      constant: 1.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .bandit_core import ArmModel, BanditInstance
from .bounds import BOUND_KINDS
from .policies import POLICY_KINDS
from .simulator import DelayModel, RunConfig

__all__ = ["ConfigError", "ExperimentConfig", "SweepSpec", "BoundsSpec", "load_config", "parse_config",
           "dump_config", "MAX_SWEEP_CELLS"]

MAX_SWEEP_CELLS = 10_000

_SECTIONS = {"experiment", "instance", "policy", "run", "output", "sweep", "bounds"}
_KEYS = {
    "experiment": {"id"},
    "instance": {"arms", "unique_optimum"},
    "policy": {"kind"},
    "run": {"horizon", "runs", "seed", "checkpoints", "delay", "diagnostics", "workers"},
    "output": {"path", "diagnostics_path"},
    "sweep": {"base_mean", "delta", "horizon", "policy", "delay"},
    "bounds": {"horizons", "kinds", "constant"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` starts with ``<source>:<line>:`` when the line is known."""

    def __init__(self, message, line=None, source="<config>"):
        self.line = line
        self.source = source
        self.message = message
        loc = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(loc + message)


@dataclass(frozen=True)
class SweepSpec:
    base_mean: float = 0.5
    delta: tuple = None
    horizon: tuple = None
    policy: tuple = None
    delay: tuple = None

    def to_dict(self):
        out = {"base_mean": self.base_mean}
        for key in ("delta", "horizon", "policy"):
            value = getattr(self, key)
            if value is not None:
                out[key] = list(value)
        if self.delay is not None:
            out["delay"] = [d.to_dict() for d in self.delay]
        return out


@dataclass(frozen=True)
class BoundsSpec:
    horizons: tuple = (10.0, 100.0, 1_000.0, 10_000.0, 100_000.0, 1_000_000.0)
    kinds: tuple = BOUND_KINDS
    constant: float = None

    def to_dict(self):
        out = {"horizons": list(self.horizons), "kinds": list(self.kinds)}
        if self.constant is not None:
            out["constant"] = self.constant
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    instance: BanditInstance
    run: RunConfig
    runs: int = 1
    workers: int = 1
    experiment_id: str = "experiment"
    output_path: str = None
    diagnostics_path: str = None
    sweep: SweepSpec = None
    bounds: BoundsSpec = field(default_factory=BoundsSpec)

    def to_dict(self):
        run = {
            "horizon": self.run.horizon,
            "runs": self.runs,
            "seed": self.run.seed,
            "checkpoints": list(self.run.checkpoints),
            "delay": self.run.delay.to_dict(),
            "diagnostics": self.run.diagnostics,
            "workers": self.workers,
        }
        out = {
            "experiment": {"id": self.experiment_id},
            "instance": self.instance.to_dict(),
            "policy": {"kind": self.run.policy},
            "run": run,
        }
        output = {}
        if self.output_path is not None:
            output["path"] = self.output_path
        if self.diagnostics_path is not None:
            output["diagnostics_path"] = self.diagnostics_path
        if output:
            out["output"] = output
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        out["bounds"] = self.bounds.to_dict()
        return out


def dump_config(config):
    """Resolved config as YAML text that :func:`parse_config` reads back to an equal object."""
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# parsing

class _Lines:
    """Map from key paths to the 1-based line where each node starts."""

    def __init__(self, node):
        self.map = {}
        self._walk(node, ())

    def _walk(self, node, path):
        self.map[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.map[path + (k.value,)] = k.start_mark.line + 1
                self._walk(v, path + (k.value,))
                self.map[path + (k.value,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def __call__(self, *path):
        while path and path not in self.map:
            path = path[:-1]
        return self.map.get(path)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path))


def parse_config(text, source="<config>"):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line, source) from None
    if node is None or not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections", 1, source)
    lines = _Lines(node)
    return _Parser(data, lines, source).parse()


class _Parser:
    def __init__(self, data, lines, source):
        self.data = data
        self.lines = lines
        self.source = source

    def error(self, message, *path):
        return ConfigError(message, self.lines(*path), self.source)

    def section(self, name, required=False):
        value = self.data.get(name)
        if value is None:
            if required:
                raise self.error(f"missing required section {name!r}")
            return {}
        if not isinstance(value, dict):
            raise self.error(f"section {name!r} must be a mapping", name)
        unknown = set(value) - _KEYS[name]
        if unknown:
            key = sorted(unknown, key=str)[0]
            raise self.error(f"unknown key {key!r} in section {name!r}", name, key)
        return value

    def parse(self):
        unknown = set(self.data) - _SECTIONS
        if unknown:
            key = sorted(unknown, key=str)[0]
            raise self.error(f"unknown section {key!r}", key)

        exp = self.section("experiment")
        experiment_id = str(exp.get("id", "experiment"))

        instance = self.instance()
        kind = self.section("policy").get("kind", "thompson")
        if kind not in POLICY_KINDS:
            raise self.error(f"unknown policy kind {kind!r}; expected one of {sorted(POLICY_KINDS)}",
                             "policy", "kind")

        run = self.section("run")
        horizon = self.integer("run", "horizon", minimum=1, required=True)
        runs = self.integer("run", "runs", minimum=1, default=1)
        seed = self.integer("run", "seed", minimum=0, default=0)
        workers = self.integer("run", "workers", minimum=1, default=1)
        diagnostics = run.get("diagnostics", False)
        if not isinstance(diagnostics, bool):
            raise self.error("run.diagnostics must be true or false", "run", "diagnostics")
        delay = self.delay(run.get("delay", {"kind": "none"}), "run", "delay")
        checkpoints = run.get("checkpoints")
        if checkpoints is not None and not isinstance(checkpoints, list):
            raise self.error("run.checkpoints must be a list of steps", "run", "checkpoints")
        try:
            run_config = RunConfig(horizon, seed, kind, delay,
                                   None if checkpoints is None else tuple(checkpoints), diagnostics)
        except (ValueError, TypeError) as exc:
            key = "checkpoints" if "checkpoint" in str(exc) else None
            raise self.error(f"run: {exc}", "run", *([key] if key else [])) from None

        out = self.section("output")
        return ExperimentConfig(
            instance=instance,
            run=run_config,
            runs=runs,
            workers=workers,
            experiment_id=experiment_id,
            output_path=out.get("path"),
            diagnostics_path=out.get("diagnostics_path"),
            sweep=self.sweep(),
            bounds=self.bounds(),
        )

    def integer(self, name, key, minimum, default=None, required=False):
        section = self.data.get(name) or {}
        path = (name, key)
        if key not in section:
            if required:
                raise self.error(f"missing required key {'.'.join(path)!r}", path[0])
            return default
        value = section[key]
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise self.error(f"{'.'.join(path)} must be an integer >= {minimum}, got {value!r}", *path)
        return value

    def instance(self):
        inst = self.section("instance", required=True)
        arms = inst.get("arms")
        if not isinstance(arms, list) or len(arms) < 2:
            raise self.error("instance.arms must be a list of at least 2 arms", "instance", "arms")
        models = []
        for i, spec in enumerate(arms):
            if not isinstance(spec, dict):
                raise self.error(f"arm {i} must be a mapping with a 'law' key", "instance", "arms", i)
            try:
                models.append(ArmModel.from_dict(spec))
            except (ValueError, TypeError) as exc:
                raise self.error(f"arm {i}: {exc}", "instance", "arms", i) from None
        unique = inst.get("unique_optimum", False)
        if not isinstance(unique, bool):
            raise self.error("instance.unique_optimum must be true or false", "instance", "unique_optimum")
        try:
            return BanditInstance(tuple(models), unique)
        except ValueError as exc:
            # point at the arm named in the message when there is one
            arm = _arm_in_message(str(exc))
            path = ("instance", "arms", arm) if arm is not None else ("instance",)
            raise self.error(str(exc), *path) from None

    def delay(self, spec, *path):
        if not isinstance(spec, dict):
            raise self.error("delay must be a mapping such as {kind: fixed, d: 10}", *path)
        try:
            return DelayModel.from_dict(spec)
        except (ValueError, TypeError) as exc:
            raise self.error(f"delay: {exc}", *path) from None

    def sweep(self):
        if "sweep" not in self.data:
            return None
        sw = self.section("sweep")
        base = sw.get("base_mean", 0.5)
        if not isinstance(base, (int, float)) or isinstance(base, bool) or not 0.0 < base <= 1.0:
            raise self.error(f"sweep.base_mean must lie in (0, 1], got {base!r}", "sweep", "base_mean")
        values = {}
        for key in ("delta", "horizon", "policy", "delay"):
            if key not in sw:
                continue
            seq = sw[key]
            if not isinstance(seq, list) or not seq:
                raise self.error(f"sweep.{key} must be a non-empty list", "sweep", key)
            values[key] = seq
        if "delta" in values:
            for i, d in enumerate(values["delta"]):
                if isinstance(d, bool) or not isinstance(d, (int, float)) or not 0.0 < d <= base:
                    raise self.error(f"sweep.delta[{i}] = {d!r} must lie in (0, base_mean = {base}]",
                                     "sweep", "delta", i)
            values["delta"] = tuple(float(d) for d in values["delta"])
        if "horizon" in values:
            for i, h in enumerate(values["horizon"]):
                if isinstance(h, bool) or not isinstance(h, int) or h < 1:
                    raise self.error(f"sweep.horizon[{i}] = {h!r} must be an integer >= 1",
                                     "sweep", "horizon", i)
            values["horizon"] = tuple(values["horizon"])
        if "policy" in values:
            for i, p in enumerate(values["policy"]):
                if p not in POLICY_KINDS:
                    raise self.error(f"sweep.policy[{i}] = {p!r} is not a policy kind", "sweep", "policy", i)
            values["policy"] = tuple(values["policy"])
        if "delay" in values:
            values["delay"] = tuple(self.delay(d, "sweep", "delay", i) for i, d in enumerate(values["delay"]))
        spec = SweepSpec(base_mean=float(base), **values)
        cells = math.prod(len(v) for v in values.values()) if values else 1
        if cells > MAX_SWEEP_CELLS:
            raise self.error(f"sweep grid has {cells} cells; the limit is {MAX_SWEEP_CELLS}", "sweep")
        return spec

    def bounds(self):
        if "bounds" not in self.data:
            return BoundsSpec()
        b = self.section("bounds")
        defaults = BoundsSpec()
        horizons = b.get("horizons", list(defaults.horizons))
        if not isinstance(horizons, list):
            raise self.error("bounds.horizons must be a list", "bounds", "horizons")
        parsed = []
        for i, h in enumerate(horizons):
            try:
                parsed.append(parse_horizon(h))
            except ValueError as exc:
                raise self.error(f"bounds.horizons[{i}]: {exc}", "bounds", "horizons", i) from None
        kinds = b.get("kinds", list(defaults.kinds))
        if not isinstance(kinds, list):
            raise self.error("bounds.kinds must be a list", "bounds", "kinds")
        for i, k in enumerate(kinds):
            if k not in BOUND_KINDS:
                raise self.error(f"bounds.kinds[{i}] = {k!r} is not one of {list(BOUND_KINDS)}",
                                 "bounds", "kinds", i)
        constant = b.get("constant")
        if constant is not None and (isinstance(constant, bool) or not isinstance(constant, (int, float))
                                     or constant <= 0):
            raise self.error(f"bounds.constant must be a positive number, got {constant!r}", "bounds", "constant")
        return BoundsSpec(tuple(parsed), tuple(kinds), None if constant is None else float(constant))


def parse_horizon(value):
    """A horizon for bound curves: a number >= 1, or the string ``e``."""
    if isinstance(value, str):
        if value.strip() == "e":
            return math.e
        try:
            value = float(value)
        except ValueError:
            raise ValueError(f"not a number: {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value >= 1.0 or math.isinf(value):
        raise ValueError(f"horizon must be a finite number >= 1, got {value!r}")
    return float(value)


def _arm_in_message(message):
    words = message.split()
    for a, b in zip(words, words[1:]):
        if a == "arm" and b.isdigit():
            return int(b)
    return None
