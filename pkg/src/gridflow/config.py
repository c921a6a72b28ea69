"""Run configuration: one YAML file per experiment, schema-checked before any compute."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import jsonschema
import yaml

from .errors import BadSpec, ConfigError
from .ppf.report import ReportOptions
from .ppf.scenarios import ScenarioSpec
from .resnet import SCHEMES, TrainConfig

BUNDLED_CONFIGS = Path(__file__).parent / "configs"

_num = {"type": "number"}
_int = {"type": "integer"}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_GAUSS = _obj({
    "quantity": {"enum": ["pg", "load"]},
    "buses": {"oneOf": [{"enum": ["pv", "loads"]}, {"type": "array", "items": _int}]},
    "ratio": {"type": "number", "minimum": 0},
    "correlation": {"type": "number", "minimum": -1, "maximum": 1},
    "pq_correlation": {"type": "number", "minimum": -1, "maximum": 1},
}, ["quantity"])
_SCENARIO = _obj({
    "gaussian": {"type": "array", "items": _GAUSS},
    "weibull": {"type": "array", "items": _obj(
        {"bus": _int, "k": _num, "lam": _num, "scale": _num}, ["bus"])},
    "beta": {"type": "array", "items": _obj(
        {"bus": _int, "a": _num, "b": _num, "capacity": _num}, ["bus"])},
    "outages": {"type": "array", "items": _obj(
        {"bus": _int, "probability": {"type": "number", "minimum": 0, "maximum": 1}},
        ["bus"])},
    "sampler": {"enum": ["mc", "qmc"]},
})
SCHEMA = _obj({
    "case": {"type": "string"},
    "seed": _int,
    "threads": {"type": "integer", "minimum": 1},
    "out": {"type": "string"},
    "bprime": {"enum": ["series", "reactance"]},
    "scenario": _SCENARIO,
    "dataset": _obj({
        "splits": {"type": "array", "items": {"type": "integer", "minimum": 0},
                   "minItems": 3, "maxItems": 3},
        "tol": {"type": "number", "exclusiveMinimum": 0},
    }),
    "net": _obj({
        "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "shortcut": {"type": "boolean"},
    }),
    "init": _obj({
        "scheme": {"enum": sorted(SCHEMES)},
        "ridge_lambda": {"type": ["number", "null"], "minimum": 0},
        "zero_last": {"type": "boolean"},
    }),
    "train": _obj({f.name: (_int if f.type == "int" else _num)
                   for f in fields(TrainConfig) if f.name != "seed"}),
    "ppf": _obj({
        "n": {"type": "integer", "minimum": 1},
        "sampler": {"enum": ["mc", "qmc"]},
        "seed_offset": _int,
        "kde": {"type": ["array", "null"], "items": {"type": "string"}},
        "vm_percentile": {"type": ["number", "null"], "minimum": 0, "maximum": 100},
        "branch_limits": {"type": "boolean"},
        "variance_counts": {"type": ["array", "null"], "items": {"type": "integer",
                                                               "minimum": 1}},
        "kde_points": {"type": "integer", "minimum": 2},
    }),
}, ["case"])


@dataclass
class RunConfig:
    case: str
    seed: int = 0
    threads: int | None = None
    out: str = "runs/out"
    bprime: str = "series"
    scenario: dict = field(default_factory=dict)
    splits: tuple[int, int, int] = (12000, 4000, 4000)
    tol: float = 1e-8
    hidden: tuple[int, ...] = (100, 100)
    shortcut: bool = True
    scheme: str = "lpf"
    ridge_lambda: float | None = None
    zero_last: bool = False
    train: dict = field(default_factory=dict)
    ppf_n: int = 4000
    ppf_sampler: str | None = None
    ppf_seed_offset: int = 1
    report: dict = field(default_factory=dict)
    source: Path | None = None

    @classmethod
    def from_dict(cls, d: dict, source: Path | None = None) -> "RunConfig":
        try:
            jsonschema.validate(d, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {exc.message}") from None
        ds = d.get("dataset", {})
        nt = d.get("net", {})
        it = d.get("init", {})
        pp = dict(d.get("ppf", {}))
        cfg = cls(
            case=d["case"], seed=d.get("seed", 0), threads=d.get("threads"),
            out=d.get("out", "runs/out"), bprime=d.get("bprime", "series"),
            scenario=d.get("scenario", {}),
            splits=tuple(ds.get("splits", (12000, 4000, 4000))), tol=ds.get("tol", 1e-8),
            hidden=tuple(nt.get("hidden", (100, 100))), shortcut=nt.get("shortcut", True),
            scheme=it.get("scheme", "lpf"), ridge_lambda=it.get("ridge_lambda"),
            zero_last=it.get("zero_last", False),
            train=d.get("train", {}),
            ppf_n=pp.pop("n", 4000), ppf_sampler=pp.pop("sampler", None),
            ppf_seed_offset=pp.pop("seed_offset", 1), report=pp, source=source,
        )
        cfg.scenario_spec()  # surface spec errors before any compute
        return cfg

    def case_path(self) -> str:
        """Case names resolve to bundled cases; relative paths are taken from the config file."""
        p = Path(self.case)
        if self.source is not None and not p.is_absolute() and p.suffix:
            cand = self.source.parent / p
            if cand.exists():
                return str(cand)
        return self.case

    def scenario_spec(self, n: int | None = None, seed_offset: int = 0,
                      sampler: str | None = None) -> ScenarioSpec:
        d = {**self.scenario, "seed": self.seed + seed_offset,
             "n": n if n is not None else sum(self.splits)}
        if sampler is not None:
            d["sampler"] = sampler
        try:
            return ScenarioSpec.from_dict(d)
        except BadSpec as exc:
            raise ConfigError(f"scenario: {exc}") from None

    def ppf_spec(self) -> ScenarioSpec:
        return self.scenario_spec(self.ppf_n, self.ppf_seed_offset, self.ppf_sampler)

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(**{**self.train, "seed": self.seed})
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from None

    def report_options(self) -> ReportOptions:
        return ReportOptions.from_dict(self.report)


def resolve_config_path(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    for cand in (BUNDLED_CONFIGS / p.name, BUNDLED_CONFIGS / f"{p.name}.yaml"):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"config not found: {path}")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    p = resolve_config_path(path)
    try:
        d = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    d.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(d, source=p)
