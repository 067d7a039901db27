"""INI-style experiment files.

Sections and keys::

    [system]    K, N, M, T, snr_db, pilot
    [schedule]  kind (equally_divided | random | explicit | synchronous), delays, seed
    [sweep]     variable, values, trials, arms, seed, estimator
    [search]    grid_step, objective, fixed_reference, cap
    [output]    path, format (csv | csv+dat)

Explicit delays are listed in flattened UE order, cell-major.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .delays import Objective, SearchSpec
from .estimators import EstimatorKind
from .model import PilotKind, SystemConfig
from .montecarlo import SweepSpec, SweepVariable
from .rate import Arm

SCHEDULE_KINDS = ("equally_divided", "random", "explicit", "synchronous")
OUTPUT_FORMATS = ("csv", "csv+dat")

ALLOWED = {
    "system": ("K", "N", "M", "T", "snr_db", "pilot"),
    "schedule": ("kind", "delays", "seed"),
    "sweep": ("variable", "values", "trials", "arms", "seed", "estimator"),
    "search": ("grid_step", "objective", "fixed_reference", "cap"),
    "output": ("path", "format"),
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class ExperimentConfig:
    K: int
    N: int
    M: int = 100
    T: float = 1.0
    snr_db: float = 20.0
    pilot: PilotKind = PilotKind.IDENTITY
    schedule_kind: str = "equally_divided"
    delays: tuple = ()
    schedule_seed: int = 0
    sweep_variable: str | None = None
    sweep_values: tuple = ()
    trials: int = 1000
    arms: tuple = tuple(a.value for a in Arm)
    seed: int = 0
    estimator: EstimatorKind = EstimatorKind.LMMSE
    search: SearchSpec = field(default_factory=SearchSpec)
    output_path: str = "results"
    output_format: str = "csv"

    @property
    def gamma(self) -> float:
        return 10 ** (self.snr_db / 10)

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(K=self.K, N=self.N, M=self.M, T=self.T, gamma=self.gamma, pilot_kind=self.pilot)

    def schedule(self):
        from .model import DelaySchedule
        from .montecarlo import resolve_schedule

        if self.schedule_kind == "explicit":
            return DelaySchedule.from_flat(self.delays, self.K, self.N, self.T, "explicit")
        return resolve_schedule(self.system, self.schedule_kind, self.schedule_seed)

    def sweep_spec(self) -> SweepSpec:
        if self.sweep_variable is None:
            raise ConfigError("config has no [sweep] section")
        scheme = self.schedule_kind
        if scheme == "explicit":
            scheme = self.schedule()
        return SweepSpec(SweepVariable(self.sweep_variable), self.sweep_values, self.system, self.trials,
                         self.arms, self.estimator, scheme)


def _key_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, for diagnostics."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = no
        elif s and not s.startswith(("#", ";")) and "=" in s:
            where.setdefault((section, s.split("=", 1)[0].strip()), no)
    return where


def _value(raw: str, kind, line, key):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for key {key!r}", line) from None


def _list(raw: str) -> list[str]:
    return [v.strip() for v in raw.split(",") if v.strip()]


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)

    for section in parser.sections():
        if section not in ALLOWED:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)))
        for key in parser[section]:
            if key not in ALLOWED[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", lines.get((section, key)))
    if "system" not in parser:
        raise ConfigError("missing [system] section")

    def get(section, key, kind, default=None, required=False):
        if section in parser and key in parser[section]:
            return _value(parser[section][key], kind, lines.get((section, key)), key)
        if required:
            raise ConfigError(f"missing key {key!r} in [{section}]", lines.get((section, None)))
        return default

    def line(section, key):
        return lines.get((section, key)) or lines.get((section, None))

    kw = {
        "K": get("system", "K", int, required=True),
        "N": get("system", "N", int, required=True),
        "M": get("system", "M", int, 100),
        "T": get("system", "T", float, 1.0),
        "snr_db": get("system", "snr_db", float, 20.0),
    }
    for key in ("K", "N", "M"):
        if kw[key] < 1:
            raise ConfigError(f"{key} must be a positive integer", line("system", key))
    if not kw["T"] > 0:
        raise ConfigError("T must be positive", line("system", "T"))
    pilot = get("system", "pilot", str, "identity")
    try:
        kw["pilot"] = PilotKind(pilot)
    except ValueError:
        raise ConfigError(f"unknown pilot kind {pilot!r}", line("system", "pilot")) from None

    kind = get("schedule", "kind", str, "equally_divided")
    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"unknown schedule kind {kind!r}", line("schedule", "kind"))
    kw["schedule_kind"] = kind
    kw["schedule_seed"] = get("schedule", "seed", int, 0)
    if kind == "explicit":
        raw = get("schedule", "delays", str, required=True)
        try:
            delays = tuple(float(v) for v in _list(raw))
        except ValueError:
            raise ConfigError(f"invalid delays {raw!r}", line("schedule", "delays")) from None
        if len(delays) != kw["K"] * kw["N"]:
            raise ConfigError(f"expected {kw['K'] * kw['N']} delays, got {len(delays)}", line("schedule", "delays"))
        if any(not 0 <= d <= kw["T"] for d in delays):
            raise ConfigError(f"delays must lie in [0, {kw['T']}]", line("schedule", "delays"))
        kw["delays"] = delays

    if "sweep" in parser:
        var = get("sweep", "variable", str, required=True)
        try:
            var = SweepVariable(var).value
        except ValueError:
            raise ConfigError(f"unknown sweep variable {var!r}", line("sweep", "variable")) from None
        raw_values = _list(get("sweep", "values", str, required=True))
        if not raw_values:
            raise ConfigError("sweep values must be non-empty", line("sweep", "values"))
        if var in ("snr_db",):
            values = tuple(_value(v, float, line("sweep", "values"), "values") for v in raw_values)
        elif var in ("M", "K", "N"):
            values = tuple(_value(v, int, line("sweep", "values"), "values") for v in raw_values)
            if any(v < 1 for v in values):
                raise ConfigError(f"{var} values must be positive", line("sweep", "values"))
        elif var == "pilot_kind":
            values = tuple(raw_values)
            if any(v not in [p.value for p in PilotKind] for v in values):
                raise ConfigError(f"unknown pilot kind in {raw_values}", line("sweep", "values"))
        else:
            values = tuple(raw_values)
            if any(v not in ("equally_divided", "random", "synchronous", "exhaustive") for v in values):
                raise ConfigError(f"unknown delay scheme in {raw_values}", line("sweep", "values"))
        kw["sweep_variable"] = var
        kw["sweep_values"] = values
        kw["trials"] = get("sweep", "trials", int, 1000)
        if kw["trials"] < 1:
            raise ConfigError("trials must be at least 1", line("sweep", "trials"))
        arms = tuple(_list(get("sweep", "arms", str, ",".join(a.value for a in Arm))))
        if not arms or any(a not in [x.value for x in Arm] for a in arms):
            raise ConfigError(f"unknown arm in {arms}", line("sweep", "arms"))
        kw["arms"] = arms
        kw["seed"] = get("sweep", "seed", int, 0)
        est = get("sweep", "estimator", str, "lmmse")
        try:
            kw["estimator"] = EstimatorKind(est)
        except ValueError:
            raise ConfigError(f"unknown estimator {est!r}", line("sweep", "estimator")) from None

    if "search" in parser:
        obj = get("search", "objective", str, "trace_inv_a")
        try:
            obj = Objective(obj)
        except ValueError:
            raise ConfigError(f"unknown objective {obj!r}", line("search", "objective")) from None
        step = get("search", "grid_step", float, 0.05)
        if not step > 0:
            raise ConfigError("grid_step must be positive", line("search", "grid_step"))
        kw["search"] = SearchSpec(step, get("search", "fixed_reference", bool, True), obj,
                                  get("search", "cap", int, SearchSpec().cap))

    kw["output_path"] = get("output", "path", str, "results")
    fmt = get("output", "format", str, "csv")
    if fmt not in OUTPUT_FORMATS:
        raise ConfigError(f"unknown output format {fmt!r}", line("output", "format"))
    kw["output_format"] = fmt
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    out = ["[system]"]
    out += [f"K = {cfg.K}", f"N = {cfg.N}", f"M = {cfg.M}", f"T = {_fmt(cfg.T)}",
            f"snr_db = {_fmt(cfg.snr_db)}", f"pilot = {_fmt(cfg.pilot)}", "", "[schedule]",
            f"kind = {cfg.schedule_kind}", f"seed = {cfg.schedule_seed}"]
    if cfg.schedule_kind == "explicit":
        out.append("delays = " + ", ".join(_fmt(d) for d in cfg.delays))
    if cfg.sweep_variable is not None:
        out += ["", "[sweep]", f"variable = {cfg.sweep_variable}",
                "values = " + ", ".join(_fmt(v) for v in cfg.sweep_values),
                f"trials = {cfg.trials}", "arms = " + ", ".join(cfg.arms), f"seed = {cfg.seed}",
                f"estimator = {_fmt(cfg.estimator)}"]
    s = cfg.search
    out += ["", "[search]", f"grid_step = {_fmt(s.grid_step)}", f"objective = {_fmt(s.objective)}",
            f"fixed_reference = {str(s.fixed_reference).lower()}", f"cap = {s.cap}",
            "", "[output]", f"path = {cfg.output_path}", f"format = {cfg.output_format}", ""]
    return "\n".join(out)
