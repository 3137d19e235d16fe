"""Run configuration: one YAML/JSON document per run, command-line flags on top.

Precedence, lowest first: built-in defaults, the config file, command-line
flags. With ``units: hz`` every rate and frequency (system rates, tone
detunings, couplings G, filter width, delta_proj) is multiplied by 2 pi on
load; drive amplitudes Omega and times are never rescaled.

Example::

    units: rad/s
    system: {kappa: 1.0, gamma: 1.0e-6, omega_m: 50.0, g0: 1.0e-3, n_th: 0}
    params: {beta: 5, phi: 0, n_m: 0}
    axes:
      - {name: r, min: -4, max: 4, points: 161}
      - {name: n_m, values: [0, 0.05]}
"""

from dataclasses import asdict, dataclass, field, fields, is_dataclass
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, OptoHeraldError
from .policy import DEFAULT_POLICY, NumericPolicy
from .pulse import SystemParams
from .steadystate import TONE_TAGS, DriveTone

COMMANDS = ("sweep-q", "protocol", "steady", "sensitivity", "validate")

AXIS_NAMES = {
    "sweep-q": {"r", "phi", "n_m", "beta"},
    "protocol": {"beta", "n_m", "lam", "theta", "epsilon", "eta", "tau_w", "G_B", "tau_r"},
    "sensitivity": {"beta", "n_m", "h"},
    "steady": {"kappa", "gamma", "omega_m", "g0", "n_th", "delta_c", "W", "delta_proj",
               "epsilon"} | {f"Omega:{t}" for t in TONE_TAGS} | {f"omega:{t}" for t in TONE_TAGS},
    "validate": set(),
}

# quantities that carry a frequency dimension and are rescaled for units: hz
_RATE_AXES = {"kappa", "gamma", "omega_m", "g0", "delta_c", "W", "delta_proj", "G_B"} | {
    f"omega:{t}" for t in TONE_TAGS}

_SEMANTIC_EXCLUDE = {"jobs", "fmt", "out", "seed", "strict"}


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple[float, ...]


@dataclass
class RunConfig:
    command: str = "sweep-q"
    system: SystemParams | None = None
    params: dict = field(default_factory=dict)
    axes: list[Axis] = field(default_factory=list)
    tones: list[DriveTone] = field(default_factory=list)
    pulse: dict = field(default_factory=dict)
    detection: dict = field(default_factory=dict)
    policy: NumericPolicy = DEFAULT_POLICY
    dim_cap: int = 250
    fmt: str = "csv"
    jobs: int = 1
    strict: bool = False
    out: str | None = None
    seed: int = 0

    def semantic_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in _SEMANTIC_EXCLUDE:
                continue
            out[f.name] = _plain(getattr(self, f.name))
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(v):
    if is_dataclass(v):
        return _plain(asdict(v))
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def parse_complex(v) -> complex:
    """Number, "1+2j" string, [re, im] pair, or a {re, im} / {abs, arg} mapping."""
    try:
        if isinstance(v, bool):
            raise TypeError
        if isinstance(v, (int, float, complex)):
            return complex(v)
        if isinstance(v, str):
            return complex(v.replace(" ", "").replace("i", "j"))
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, dict):
            if "abs" in v:
                return complex(np.exp(1j * float(v.get("arg", 0.0))) * float(v["abs"]))
            return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"cannot read {v!r} as a complex number")


def _float(v, what: str) -> float:
    try:
        if isinstance(v, bool):
            raise TypeError
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: expected a number, got {v!r}") from None


def parse_axis(spec: dict, scale_factor: float = 1.0) -> Axis:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"axis needs a name: {spec!r}")
    name = str(spec["name"])
    if "values" in spec:
        vals = [_float(x, f"axis {name}") for x in spec["values"]]
        if not vals:
            raise ConfigError(f"axis {name} has no values")
    else:
        try:
            lo, hi = _float(spec["min"], name), _float(spec["max"], name)
        except KeyError as e:
            raise ConfigError(f"axis {name} is missing {e.args[0]!r}") from None
        points = spec.get("points", 1)
        if not isinstance(points, int) or isinstance(points, bool) or points < 1:
            raise ConfigError(f"axis {name}: points must be an integer >= 1")
        scale = spec.get("scale", "linear")
        if scale == "linear":
            grid = np.linspace(lo, hi, points) if points > 1 else np.array([lo])
        elif scale == "log":
            if lo <= 0 or hi <= 0:
                raise ConfigError(f"axis {name}: log scale needs positive bounds")
            grid = np.geomspace(lo, hi, points) if points > 1 else np.array([lo])
        else:
            raise ConfigError(f"axis {name}: unknown scale {scale!r}")
        vals = [float(x) for x in grid]
    if not all(math.isfinite(x) for x in vals):
        raise ConfigError(f"axis {name} has non-finite values")
    return Axis(name, tuple(x * scale_factor for x in vals))


def _unit_factor(units: str) -> float:
    u = str(units).lower().replace(" ", "")
    if u in ("rad/s", "rad_s", "rads"):
        return 1.0
    if u in ("hz",):
        return 2.0 * math.pi
    raise ConfigError(f"unknown units {units!r}; use rad/s or hz")


def _system(doc: dict, k: float) -> SystemParams:
    try:
        return SystemParams(
            kappa=_float(doc["kappa"], "kappa") * k,
            gamma=_float(doc.get("gamma", 0.0), "gamma") * k,
            omega_m=_float(doc["omega_m"], "omega_m") * k,
            g0=_float(doc.get("g0", 0.0), "g0") * k,
            n_th=_float(doc.get("n_th", 0.0), "n_th"),
            delta_c=_float(doc.get("delta_c", 0.0), "delta_c") * k,
        )
    except KeyError as e:
        raise ConfigError(f"system is missing {e.args[0]!r}") from None
    except OptoHeraldError as e:
        raise ConfigError(f"system: {e}") from None


def _tones(items, k: float) -> list[DriveTone]:
    out = []
    for t in items or []:
        try:
            out.append(DriveTone(_float(t["omega"], "tone omega") * k,
                                 parse_complex(t.get("Omega", 0.0)), t.get("tag", "custom")))
        except KeyError:
            raise ConfigError(f"tone needs omega: {t!r}") from None
        except (ValueError, OptoHeraldError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"tone {t!r}: {e}") from None
    return out


_PULSE_RATES = ("G_R", "G_B", "G_B_abs", "G_R_read")
_PARAM_RATES = ("W", "delta_proj", "delta_c")


def config_from_dict(doc: dict, command: str | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    known = {"command", "units", "system", "params", "axes", "tones", "pulse", "detection",
             "policy", "dim_cap", "format", "jobs", "strict", "out", "seed"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
    cmd = command or doc.get("command", "sweep-q")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}")
    k = _unit_factor(doc.get("units", "rad/s"))

    axes = []
    for a in doc.get("axes") or []:
        name = a.get("name") if isinstance(a, dict) else None
        axes.append(parse_axis(a, k if name in _RATE_AXES else 1.0))
    allowed = AXIS_NAMES[cmd]
    names = [a.name for a in axes]
    for n in names:
        if n not in allowed:
            raise ConfigError(f"unknown axis {n!r} for {cmd}; allowed: {sorted(allowed)}")
    if len(set(names)) != len(names):
        raise ConfigError("an axis appears twice")

    params = {}
    for key, v in (doc.get("params") or {}).items():
        if key in ("r_target",):
            params[key] = parse_complex(v)
        elif key == "branch":
            params[key] = int(v)
        else:
            params[key] = _float(v, f"params.{key}") * (k if key in _PARAM_RATES else 1.0)

    pulse = {}
    for key, v in (doc.get("pulse") or {}).items():
        if key in ("G_R", "G_B", "G_R_read"):
            pulse[key] = parse_complex(v) * k
        elif key == "optimal":
            pulse[key] = bool(v)
        else:
            pulse[key] = _float(v, f"pulse.{key}") * (k if key in _PULSE_RATES else 1.0)

    detection = {key: _float(v, f"detection.{key}")
                 for key, v in (doc.get("detection") or {}).items()}

    try:
        policy = DEFAULT_POLICY.with_overrides(doc.get("policy") or {})
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"policy: {e}") from None

    system = _system(doc["system"], k) if doc.get("system") else None
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    jobs = doc.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("jobs must be an integer >= 1")
    dim_cap = doc.get("dim_cap", 250)
    if not isinstance(dim_cap, int) or dim_cap < 0:
        raise ConfigError("dim_cap must be an integer >= 0")
    return RunConfig(command=cmd, system=system, params=params, axes=axes,
                     tones=_tones(doc.get("tones"), k), pulse=pulse, detection=detection,
                     policy=policy, dim_cap=dim_cap, fmt=fmt, jobs=jobs,
                     strict=bool(doc.get("strict", False)), out=doc.get("out"),
                     seed=int(doc.get("seed", 0)))


def load_config(path, command: str | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {e}") from None
    return config_from_dict(doc or {}, command)
