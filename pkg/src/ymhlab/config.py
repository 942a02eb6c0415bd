"""Flat ``section.key = value`` run configuration."""

import logging
from dataclasses import dataclass

from .errors import ConfigError

log = logging.getLogger(__name__)


def _pos_float(v):
    x = float(v)
    if not x > 0:
        raise ValueError("must be positive")
    return x


def _nonneg_float(v):
    x = float(v)
    if x < 0:
        raise ValueError("must be non-negative")
    return x


def _pos_int(v):
    x = int(v)
    if x <= 0:
        raise ValueError("must be a positive integer")
    return x


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError("must be an integer")
    return int(f)


def _choice(*opts):
    def conv(v):
        v = str(v).strip()
        if v not in opts:
            raise ValueError(f"must be one of {', '.join(opts)}")
        return v
    return conv


def _floats(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    v = str(v).strip()
    return [float(x) for x in v.split(",") if x.strip()] if v else []


def _ints(v):
    return [_pos_int(x) for x in _floats(v)]


# section -> key -> (converter, default)
SCHEMA = {
    "grid": {"nx": (_pos_int, 16), "ny": (_pos_int, 16), "a": (_pos_float, 0.25), "d": (_int, 0)},
    "fiber": {"model": (_choice("linear", "sphere"), "linear")},
    "flow": {
        "c": (float, 1.0),
        "dt": (_pos_float, 1e-3),
        "t_end": (_nonneg_float, 1.0),
        "scheme": (_choice("euler", "rk4"), "euler"),
        "conv_tol": (_pos_float, 1e-10),
        "cfl_kappa": (_pos_float, 0.2),
        "monitors_every": (_pos_int, 100),
        "snapshot_every": (_int, 0),
    },
    "init": {
        "kind": (_choice("holomorphic", "random", "minimum", "constant"), "holomorphic"),
        "amplitude": (_pos_float, 1.0),
        "link_noise": (_nonneg_float, 0.3),
    },
    "run": {"seed": (_int, 0), "output_dir": (str, "out"), "jobs": (_pos_int, 1)},
    "scan": {"c_values": (_floats, [0.2, 0.5, 1.0]), "flow": (_choice("metric", "pair"), "metric")},
    "check": {"sizes": (_ints, [8, 16, 32, 64]), "length": (_pos_float, 4.0),
              "samples": (_pos_int, 5), "step": (_pos_float, 1e-5)},
    "psi": {"c_unstable": (float, 0.2), "t_end_unstable": (_pos_float, 120.0)},
}

# sections each subcommand reads
REQUIRED = {
    "flow-pair": {"grid", "fiber", "flow", "init", "run"},
    "flow-metric": {"grid", "flow", "init", "run"},
    "reconstruct-check": {"grid", "flow", "init", "run"},
    "check-identities": {"check", "grid", "run"},
    "gradcheck": {"grid", "fiber", "flow", "check", "init", "run"},
    "stability-scan": {"grid", "flow", "scan", "run"},
    "sigma-check": {"grid", "flow", "init", "check", "run"},
    "psi-check": {"grid", "flow", "init", "psi", "run"},
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        sec, name = key.split(".", 1)
        return self.values[sec][name]

    def section(self, name):
        return dict(self.values[name])

    def flat(self):
        return {f"{s}.{k}": v for s, kv in self.values.items() for k, v in kv.items()}


def parse_text(text):
    """``section.key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'section.key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {n}: key {key!r} has no section prefix")
        out[key] = value
    return out


def parse_override(item):
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    k, v = item.split("=", 1)
    return k.strip(), v.strip()


def resolve(raw, command=None):
    """Apply defaults and validation.  Returns ``(RunConfig, warnings)``."""
    values = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}
    warnings = []
    used = REQUIRED.get(command, set(SCHEMA))
    for key, value in raw.items():
        sec, name = key.split(".", 1)
        if sec not in SCHEMA:
            warnings.append(f"ignoring unknown section {sec!r} ({key})")
            continue
        if name not in SCHEMA[sec]:
            raise ConfigError(f"unknown key {key!r}")
        if command is not None and sec not in used:
            warnings.append(f"section {sec!r} is not used by {command} ({key})")
        conv = SCHEMA[sec][name][0]
        try:
            values[sec][name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} = {value!r}: {exc}") from None
    for w in warnings:
        log.warning(w)
    return RunConfig(values), warnings


def load(path=None, overrides=(), command=None):
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw.update(parse_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for item in overrides:
        k, v = parse_override(item)
        if "." not in k:
            raise ConfigError(f"override key {k!r} has no section prefix")
        raw[k] = v
    return resolve(raw, command)
