"""Run configuration: presets, ``key = value`` files and ``--key value`` flags."""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .model import ConstantSelfEnergy, FrozenGamma, ModelParams, markovian_gamma
from .transport import LeadConfig

__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ConfigError",
    "RunConfig",
    "parse_config",
    "read_config_file",
    "parse_number",
]

EXPERIMENTS = (
    "spectral",
    "scaling-factors",
    "transmission",
    "current-scan",
    "ndqpt",
    "markovian-compare",
    "validate",
)

_COMMON = dict(g=1.0, g_b=0.3, phi=2 * math.pi / 3, delta_c=0.0, delta_b=-0.5, kappa=0.25)

# experiment-independent settings reproducing each panel
PRESETS = {
    "fig2a": dict(_COMMON, experiment="spectral", self_energy="constant"),
    "fig2b": dict(_COMMON, experiment="spectral", self_energy="markovian"),
    "fig2c": dict(_COMMON, experiment="scaling-factors"),
    "fig2d": dict(_COMMON, experiment="transmission", g_b=0.1, kappa=0.1, delta_b=-1.0, gamma=0.5, n=30),
    "fig2e": dict(_COMMON, experiment="current-scan", gamma=0.5, beta=100.0, mu_d=-0.9),
    "fig2f": dict(_COMMON, experiment="ndqpt", gamma=0.5, beta=100.0, n=1024),
    "fig3": dict(
        _COMMON,
        experiment="markovian-compare",
        self_energy="markovian",
        gamma=0.5,
        beta=10.0,
        mu_d=-1.0,
        n_values="8,16,24,32,40,48,56,64",
    ),
}


class ConfigError(ValueError):
    """Invalid or unknown configuration key; ``key`` names the offender."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "inf": math.inf}


def parse_number(text: str) -> float:
    """Float literal or a small arithmetic expression in ``pi``, e.g. ``2*pi/3``."""
    text = str(text).strip()
    try:
        return float(text)
    except ValueError:
        pass

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"cannot parse number {text!r}")

    try:
        return float(ev(ast.parse(text.replace("π", "pi"), mode="eval")))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse number {text!r}") from exc


def _int_list(text):
    out = [int(x) for x in str(text).replace(" ", "").split(",") if x]
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _positive_int(text):
    v = int(str(text).strip())
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _choice(*options):
    def conv(text):
        t = str(text).strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    return conv


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; every key has a default reproducing a panel.

    Physical energies are in units of ``g``. ``n_values`` drives the N sweeps
    of ``current-scan`` and ``markovian-compare``. ``omega_points = 0`` and
    NaN frequency bounds select the experiment's own grid.
    """

    experiment: str = "validate"
    preset: str = ""
    g: float = 1.0
    g_b: float = 0.3
    phi: float = 2 * math.pi / 3
    delta_c: float = 0.0
    delta_b: float = -0.5
    kappa: float = 0.25
    gamma: float = 0.5
    n: int = 64
    beta: float = math.inf
    eta: float = 0.0
    self_energy: str = "constant"
    sigma: float = math.nan
    mu_d: float = -0.9
    mu_min: float = -2.0
    mu_max: float = 0.5
    mu_points: int = 251
    k_points: int = 401
    omega_points: int = 0
    omega_min: float = math.nan
    omega_max: float = math.nan
    n_values: tuple = (128, 256, 512, 1024, 2048, 4096)
    trials: int = 20
    seed: int = 0
    output_dir: str = "."

    def params(self) -> ModelParams:
        return ModelParams(
            g=self.g,
            g_b=self.g_b,
            phi=self.phi,
            delta_c=self.delta_c,
            delta_b=self.delta_b,
            kappa=self.kappa,
            gamma=self.gamma,
            n_sites=self.n,
            beta=self.beta,
            eta=self.eta,
        )

    def self_energy_model(self):
        p = self.params()
        if self.self_energy == "markovian":
            return FrozenGamma(markovian_gamma(p))
        sig = self.kappa / 2 if math.isnan(self.sigma) else self.sigma
        return ConstantSelfEnergy(sig)

    def lead(self) -> LeadConfig:
        return LeadConfig(beta=self.beta, gamma=self.gamma)

    def as_dict(self) -> dict:
        """JSON-ready view used for the run manifest."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_argv(self) -> list:
        argv = [self.experiment]
        if self.preset:
            argv += ["--preset", self.preset]
        for key, v in self.as_dict().items():
            if key in ("experiment", "preset"):
                continue
            if isinstance(v, float) and math.isnan(v):
                continue  # nan means "use the experiment default"
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            argv += [f"--{key}", str(v)]
        return argv


_CONVERTERS = {
    "g": parse_number,
    "g_b": parse_number,
    "phi": parse_number,
    "delta_c": parse_number,
    "delta_b": parse_number,
    "kappa": parse_number,
    "gamma": parse_number,
    "n": _positive_int,
    "beta": parse_number,
    "eta": parse_number,
    "self_energy": _choice("constant", "markovian"),
    "sigma": parse_number,
    "mu_d": parse_number,
    "mu_min": parse_number,
    "mu_max": parse_number,
    "mu_points": _positive_int,
    "k_points": _positive_int,
    "omega_points": int,
    "omega_min": parse_number,
    "omega_max": parse_number,
    "n_values": _int_list,
    "trials": _positive_int,
    "seed": int,
    "output_dir": str,
    "experiment": _choice(*EXPERIMENTS),
}
_ALIASES = {"n_sites": "n", "out": "output_dir", "output": "output_dir", "mu": "mu_d"}


def _norm_key(key: str) -> str:
    k = key.strip().lstrip("-").replace("-", "_").lower()
    return _ALIASES.get(k, k)


def read_config_file(path) -> dict:
    """Parse UTF-8 ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = line.split("=", 1)
        out[_norm_key(key)] = value.strip()
    return out


def _split_argv(argv):
    experiment = None
    pairs = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--"):
            key = tok[2:]
            if "=" in key:
                key, value = key.split("=", 1)
                i += 1
            else:
                if i + 1 >= len(argv):
                    raise ConfigError(_norm_key(key), "missing value")
                value = argv[i + 1]
                i += 2
            pairs.append((_norm_key(key), value))
        elif experiment is None:
            experiment = tok
            i += 1
        else:
            raise ConfigError(tok, "unexpected positional argument")
    return experiment, pairs


def parse_config(argv, config_file=None) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    Precedence, lowest first: built-in defaults, ``--preset``, the config
    file (``--config path`` or ``config_file``), then the remaining flags.

    Raises
    ------
    ConfigError
        Unknown key or unparsable value.
    """
    experiment, pairs = _split_argv(list(argv))
    flags = {}
    preset = None
    for key, value in pairs:
        if key == "preset":
            preset = value.strip().lower()
        elif key == "config":
            config_file = value
        else:
            flags[key] = value

    from_file = {}
    if config_file is not None:
        try:
            from_file = read_config_file(config_file)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {config_file}: {exc.strerror}") from exc
        file_preset = from_file.pop("preset", None)
        if preset is None and file_preset is not None:
            preset = file_preset.strip().lower()

    merged = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        merged.update(PRESETS[preset])
        merged["preset"] = preset
    merged.update(from_file)
    merged.update(flags)
    if experiment is not None:
        merged["experiment"] = experiment

    values = {}
    for key, raw in merged.items():
        if key == "preset":
            values["preset"] = raw
            continue
        if key not in _CONVERTERS:
            raise ConfigError(key, "unknown key")
        if isinstance(raw, str):
            try:
                values[key] = _CONVERTERS[key](raw)
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        else:
            values[key] = tuple(raw) if isinstance(raw, list) else raw

    cfg = replace(RunConfig(), **values)
    try:
        cfg.params()
    except ValueError as exc:
        raise ConfigError(_guess_key(str(exc)), str(exc)) from None
    if cfg.n_values and min(cfg.n_values) < 2:
        raise ConfigError("n_values", "all sizes must be >= 2")
    if cfg.omega_points not in (0,) and cfg.omega_points < 2:
        raise ConfigError("omega_points", "need at least 2 points (0 selects the default)")
    if cfg.mu_max < cfg.mu_min:
        raise ConfigError("mu_max", "must not be below mu_min")
    return cfg


def _guess_key(msg):
    for name in ("g_b", "kappa", "gamma", "eta", "n_sites", "beta", "g"):
        if msg.startswith(name):
            return "n" if name == "n_sites" else name
    return "params"
