"""Run configuration: every simulation parameter by name, plus run control.

Config files are flat UTF-8 ``key = value`` lines with ``#`` comments and no
nesting; keys match the dataclass fields below. Unknown keys are rejected,
and every field is validated against its legal domain at construction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError

NEURON_MODELS = ("probabilistic", "plain_lif")
STDP_RULES = ("probabilistic", "sigmoidal")
FEATURE_MODES = ("linear", "poly2")
ALLOWED_D = (16, 32, 64)
ALLOWED_H = (8, 16, 32, 64, 128, 256, 512)


@dataclass
class RunConfig:
    # architecture / simulation
    D: int = 32                   # convolutional filters
    T: int = 20                   # presentation steps (1 ms each)
    p: int = 5                    # patch / filter size
    r: int = 28                   # image rows
    c: int = 28                   # image columns
    alpha: float = 0.01           # lateral anti-Hebbian rate
    beta: float = 0.0001          # feedforward Hebbian rate
    gamma: float = 0.02           # threshold adjustment rate
    rho: float = 0.05             # target mean spikes per unit per patch
    l_c: int = 1                  # convolution stride
    l_p: int = 2                  # pooling block / stride
    theta_conv: float = 1.0       # convolutional firing threshold
    H: int = 128                  # feature discovery units
    a_plus: float = 0.001         # LTP amplification rate
    a_minus: float = 0.00075      # LTD amplification rate
    theta_h: float = 0.5          # discovery potential threshold
    theta_p: float = 0.5          # discovery softmax threshold
    tau: float = 1.0              # LIF decay time constant (ms)
    epsilon: int = 5              # LTP window (ms)
    # variant selection
    neuron_model: str = "probabilistic"
    stdp_rule: str = "probabilistic"
    feature_mode: str = "poly2"
    stochastic_gate: bool = False
    balance_rate: float = 0.5     # discovery participation prior rate; 0 disables
    # run control
    seed: int = 0
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    filter_images: int = 3000
    filter_iterations: int = 10
    discovery_images: int = 3000
    discovery_iterations: int = 10
    classifier_images: int = 3000
    eval_images: int = 0          # 0 = whole test set
    svm_lambda: float = 0.0001
    svm_epochs: int = 20
    noise: str = "none"           # none | gauss:VARIANCE | sp:DENSITY
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.D not in ALLOWED_D:
            raise ConfigError(f"D must be one of {ALLOWED_D}, got {self.D}")
        if self.H not in ALLOWED_H:
            raise ConfigError(f"H must be one of {ALLOWED_H}, got {self.H}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must be in (0, 1), got {self.rho}")
        for name in ("alpha", "beta", "gamma", "a_plus", "a_minus",
                     "theta_conv", "tau", "svm_lambda"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("T", "p", "r", "c", "l_c", "l_p", "filter_images",
                     "filter_iterations", "discovery_images",
                     "discovery_iterations", "classifier_images",
                     "svm_epochs", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.eval_images < 0:
            raise ConfigError("eval_images must be >= 0")
        if self.balance_rate < 0:
            raise ConfigError("balance_rate must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.p > min(self.r, self.c):
            raise ConfigError(f"patch size {self.p} exceeds image {self.r}x{self.c}")
        map_rows = (self.r - self.p) // self.l_c + 1
        map_cols = (self.c - self.p) // self.l_c + 1
        if map_rows % self.l_p or map_cols % self.l_p:
            raise ConfigError(
                f"{map_rows}x{map_cols} feature maps are not divisible by l_p={self.l_p}"
            )
        if self.neuron_model not in NEURON_MODELS:
            raise ConfigError(f"neuron_model must be one of {NEURON_MODELS}")
        if self.stdp_rule not in STDP_RULES:
            raise ConfigError(f"stdp_rule must be one of {STDP_RULES}")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}")
        parse_noise_spec(self.noise)

    # derived geometry
    @property
    def map_shape(self) -> tuple[int, int]:
        return ((self.r - self.p) // self.l_c + 1,
                (self.c - self.p) // self.l_c + 1)

    @property
    def pooled_shape(self) -> tuple[int, int]:
        mr, mc = self.map_shape
        return mr // self.l_p, mc // self.l_p

    @property
    def n_discovery_inputs(self) -> int:
        pr, pc = self.pooled_shape
        return self.D * pr * pc

    def replace(self, **kwargs) -> "RunConfig":
        return dataclasses.replace(self, **kwargs)


def parse_noise_spec(spec: str):
    """'none' -> None; 'gauss:0.04' / 'sp:0.25' -> (kind, level)."""
    if spec in ("", "none"):
        return None
    try:
        kind, _, level = spec.partition(":")
        level = float(level)
    except ValueError:
        raise ConfigError(f"bad noise spec {spec!r}") from None
    if kind == "gauss":
        if level < 0:
            raise ConfigError("gaussian noise variance must be >= 0")
    elif kind == "sp":
        if not 0.0 <= level <= 1.0:
            raise ConfigError("salt-and-pepper density must be in [0, 1]")
    else:
        raise ConfigError(f"unknown noise kind {kind!r} (want gauss|sp)")
    return kind, level


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str, target_type):
    if target_type is bool:
        if text not in ("true", "false"):
            raise ConfigError(f"bad boolean {text!r} (want true|false)")
        return text == "true"
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    return text


def serialize_config(config: RunConfig) -> str:
    lines = ["# spiking CNN run configuration"]
    for f in dataclasses.fields(RunConfig):
        lines.append(f"{f.name} = {_format_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; unknown keys and bad values are errors."""
    field_types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    type_map = {"int": int, "float": float, "str": str, "bool": bool}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in field_types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        target = field_types[key]
        target_type = type_map[target] if isinstance(target, str) else target
        try:
            values[key] = _parse_value(value, target_type)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def save_config(config: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_config(config))
