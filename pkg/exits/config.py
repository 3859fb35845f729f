"""
Run configuration

A flat YAML mapping, or `key = value` lines, validated against
schemas/config.json. The run.json file written next to every output is
accepted as well, so a run can be replayed from its own record.
"""


from dataclasses import asdict, dataclass, fields, replace
import json
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import jsonschema
import yaml
from .crf import CrfParams
from .exceptions import ConfigError, InputError
from .losses import DiceConfig, LossWeights
from .retrieval import DropoutConfig
from .synth import SceneSpec
from .tpm import SinkhornConfig


__all__ = ["RunConfig", "load_config", "load_scene_spec", "parse_config"]


SCHEMA_FILE = os.path.join(os.path.dirname(__file__), "schemas", "config.json")
SCENE_SCHEMA_FILE = os.path.join(os.path.dirname(__file__), "schemas", "scene.json")


with open(SCHEMA_FILE) as fp:
    schema = json.load(fp) # pylint: disable=invalid-name
with open(SCENE_SCHEMA_FILE) as fp:
    scene_schema = json.load(fp) # pylint: disable=invalid-name


@dataclass(frozen=True)
class RunConfig: # pylint: disable=too-many-instance-attributes
    """
    Every tunable of a run
    """

    # Retrieval
    delta: int = 12
    alpha: int = 3
    absorbing: bool = False
    beta: float = 0.25
    tau_fg: float = 1e-3
    tau_bg: float = -1e-4
    dropout_rate: float = 0.9
    keep_floor: int = 1
    epoch: int = 0

    # Losses
    lambda_point: float = 0.5
    lambda_crf: float = 0.5
    lambda_mil: float = 10.0
    dice_epsilon: float = 1e-6

    # Sinkhorn
    sinkhorn_tolerance: float = 1e-8
    sinkhorn_max_iterations: int = 200

    # CRF
    crf_iterations: int = 5
    crf_w_spatial: float = 3.0
    crf_w_bilateral: float = 5.0
    crf_theta_gamma: float = 3.0
    crf_theta_alpha: float = 30.0
    crf_theta_beta: float = 13.0
    crf_compat: float = 1.0

    # Geometry
    crop_pad: float = 0.2
    patch_side: int = 16
    target_side: int = 512

    # Synthetic similarity
    temperature: float = 0.2
    embedding_scale: float = 2.0

    # Pseudo masks
    refine: bool = True
    mask_threshold: float = 0.5

    def __post_init__(self):
        if self.tau_bg >= self.tau_fg:
            raise ConfigError("tau_bg {} must be below tau_fg {}".format(self.tau_bg, self.tau_fg))
        if self.target_side % self.patch_side:
            raise ConfigError("target_side {} is not divisible by patch_side {}".format(
                self.target_side, self.patch_side
            ))
        try:
            self.sinkhorn()
            self.crf()
            self.weights()
            self.dice()
            self.dropout(0)
        except InputError as exc:
            raise ConfigError(str(exc)) from exc

    def sinkhorn(self) -> SinkhornConfig:
        return SinkhornConfig(self.sinkhorn_tolerance, self.sinkhorn_max_iterations)

    def crf(self) -> CrfParams:
        return CrfParams(
            iterations=self.crf_iterations,
            w_spatial=self.crf_w_spatial,
            w_bilateral=self.crf_w_bilateral,
            theta_gamma=self.crf_theta_gamma,
            theta_alpha=self.crf_theta_alpha,
            theta_beta=self.crf_theta_beta,
            compat=self.crf_compat
        )

    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_point, self.lambda_crf, self.lambda_mil)

    def dice(self) -> DiceConfig:
        return DiceConfig(self.dice_epsilon)

    def dropout(self, seed: int) -> DropoutConfig:
        return DropoutConfig(self.dropout_rate, seed, self.keep_floor)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **overrides) -> "RunConfig":
        """
        Copy with some fields replaced; None values are ignored
        """

        overrides = {key: value for key, value in overrides.items() if value is not None}
        return parse_config({**self.as_dict(), **overrides})


def parse_config(values: Dict[str, Any]) -> RunConfig:
    """
    Validate a flat mapping and build a RunConfig
    """

    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError("Configuration must be a mapping, got {}".format(type(values).__name__))
    try:
        jsonschema.validate(values, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError("Invalid configuration: {}".format(exc.message)) from exc

    types = {f.name: f.type for f in fields(RunConfig)}
    converted = {}
    for key, value in values.items():
        if types[key] in (int, "int"):
            value = int(value)
        elif types[key] in (float, "float"):
            value = float(value)
        converted[key] = value
    return replace(RunConfig(), **converted)


def load_config(path: Optional[Union[str, Path]]) -> Tuple[RunConfig, Optional[int]]:
    """
    Load a YAML configuration, flat `key = value` lines or a run.json record

    Returns the configuration and the seed recorded in run.json, if any.
    """

    if path is None:
        return RunConfig(), None

    values = _read_document(path)
    seed = None
    if isinstance(values, dict) and isinstance(values.get("config"), dict):
        seed = values.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            raise ConfigError("Recorded seed must be a non-negative integer, got {}".format(seed))
        values = values["config"]

    return parse_config(values), seed


class _Loader(yaml.SafeLoader): # pylint: disable=too-many-ancestors
    """
    Safe loader that also reads exponent floats without a dot, such as 1e-3
    """


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?[0-9][0-9_]*(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789")
)


FLAT_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _flat_lines(text: str) -> List[Tuple[int, str]]:
    lines = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            lines.append((number, line))
    return lines


def _is_flat(text: str) -> bool:
    lines = _flat_lines(text)
    return bool(lines) and all(FLAT_LINE.match(line) for _, line in lines)


def _parse_flat(text: str) -> Dict[str, Any]:
    """
    Parse `key = value` lines; values are read as YAML scalars
    """

    values = {}
    for number, line in _flat_lines(text):
        key, raw = FLAT_LINE.match(line).groups()
        if key in values:
            raise ConfigError("Duplicate key {} on line {}".format(key, number))
        values[key] = yaml.load(raw, Loader=_Loader)
    return values


def _read_document(path: Union[str, Path]) -> Any:
    try:
        with open(path) as fp:
            text = fp.read()
    except OSError as exc:
        raise ConfigError("Cannot read {}: {}".format(path, exc)) from exc

    try:
        if Path(path).suffix == ".json":
            return json.loads(text)
        if _is_flat(text):
            return _parse_flat(text)
        return yaml.load(text, Loader=_Loader)
    except json.JSONDecodeError as exc:
        raise ConfigError("Cannot parse {}: {}".format(path, exc)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError("Cannot parse {}: {}".format(path, exc)) from exc


def load_scene_spec(path: Union[str, Path]) -> SceneSpec:
    """
    Load a synthetic scene suite specification
    """

    values = _read_document(path) or {}
    try:
        jsonschema.validate(values, scene_schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError("Invalid scene specification: {}".format(exc.message)) from exc

    for key in ["occluder_width", "size_range", "aspect_range"]:
        if key in values:
            values[key] = tuple(values[key])
    try:
        return SceneSpec(**values)
    except InputError as exc:
        raise ConfigError(str(exc)) from exc
