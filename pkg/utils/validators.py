import configparser
import re
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, root_validator, validator

from config import config

CONSTRUCTIONS = ("convolution", "cantor", "brownian", "kaufman", "arc", "one_line")
RANDOMIZED = ("convolution", "cantor", "brownian", "arc", "one_line")
REPORT_FORMATS = ("json", "csv")
TOLERANCE_KEYS = (
    "band_samples", "discard_low_bands", "arc_tol", "kaufman_tail_tol",
    "convolution_c", "retry_cap", "increment_c", "increment_eps",
)
LIST_KEYS = ("q", "t_vector", "formats")


class ExperimentConfig(BaseModel):
    """Validated experiment description; unknown keys are rejected"""
    schema_id: str = Field(default=config.REPORT_SCHEMA, alias="schema")
    construction: str
    s: float = Field(default=0.5)
    seed: Optional[int] = None
    levels: Optional[int] = Field(default=None, ge=1, le=64)
    paths: Optional[int] = Field(default=None, ge=100)
    q: Optional[List[float]] = None
    cs: Optional[float] = Field(default=None, ge=0)
    n: int = Field(default=1, ge=1, le=2)
    kmax: Optional[int] = Field(default=None, ge=16)
    xi_max: Optional[float] = Field(default=None, gt=1)
    rmax: Optional[float] = Field(default=None, gt=1, le=1e5)
    samples: Optional[int] = Field(default=None, ge=1)
    gram_k: Optional[int] = Field(default=None, ge=1, le=512)
    x0: Optional[float] = None
    t_vector: Optional[List[float]] = None
    output: Optional[str] = None
    formats: List[str] = Field(default_factory=lambda: ["json"])
    tolerances: Dict[str, float] = Field(default_factory=dict)

    class Config:
        extra = "forbid"
        populate_by_name = True

    @validator("schema_id")
    def validate_schema(cls, v: str) -> str:
        if v != config.REPORT_SCHEMA:
            raise ValueError(f"unsupported schema {v!r}; expected {config.REPORT_SCHEMA!r}")
        return v

    @validator("construction")
    def validate_construction(cls, v: str) -> str:
        v = v.strip().lower().replace("oneline", "one_line")
        if v not in CONSTRUCTIONS:
            raise ValueError(f"construction must be one of: {list(CONSTRUCTIONS)}")
        return v

    @validator("s")
    def validate_s(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError(f"s={v} outside the valid interval (0, 1]")
        return v

    @validator("seed")
    def validate_seed(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and not 0 <= v < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return v

    @validator("formats")
    def validate_formats(cls, v: List[str]) -> List[str]:
        v = [f.strip().lower() for f in v if f.strip()]
        unknown = sorted(set(v) - set(REPORT_FORMATS))
        if unknown or not v:
            raise ValueError(f"formats must be a nonempty subset of {list(REPORT_FORMATS)}")
        return v

    @validator("tolerances")
    def validate_tolerances(cls, v: Dict[str, float]) -> Dict[str, float]:
        unknown = sorted(set(v) - set(TOLERANCE_KEYS))
        if unknown:
            raise ValueError(f"unknown tolerance keys {unknown}; allowed: {list(TOLERANCE_KEYS)}")
        return v

    @root_validator(skip_on_failure=True)
    def validate_seed_required(cls, values):
        if values.get("construction") in RANDOMIZED and values.get("seed") is None:
            raise ValueError(f"seed is mandatory for construction {values['construction']!r}")
        return values

    def echo(self) -> Dict:
        """Config as embedded in reports (schema under its file key)."""
        return self.dict(by_alias=True)


def _split_list(value: str) -> List[str]:
    return [item for item in re.split(r"[,\s]+", value.strip()) if item]


def load_experiment(path: str) -> ExperimentConfig:
    """Parse a flat INI experiment file with [experiment] and optional [tolerances]."""
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as handle:
        parser.read_file(handle)
    return experiment_from_parser(parser)


def experiment_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    unknown = [name for name in parser.sections() if name not in ("experiment", "tolerances")]
    if unknown:
        raise ValueError(f"unknown sections {unknown}")
    if not parser.has_section("experiment"):
        raise ValueError("missing [experiment] section")

    raw: Dict = dict(parser["experiment"])
    if "schema" not in raw:
        raise ValueError(f"missing schema key (expected {config.REPORT_SCHEMA})")
    for key in LIST_KEYS:
        if key in raw:
            raw[key] = _split_list(raw[key])
    if parser.has_section("tolerances"):
        raw["tolerances"] = dict(parser["tolerances"])
    return ExperimentConfig(**raw)


def dump_experiment(cfg: ExperimentConfig) -> str:
    """INI text that parses back to the same config."""
    lines = ["[experiment]", f"schema = {cfg.schema_id}"]
    for key, value in cfg.dict(exclude={"schema_id", "tolerances"}, exclude_none=True).items():
        if isinstance(value, list):
            value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    if cfg.tolerances:
        lines.append("")
        lines.append("[tolerances]")
        lines.extend(f"{key} = {value!r}" for key, value in sorted(cfg.tolerances.items()))
    return "\n".join(lines) + "\n"


def sanitize_filename(filename: str) -> str:
    """Sanitize a report stem for safe storage"""
    filename = re.sub(r'[<>:"/\\|?*]', '_', filename)
    filename = filename.strip('. ')
    if len(filename) > 255:
        filename = filename[:255]
    return filename or 'report'


def validate_environment_config() -> List[str]:
    """Validate environment configuration and return list of issues"""
    issues = []

    output = Path(config.OUTPUT_DIR)
    if output.exists() and not output.is_dir():
        issues.append(f"OUTPUT_DIR {config.OUTPUT_DIR} exists and is not a directory")

    if config.CONVOLUTION_C <= 1:
        issues.append("CONVOLUTION_C must exceed 1")

    if config.ARC_TOL < 1e-12:
        issues.append("ARC_TOL below 1e-12 is not supported by the arc quadrature")

    if config.KAUFMAN_TAIL_TOL <= 0 or config.KAUFMAN_INNER_TAIL_TOL <= 0:
        issues.append("Kaufman tail tolerances must be positive")

    return issues
