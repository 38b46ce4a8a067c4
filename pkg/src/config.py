"""
Configuration models and loaders.

Runtime knobs are pydantic models; environment overrides are read
through python-dotenv so a local ``.env`` file works the same as the
process environment.
"""

import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError


BUDGET_ENV = "AAG_BUDGET"
LOG_LEVEL_ENV = "AAG_LOG_LEVEL"
MAX_PRIVATE_LENGTH_ENV = "AAG_MAX_PRIVATE_LENGTH"
DEFAULT_MAX_PRIVATE_LENGTH = 256


class ContractionBudget(BaseModel):
    """Bounds guarding every contraction-based computation."""
    model_config = ConfigDict(frozen=True)

    max_closure: int = Field(default=2 ** 20, gt=0)
    max_depth: int = Field(default=64, gt=0)

    @classmethod
    def parse(cls, text: str) -> "ContractionBudget":
        """Parse ``"<max_closure>[,<max_depth>]"``."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts or len(parts) > 2:
            raise ConfigError(f"{BUDGET_ENV} must be '<max_closure>[,<max_depth>]', got {text!r}")
        try:
            values = [int(p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"{BUDGET_ENV} entries must be integers: {text!r}") from exc
        fields = {"max_closure": values[0]}
        if len(values) == 2:
            fields["max_depth"] = values[1]
        try:
            return cls(**fields)
        except ValidationError as exc:
            raise ConfigError(f"invalid {BUDGET_ENV}: {exc.errors()[0]['msg']}") from exc


class SessionSettings(BaseModel):
    """Desk-scale AAG parameters. Not a security recommendation."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(default=4, ge=1)
    m: int = Field(default=4, ge=1)
    s: int = Field(default=10, ge=1)
    t: int = Field(default=10, ge=1)
    generator_length: int = Field(default=4, ge=1)
    max_private_length: int = Field(default=DEFAULT_MAX_PRIVATE_LENGTH, ge=1)
    signed: bool = True

    @model_validator(mode="after")
    def _lengths_within_maximum(self) -> "SessionSettings":
        if max(self.s, self.t) > self.max_private_length:
            raise ValueError(
                f"private word lengths s={self.s}, t={self.t} exceed max_private_length={self.max_private_length}"
            )
        return self


class AttackSettings(BaseModel):
    """Brute-force adversary knobs."""
    model_config = ConfigDict(frozen=True)

    max_length: int = Field(default=4, ge=0)
    max_nodes: int = Field(default=1_000_000, gt=0)
    workers: int = Field(default=1, ge=1)
    dedupe: bool = False


class WireSettings(BaseModel):
    """Endpoint settings for host/join."""
    model_config = ConfigDict(frozen=True)

    host: str = "127.0.0.1"
    port: int = Field(default=7878, ge=0, le=65535)
    timeout: float = Field(default=30.0, gt=0)
    adopt_params: bool = False


class Settings(BaseModel):
    """Everything the CLI needs, assembled from defaults and the environment."""
    model_config = ConfigDict(frozen=True)

    budget: ContractionBudget = ContractionBudget()
    session: SessionSettings = SessionSettings()
    attack: AttackSettings = AttackSettings()
    wire: WireSettings = WireSettings()
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls, dotenv_path: Optional[Union[str, Path]] = None) -> "Settings":
        load_dotenv(dotenv_path=dotenv_path, override=False)
        fields = {}
        raw_budget = os.environ.get(BUDGET_ENV)
        if raw_budget:
            fields["budget"] = ContractionBudget.parse(raw_budget)
        level = os.environ.get(LOG_LEVEL_ENV)
        if level:
            fields["log_level"] = level.upper()
        raw_cap = os.environ.get(MAX_PRIVATE_LENGTH_ENV)
        if raw_cap:
            try:
                cap = int(raw_cap)
                defaults = SessionSettings()
                fields["session"] = SessionSettings(
                    max_private_length=cap, s=min(defaults.s, cap), t=min(defaults.t, cap)
                )
            except (ValueError, ValidationError) as exc:
                raise ConfigError(f"invalid {MAX_PRIVATE_LENGTH_ENV}: {raw_cap!r}") from exc
        return cls(**fields)


# --- text platform configs --------------------------------------------------

class AffineGeneratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    matrix: Tuple[Tuple[int, ...], ...]
    translation: Tuple[int, ...]


class AffineConfig(BaseModel):
    """An affine platform: Z^n semidirect a group generated by unimodular matrices."""
    model_config = ConfigDict(frozen=True)

    kind: str = "affine"
    dimension: int = Field(ge=1, le=255)
    generators: Tuple[AffineGeneratorConfig, ...]

    @model_validator(mode="after")
    def _check_shapes(self) -> "AffineConfig":
        if not self.generators:
            raise ValueError("at least one generator is required")
        n = self.dimension
        for i, gen in enumerate(self.generators, 1):
            if len(gen.matrix) != n or any(len(row) != n for row in gen.matrix):
                raise ValueError(f"matrix.{i} is not {n}x{n}")
            if len(gen.translation) != n:
                raise ValueError(f"translation.{i} has length {len(gen.translation)}, expected {n}")
        return self


class GOmegaConfig(BaseModel):
    """An eventually periodic omega = preperiod . period^inf over {0,1,2}."""
    model_config = ConfigDict(frozen=True)

    kind: str = "g_omega"
    preperiod: str = ""
    period: str = "012"

    @field_validator("preperiod", "period")
    @classmethod
    def _letters(cls, value: str) -> str:
        value = value.strip()
        if any(ch not in "012" for ch in value):
            raise ValueError(f"omega letters must be in 0,1,2: {value!r}")
        return value

    @field_validator("period")
    @classmethod
    def _nonempty(cls, value: str) -> str:
        if not value:
            raise ValueError("period must be nonempty")
        return value


class HanoiPlatformConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str = "hanoi"
    pegs: int = Field(default=3, ge=3, le=255)


PlatformConfig = Union[AffineConfig, GOmegaConfig, HanoiPlatformConfig]


def _int_list(text: str, lineno: int) -> List[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: expected integers, got {text!r}") from exc


def parse_platform_config(text: str) -> PlatformConfig:
    """
    Parse the line-oriented ``key = value`` platform config.

    Example (the Sanov pair)::

        kind = affine
        dimension = 2
        matrix.1 = 1 2 0 1
        translation.1 = 0 0
        matrix.2 = 1 0 2 1
        translation.2 = 0 0
    """
    entries: Dict[str, Tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)

    kind = entries.pop("kind", ("", 0))[0].lower()
    try:
        if kind == "affine":
            return _affine_from_entries(entries)
        if kind in ("g_omega", "gomega"):
            fields = {k: v for k, (v, _) in entries.items() if k in ("preperiod", "period")}
            _reject_unknown(entries, {"preperiod", "period"})
            return GOmegaConfig(**fields)
        if kind == "hanoi":
            _reject_unknown(entries, {"pegs"})
            pegs = entries.get("pegs", ("3", 0))
            return HanoiPlatformConfig(pegs=_int_list(pegs[0], pegs[1])[0])
    except ValidationError as exc:
        raise ConfigError(f"invalid {kind} config: {exc.errors()[0]['msg']}") from exc
    raise ConfigError(f"unknown or missing kind {kind!r} (expected affine, g_omega or hanoi)")


def _reject_unknown(entries: Dict[str, Tuple[str, int]], allowed: set) -> None:
    for key, (_, lineno) in entries.items():
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")


def _affine_from_entries(entries: Dict[str, Tuple[str, int]]) -> AffineConfig:
    if "dimension" not in entries:
        raise ConfigError("affine config needs 'dimension'")
    dim_text, dim_line = entries.pop("dimension")
    dims = _int_list(dim_text, dim_line)
    if len(dims) != 1:
        raise ConfigError(f"line {dim_line}: dimension must be one integer")
    n = dims[0]

    matrices: Dict[int, List[int]] = {}
    translations: Dict[int, List[int]] = {}
    for key, (value, lineno) in entries.items():
        name, _, index = key.partition(".")
        if name not in ("matrix", "translation") or not index.isdigit():
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        target = matrices if name == "matrix" else translations
        target[int(index)] = _int_list(value, lineno)

    indices = sorted(matrices)
    if indices != list(range(1, len(indices) + 1)):
        raise ConfigError("matrix.<i> keys must be numbered 1..s without gaps")
    generators = []
    for i in indices:
        flat = matrices[i]
        if len(flat) != n * n:
            raise ConfigError(f"matrix.{i} needs {n * n} entries, got {len(flat)}")
        rows = tuple(tuple(flat[r * n:(r + 1) * n]) for r in range(n))
        translation = tuple(translations.get(i, [0] * n))
        generators.append(AffineGeneratorConfig(matrix=rows, translation=translation))
    return AffineConfig(dimension=n, generators=tuple(generators))


def load_platform_config(path: Union[str, Path]) -> PlatformConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    return parse_platform_config(path.read_text(encoding="utf-8"))
