"""Run configuration: one JSON document, overridable from the command line."""

import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from .comparison import ConfidenceSpec
from .errors import ConfigurationError, ParseError
from .lifshitz import QuadratureSettings
from .permittivity.kk import TabulatedModel
from .permittivity.models import (DrudeModel, DrudeParams, Oscillator, PlasmaLikeModel,
                                  PlasmaLikeParams)
from .permittivity.tables import MergedSpectrum, read_optical_table
from .permittivity.window import WindowedModel, WindowParams

MODEL_KINDS = ("drude", "plasma-like", "tabulated-kk", "windowed-kk")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OscillatorConfig(_Strict):
    strength: float
    frequency: float
    width: float


class WindowConfig(_Strict):
    omega_c: Tuple[float, float] = Field(description="real and imaginary part, eV")
    p: int
    q: int

    def params(self):
        return WindowParams(complex(*self.omega_c), self.p, self.q)


class ModelConfig(_Strict):
    kind: Literal["drude", "plasma-like", "tabulated-kk", "windowed-kk"]
    tag: Optional[str] = None
    plasma_frequency_eV: Optional[float] = None
    relaxation_eV: Optional[float] = None
    oscillators: List[OscillatorConfig] = []
    optical_table: Optional[str] = None
    low_frequency: Literal["drude", "none"] = "drude"
    tail: Literal["power-law", "cutoff"] = "power-law"
    window: Optional[WindowConfig] = None
    guard: float = 1e-3

    @model_validator(mode="after")
    def _check(self):
        need = {
            "drude": ("plasma_frequency_eV", "relaxation_eV"),
            "plasma-like": ("plasma_frequency_eV",),
            "tabulated-kk": ("optical_table",),
            "windowed-kk": ("optical_table", "window"),
        }[self.kind]
        missing = [n for n in need if getattr(self, n) is None]
        if self.kind == "tabulated-kk" and self.low_frequency == "drude":
            missing += [n for n in ("plasma_frequency_eV", "relaxation_eV")
                        if getattr(self, n) is None]
        if missing:
            raise ValueError(f"model kind {self.kind!r} requires {', '.join(missing)}")
        return self

    @property
    def label(self):
        return self.tag or self.kind

    def build(self):
        """Instantiate the permittivity model described here."""
        oscillators = [Oscillator(o.strength, o.frequency, o.width) for o in self.oscillators]
        if self.kind == "drude":
            return DrudeModel(DrudeParams(self.plasma_frequency_eV, self.relaxation_eV),
                              oscillators)
        if self.kind == "plasma-like":
            return PlasmaLikeModel(PlasmaLikeParams(self.plasma_frequency_eV, oscillators))
        table = read_optical_table(self.optical_table)
        if self.kind == "tabulated-kk":
            drude = None
            if self.low_frequency == "drude":
                drude = DrudeParams(self.plasma_frequency_eV, self.relaxation_eV)
            return TabulatedModel(MergedSpectrum(table, drude, self.tail))
        return WindowedModel(table, self.window.params(), guard=self.guard)


class GridConfig(_Strict):
    start: float
    stop: float
    count: int = Field(ge=1)
    spacing: Literal["linear", "log"] = "linear"

    def values(self):
        if self.count == 1:
            return np.array([self.start])
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


class XiGridConfig(_Strict):
    values: Optional[List[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    count: Optional[int] = None

    def points(self):
        if self.values is not None:
            return np.array(self.values, dtype=float)
        if None in (self.start, self.stop, self.count):
            raise ConfigurationError("xi grid needs either values or start/stop/count")
        return np.geomspace(self.start, self.stop, self.count)


class QuadratureConfig(_Strict):
    rtol_inner: float = 1e-7
    rtol_outer: float = 1e-6
    y_max: float = 80.0
    xi_cutoff: float = 50.0
    matsubara_rtol: float = 1e-9
    matsubara_min_terms: int = 50
    workers: int = 1

    def settings(self):
        return QuadratureSettings(**self.model_dump())


class WindowRootsConfig(_Strict):
    omega_c: Tuple[float, float] = (1.0, -2.0)
    p: int = 1
    q: int = 3
    xi_min: float = 0.1
    xi_max: float = 10.0


class PatchConfig(_Strict):
    grain_diameter_nm: float = 300.0
    sphere_radius_um: float = 150.0
    a_nm: float = 160.0


class RunConfig(_Strict):
    models: List[ModelConfig] = []
    temperature_K: float = Field(0.0, ge=0.0)
    grid: Optional[GridConfig] = None
    xi_grid: Optional[XiGridConfig] = None
    quadrature: QuadratureConfig = QuadratureConfig()
    confidence: List[float] = [0.95, 0.70]
    distribution: Literal["uniform", "normal"] = "normal"
    band_fraction: float = Field(0.005, ge=0.0)
    combination: Literal["rss", "linear-sum"] = "rss"
    delta_a_nm: Optional[float] = None
    experiment: Optional[str] = None
    plate_roughness: Optional[str] = None
    sphere_roughness: Optional[str] = None
    interpolate: bool = False
    window_roots: WindowRootsConfig = WindowRootsConfig()
    patch: PatchConfig = PatchConfig()
    output: str = "."
    format: Literal["csv", "json", "both"] = "both"

    @model_validator(mode="before")
    @classmethod
    def _single_model(cls, data):
        if isinstance(data, dict) and "model" in data:
            data = dict(data)
            single = data.pop("model")
            data["models"] = list(data.get("models", [])) + [single]
        return data

    @model_validator(mode="after")
    def _check(self):
        tags = [m.label for m in self.models]
        if len(set(tags)) != len(tags):
            raise ValueError(f"model tags must be distinct, got {tags}")
        for level in self.confidence:
            ConfidenceSpec(level, self.distribution)
        return self

    def confidence_specs(self):
        return [ConfidenceSpec(level, self.distribution) for level in self.confidence]

    def echo(self):
        return self.model_dump(mode="json")


def parse_config(data, source="<config>"):
    try:
        return RunConfig.model_validate(data)
    except PydanticError as exc:
        raise ParseError(f"invalid configuration: {exc}", source) from None
    except ConfigurationError as exc:
        raise ParseError(str(exc), source) from None


def load_config(path):
    """Read a JSON config; relative paths (inputs and output) are resolved against its folder."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}", path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object", path)
    base = path.resolve().parent

    def fix(p):
        return p if p is None or Path(p).is_absolute() else str(base / p)

    for key in ("experiment", "plate_roughness", "sphere_roughness", "output"):
        if data.get(key) is not None:
            data[key] = fix(data[key])
    for m in ([data["model"]] if isinstance(data.get("model"), dict) else []) + \
            [m for m in data.get("models", []) if isinstance(m, dict)]:
        if m.get("optical_table") is not None:
            m["optical_table"] = fix(m["optical_table"])
    return parse_config(data, path)
